// Copyright 2026 The mtlaffect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "mtlaffect/autograd.hpp"
#include "mtlaffect/backbone.hpp"

namespace mtlaffect {

inline constexpr std::string_view kCheckpointMagic = "MTLAFFECT-CKPT";
inline constexpr int kCheckpointVersion = 1;

struct NamedArray {
  std::string name;
  ag::Matrix value;
};

/// Single-file weight container.
///
/// Layout: magic line, version line, byte length of the JSON header line, the
/// header (caller metadata plus array names and shapes), then every array as
/// little-endian IEEE-754 doubles in row-major order.
struct CheckpointFile {
  /// JSON object text supplied by the caller (model config, regime, ...).
  std::string metadata = "{}";
  std::vector<NamedArray> arrays;
};

void save_checkpoint(const CheckpointFile& file, const std::filesystem::path& path);
CheckpointFile load_checkpoint(const std::filesystem::path& path);

std::vector<NamedArray> export_parameters(const std::vector<ag::Parameter>& params, const std::string& prefix = "");
/// Copies values by name; throws ParseError on missing names or shape mismatch.
void import_parameters(std::vector<ag::Parameter>& params, const std::vector<NamedArray>& arrays,
                       const std::string& prefix = "");

std::string transformer_config_json(const TransformerConfig& config);
TransformerConfig transformer_config_from_json(const std::string& json_text);

}  // namespace mtlaffect
