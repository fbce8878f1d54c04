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

#include "mtlaffect/checkpoint.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "mtlaffect/error.hpp"

namespace mtlaffect {

using nlohmann::json;

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes a little-endian host");

void save_checkpoint(const CheckpointFile& file, const std::filesystem::path& path) {
  json header;
  header["metadata"] = json::parse(file.metadata);
  header["arrays"] = json::array();
  for (const auto& a : file.arrays) {
    header["arrays"].push_back(json{{"name", a.name}, {"rows", a.value.rows()}, {"cols", a.value.cols()}});
  }
  const std::string header_text = header.dump();

  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write checkpoint '" + path.string() + "'");
  out << kCheckpointMagic << '\n' << kCheckpointVersion << '\n' << header_text.size() << '\n' << header_text << '\n';
  for (const auto& a : file.arrays) {
    out.write(reinterpret_cast<const char*>(a.value.data()),
              static_cast<std::streamsize>(a.value.size() * static_cast<Eigen::Index>(sizeof(double))));
  }
  if (!out) throw std::runtime_error("failed writing checkpoint '" + path.string() + "'");
}

CheckpointFile load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint '" + path.string() + "'");
  std::string line;
  if (!std::getline(in, line) || line != kCheckpointMagic) throw ParseError(1, "not a checkpoint (bad magic)");
  if (!std::getline(in, line) || line != std::to_string(kCheckpointVersion)) {
    throw ParseError(2, "unsupported checkpoint version '" + line + "'");
  }
  if (!std::getline(in, line)) throw ParseError(3, "missing header length");
  std::size_t length = 0;
  try {
    length = std::stoul(line);
  } catch (const std::exception&) {
    throw ParseError(3, "bad header length");
  }
  std::string header_text(length, '\0');
  in.read(header_text.data(), static_cast<std::streamsize>(length));
  if (!in || in.get() != '\n') throw ParseError(4, "truncated header");
  json header;
  try {
    header = json::parse(header_text);
  } catch (const json::exception& e) {
    throw ParseError(4, std::string("bad header: ") + e.what());
  }

  CheckpointFile file;
  file.metadata = header.at("metadata").dump();
  for (const auto& entry : header.at("arrays")) {
    NamedArray a;
    a.name = entry.at("name").get<std::string>();
    a.value.resize(entry.at("rows").get<Eigen::Index>(), entry.at("cols").get<Eigen::Index>());
    in.read(reinterpret_cast<char*>(a.value.data()),
            static_cast<std::streamsize>(a.value.size() * static_cast<Eigen::Index>(sizeof(double))));
    if (!in) throw ParseError(5, "truncated data for array '" + a.name + "'");
    file.arrays.push_back(std::move(a));
  }
  return file;
}

std::vector<NamedArray> export_parameters(const std::vector<ag::Parameter>& params, const std::string& prefix) {
  std::vector<NamedArray> out;
  out.reserve(params.size());
  for (const auto& p : params) out.push_back(NamedArray{prefix + p.name, p.value});
  return out;
}

void import_parameters(std::vector<ag::Parameter>& params, const std::vector<NamedArray>& arrays,
                       const std::string& prefix) {
  for (auto& p : params) {
    const std::string name = prefix + p.name;
    auto it = std::find_if(arrays.begin(), arrays.end(), [&](const NamedArray& a) { return a.name == name; });
    if (it == arrays.end()) throw ParseError(0, "checkpoint lacks parameter '" + name + "'");
    if (it->value.rows() != p.value.rows() || it->value.cols() != p.value.cols()) {
      throw ParseError(0, "shape mismatch for parameter '" + name + "'");
    }
    p.value = it->value;
    p.zero_grad();
  }
}

std::string transformer_config_json(const TransformerConfig& c) {
  json j{{"vocab_size", c.vocab_size},     {"hidden_dim", c.hidden_dim},         {"n_layers", c.n_layers},
         {"n_heads", c.n_heads},           {"max_seq_len", c.max_seq_len},       {"ffn_multiplier", c.ffn_multiplier},
         {"dropout_rate", c.dropout_rate}, {"seed", c.seed}};
  return j.dump();
}

TransformerConfig transformer_config_from_json(const std::string& json_text) {
  const json j = json::parse(json_text);
  TransformerConfig c;
  c.vocab_size = j.at("vocab_size").get<std::size_t>();
  c.hidden_dim = j.at("hidden_dim").get<std::size_t>();
  c.n_layers = j.at("n_layers").get<std::size_t>();
  c.n_heads = j.at("n_heads").get<std::size_t>();
  c.max_seq_len = j.at("max_seq_len").get<std::size_t>();
  c.ffn_multiplier = j.at("ffn_multiplier").get<std::size_t>();
  c.dropout_rate = j.at("dropout_rate").get<double>();
  c.seed = j.at("seed").get<std::uint64_t>();
  return c;
}

}  // namespace mtlaffect
