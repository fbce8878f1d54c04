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

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "mtlaffect/backbone.hpp"
#include "mtlaffect/checkpoint.hpp"
#include "mtlaffect/corpus.hpp"
#include "mtlaffect/discriminative.hpp"
#include "mtlaffect/encodings.hpp"
#include "mtlaffect/generative.hpp"
#include "mtlaffect/metrics.hpp"
#include "mtlaffect/trainer.hpp"

namespace mtlaffect {

class KvConfig;

enum class ModelFamily { kDiscriminative, kGenerative };

/// Hyper-parameter presets. `kPublished` holds the reference fine-tuning values;
/// `kDesk` suits the small randomly initialised models trained here.
enum class Profile { kPublished, kDesk };

std::string_view profile_name(Profile p);
Profile parse_profile(std::string_view name);

/// One experimental cell: model family, setting, task order and flags, with
/// the model and optimisation settings used to run it.
struct RegimeConfig {
  ModelFamily family = ModelFamily::kDiscriminative;
  Setting setting = Setting::kJoint;
  Task task = Task::kValence;
  TaskOrder order = TaskOrder::kValFirst;
  bool oracle = false;
  bool domain_adapt = false;

  Profile profile = Profile::kDesk;
  TransformerConfig model;
  TrainConfig train;
  /// Learning rate of the first-task phase of domain adaptation; 0 takes the
  /// profile's single-task value.
  double phase1_learning_rate = 0.0;
  /// Seed of the train / validation / test split.
  std::uint64_t split_seed = 0;

  /// {disc|gen}:{single-val|single-ec|joint|two-step-val-ec|two-step-ec-val}[:oracle][:domain-adapt]
  std::string id() const;
  /// Parses an id and fills defaults for `profile`. Throws RegimeError.
  static RegimeConfig parse(std::string_view id, Profile profile = Profile::kDesk);

  DiscSetting disc_setting() const;
  GenSetting gen_setting() const;
};

/// Optimisation defaults of a regime (learning rate, lambda, teacher forcing, epochs).
TrainConfig default_train_config(const RegimeConfig& regime, Profile profile);
TransformerConfig default_model_config(Profile profile);

/// Keys accepted by apply_config: profile, model fields, split_seed,
/// phase1_learning_rate and every TrainConfig key.
std::vector<std::string> regime_config_keys();
/// Overrides model / training fields from a key=value config. Throws SpecError.
void apply_config(RegimeConfig& regime, const KvConfig& config);
std::string regime_config_to_text(const RegimeConfig& regime);

/// A trained model of either family.
using TrainedModel = std::variant<DiscriminativeModel, Decoder>;

struct RunResult {
  RunMetrics metrics;
  TrainLog log;
  /// Phase-1 log of a domain-adapted run.
  std::optional<TrainLog> phase1_log;
  TrainedModel model;
  std::vector<UnitPrediction> predictions;
};

/// Predictions and metrics of a trained model on `units` under the regime's
/// setting. Throws RegimeError on an empty set.
RunMetrics evaluate_regime(const TrainedModel& model, const Vocabulary& vocab, std::span<const FunctionalUnit> units,
                           const RegimeConfig& regime, std::uint64_t seed,
                           std::vector<UnitPrediction>* predictions = nullptr);

/// Trains one seeded run on the split and evaluates it on the test part.
RunResult run_single(const RegimeConfig& regime, const CorpusSplit& split, const Vocabulary& vocab,
                     std::uint64_t seed);

/// Runs seeds base_seed .. base_seed + n_seeds - 1. Throws RegimeError when the
/// corpus cannot support the regime.
std::vector<RunMetrics> run_regime(const RegimeConfig& regime, const std::vector<FunctionalUnit>& units,
                                   std::size_t n_seeds, std::uint64_t base_seed = 0);

/// Checkpoint of a trained model with regime, seed and vocabulary size in the metadata.
CheckpointFile model_checkpoint(const TrainedModel& model, const RegimeConfig& regime, std::uint64_t seed);
TrainedModel model_from_checkpoint(const CheckpointFile& file);

}  // namespace mtlaffect
