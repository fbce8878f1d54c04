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
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtlaffect/autograd.hpp"
#include "mtlaffect/backbone.hpp"
#include "mtlaffect/checkpoint.hpp"
#include "mtlaffect/encodings.hpp"
#include "mtlaffect/metrics.hpp"
#include "mtlaffect/trainer.hpp"

namespace mtlaffect {

/// Decoding schedule of a prompt: one (forced separator, allowed labels) pair per slot.
struct GenerationConstraint {
  struct Slot {
    int forced_token = 0;
    std::vector<int> allowed;
    Task task = Task::kValence;
    std::size_t candidate = 0;
  };
  std::vector<Slot> schedule;

  static GenerationConstraint from_prompt(const PromptSequence& prompt);
};

/// Prompts of both kinds, tagged, as they are fed to one optimisation step.
struct MixedBatch {
  std::vector<PromptSequence> prompts;
  std::vector<Task> kinds;

  /// Right-padded ids and masks of the prompts.
  TokenBatch padded(int pad_id) const;
};

/// Mean next-token cross-entropy over every position selected by the loss
/// masks of the batch. Throws std::invalid_argument when nothing is selected.
ag::Var lm_loss(ag::Tape& tape, const Decoder& decoder, std::span<const PromptSequence> prompts,
                Rng* dropout_rng = nullptr);

/// For every slot appends the forced separator, then the arg-max over the
/// slot's allowed labels (first wins ties). `fixed[i]`, when set, is written
/// instead of decoding slot i. Returns one label token per slot.
std::vector<int> constrained_decode(const Decoder& decoder, std::span<const int> prefix,
                                    const GenerationConstraint& constraint,
                                    std::span<const std::optional<int>> fixed = {});

struct GenSetting {
  Setting setting = Setting::kJoint;
  Task task = Task::kValence;
  TaskOrder order = TaskOrder::kValFirst;
  bool oracle = false;
};

/// Second-task labels decoded after gold first-task labels.
std::vector<int> oracle_decode(const Decoder& decoder, const Vocabulary& vocab, const FunctionalUnit& unit,
                               TaskOrder order);

/// Units without candidates fall back to the valence prompt in the two-step
/// setting and get an empty EC list.
UnitPrediction predict_unit(const Decoder& decoder, const Vocabulary& vocab, const FunctionalUnit& unit,
                            const GenSetting& setting);
std::vector<UnitPrediction> predict_units(const Decoder& decoder, const Vocabulary& vocab,
                                          std::span<const FunctionalUnit> units, const GenSetting& setting);

/// Training prompts of a setting. Joint training mixes both kinds at the corpus
/// ratio unless config.joint_ec_fraction is set; two-step uses the two-step
/// prompt for units with candidates and the valence prompt otherwise. Oracle
/// prompts keep only the second task's labels in the loss mask.
std::vector<PromptSequence> training_prompts(std::span<const FunctionalUnit> units, const Vocabulary& vocab,
                                             const GenSetting& setting, const TrainConfig& config,
                                             std::vector<Task>* kinds = nullptr);

std::unique_ptr<TrainingTask> make_generative_task(Decoder& decoder, const Vocabulary& vocab,
                                                   std::span<const FunctionalUnit> train,
                                                   std::span<const FunctionalUnit> validation,
                                                   const GenSetting& setting, const TrainConfig& config);

TrainLog train_generative(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                          std::span<const FunctionalUnit> validation, const GenSetting& setting,
                          const TrainConfig& config);
TrainLog train_joint_generative(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                                std::span<const FunctionalUnit> validation, const TrainConfig& config);
TrainLog train_two_step_generative(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                                   std::span<const FunctionalUnit> validation, TaskOrder order,
                                   const TrainConfig& config);

struct DomainAdaptResult {
  TrainLog phase1;
  TrainLog phase2;
  /// Weights handed from phase 1 to phase 2.
  CheckpointFile boundary;
  std::uint64_t initial_hash = 0;
  std::uint64_t boundary_hash = 0;
  std::uint64_t phase2_start_hash = 0;
};

/// Phase 1 fine-tunes on the first task's single-task prompts; phase 2 continues
/// from those weights with two-step training in the matching order.
DomainAdaptResult domain_adapt(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                               std::span<const FunctionalUnit> validation, Task first_task,
                               const TrainConfig& phase1, const TrainConfig& phase2);

CheckpointFile decoder_checkpoint(const Decoder& decoder, const std::string& metadata_json);
Decoder decoder_from_checkpoint(const CheckpointFile& file);

}  // namespace mtlaffect
