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
#include <memory>
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

/// Encoder with a valence head over the CLS state and an EC head over the
/// max-pool of the CLS state and each candidate's span states.
class DiscriminativeModel {
 public:
  DiscriminativeModel() = default;
  explicit DiscriminativeModel(const EncoderConfig& config);

  const EncoderConfig& config() const { return encoder_.config(); }
  Encoder& encoder() { return encoder_; }
  const Encoder& encoder() const { return encoder_; }

  /// Encoder parameters followed by both heads.
  std::vector<ag::Parameter*> parameters();
  std::vector<ag::Parameter*> valence_head_parameters();
  std::vector<ag::Parameter*> ec_head_parameters();
  std::vector<ag::Parameter>& head_parameters() { return heads_; }

  /// (batch x 3) valence logits from the first row of every state.
  ag::Var valence_logits(ag::Tape& tape, const HiddenStates& hidden) const;
  /// (candidates x 2) EC logits, candidates of all examples in order. Requires
  /// at least one candidate.
  ag::Var ec_logits(ag::Tape& tape, const HiddenStates& hidden,
                    std::span<const DiscriminativeExample> examples) const;

  CheckpointFile to_checkpoint(const std::string& metadata_json) const;
  static DiscriminativeModel from_checkpoint(const CheckpointFile& file);

 private:
  Encoder encoder_;
  mutable std::vector<ag::Parameter> heads_;  // valence w, b; ec w, b
};

struct DiscOutput {
  ag::Matrix valence_probs;
  ag::Matrix ec_probs;
  /// Invalid when no loss was requested or the task had nothing to score.
  ag::Var loss_valence;
  ag::Var loss_ec;
  ag::Var loss;
  /// Step-2 contexts of a two-step pass, one per unit.
  std::vector<TwoStepContext> contexts;
};

/// lambda * loss_valence + (1 - lambda) * loss_ec. Throws SpecError for lambda outside [0, 1].
double interpolated_loss(double lambda, double loss_valence, double loss_ec);
ag::Var interpolated_loss(ag::Tape& tape, double lambda, ag::Var loss_valence, ag::Var loss_ec);

/// Mean cross-entropy losses are attached when `with_loss`. EC on a batch
/// without candidates throws std::invalid_argument.
DiscOutput forward_single(ag::Tape& tape, const DiscriminativeModel& model,
                          std::span<const DiscriminativeExample> batch, Task task, bool with_loss = true,
                          Rng* dropout_rng = nullptr);
DiscOutput forward_joint(ag::Tape& tape, const DiscriminativeModel& model, std::span<const DiscriminativeExample> batch,
                         double lambda, LossAggregation aggregation = LossAggregation::kInterpolate,
                         Rng* dropout_rng = nullptr);

struct TwoStepOptions {
  TaskOrder order = TaskOrder::kValFirst;
  double tf_prob = 0.0;
  double lambda = 0.5;
  LossAggregation aggregation = LossAggregation::kInterpolate;
  /// Training draws teacher forcing; at inference tf_prob is ignored.
  bool training = false;
  /// Every step-2 context is the ground truth.
  bool oracle = false;
};

/// Step 1 runs the first task on context-free inputs. Step 2 re-encodes each
/// unit with its first-step label (gold when forced) and runs the second task.
DiscOutput forward_two_step(ag::Tape& tape, const DiscriminativeModel& model, const Vocabulary& vocab,
                            std::span<const FunctionalUnit* const> units, const TwoStepOptions& options, Rng& rng,
                            Rng* dropout_rng = nullptr);

struct DiscSetting {
  Setting setting = Setting::kJoint;
  /// Task of the single-task setting.
  Task task = Task::kValence;
  TaskOrder order = TaskOrder::kValFirst;
  bool oracle = false;
};

/// Arg-max labels, ties to the lowest class code. Throws std::length_error when
/// the contextualised input exceeds max_seq_len.
UnitPrediction predict_unit(const DiscriminativeModel& model, const Vocabulary& vocab, const FunctionalUnit& unit,
                            const DiscSetting& setting);
std::vector<UnitPrediction> predict_units(const DiscriminativeModel& model, const Vocabulary& vocab,
                                          std::span<const FunctionalUnit> units, const DiscSetting& setting);

/// Index of the largest entry; the first one wins ties.
int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row);

/// Training objective of a setting over `train`, selected on `validation`. The
/// two-step oracle trains on the second-step loss with gold first-step labels.
std::unique_ptr<TrainingTask> make_discriminative_task(DiscriminativeModel& model, const Vocabulary& vocab,
                                                       std::span<const FunctionalUnit> train,
                                                       std::span<const FunctionalUnit> validation,
                                                       const DiscSetting& setting, const TrainConfig& config);

}  // namespace mtlaffect
