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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mtlaffect/autograd.hpp"
#include "mtlaffect/encodings.hpp"
#include "mtlaffect/random.hpp"

namespace mtlaffect {

class KvConfig;

/// How the two task losses of a multi-task step are combined.
enum class LossAggregation { kInterpolate, kSum };

struct TrainConfig {
  double learning_rate = 5e-5;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 30;
  double warmup_fraction = 0.10;
  std::size_t early_stop_patience = 5;
  double lambda = 0.5;
  double tf_prob = 0.0;
  std::uint64_t seed = 0;
  double weight_decay = 0.01;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  /// Global gradient-norm clip; 0 disables clipping.
  double grad_clip = 0.0;
  LossAggregation aggregation = LossAggregation::kInterpolate;
  LossScope loss_scope = LossScope::kFullSequence;
  /// Fraction of EC prompts in generative joint training; negative keeps the corpus ratio.
  double joint_ec_fraction = -1.0;

  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

/// Throws SpecError naming the offending field.
void validate_train_config(const TrainConfig& config);

/// Field names accepted in config files (and as MTLAFFECT_<NAME> overrides).
const std::vector<std::string>& train_config_keys();
TrainConfig train_config_from(const KvConfig& config, TrainConfig base);
std::string train_config_to_text(const TrainConfig& config);

/// Linear warm-up from 0 to `peak_lr` over round(warmup_fraction * total_steps)
/// steps (at least one), then linear decay to 0 at `total_steps`.
double lr_at(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_fraction);
std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction);

/// Adam with decoupled weight decay. Decay applies to matrices only, not to
/// bias / normalisation vectors.
class AdamW {
 public:
  AdamW(std::vector<ag::Parameter*> params, const TrainConfig& config);
  void zero_grad();
  void step(double lr);
  std::size_t steps() const { return t_; }

 private:
  std::vector<ag::Parameter*> params_;
  std::vector<ag::Matrix> m_;
  std::vector<ag::Matrix> v_;
  double beta1_, beta2_, eps_, weight_decay_, clip_;
  std::size_t t_ = 0;
};

struct TrainLog {
  std::vector<double> epoch_train_loss;
  std::vector<double> epoch_val_metric;
  std::vector<double> lr_trace;
  std::size_t total_steps = 0;
  std::size_t stopping_epoch = 0;
  std::size_t best_epoch = 0;
  std::string best_checkpoint_id;
  /// Free-form bookkeeping (phase hashes and the like).
  std::map<std::string, std::string> notes;

  std::string to_json() const;
  friend bool operator==(const TrainLog&, const TrainLog&) = default;
};

/// A model bound to its training data and its selection metric.
class TrainingTask {
 public:
  virtual ~TrainingTask() = default;
  virtual std::vector<ag::Parameter*> parameters() = 0;
  /// Number of training items (units or prompts) per epoch.
  virtual std::size_t num_items() const = 0;
  /// Mean loss over the given items, recorded on `tape`.
  virtual ag::Var batch_loss(ag::Tape& tape, std::span<const std::size_t> items, Rng& rng) = 0;
  /// Validation score; larger is better.
  virtual double validation_metric() = 0;
};

/// Mini-batch training with the warm-up schedule and early stopping. On return
/// the task's parameters hold the best-validation snapshot.
TrainLog train(TrainingTask& task, const TrainConfig& config);

}  // namespace mtlaffect
