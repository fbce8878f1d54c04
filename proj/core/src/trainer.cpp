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

#include "mtlaffect/trainer.hpp"

#include <cmath>
#include <cstdio>
#include <limits>
#include <numeric>
#include <stdexcept>

#include "json.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/kv_config.hpp"

namespace mtlaffect {

void validate_train_config(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw SpecError("learning_rate", "must be positive");
  if (c.batch_size == 0) throw SpecError("batch_size", "must be positive");
  if (c.max_epochs == 0) throw SpecError("max_epochs", "must be positive");
  if (!(c.warmup_fraction >= 0.0 && c.warmup_fraction < 1.0)) throw SpecError("warmup_fraction", "must lie in [0, 1)");
  if (c.early_stop_patience == 0) throw SpecError("early_stop_patience", "must be at least 1");
  if (!(c.lambda >= 0.0 && c.lambda <= 1.0)) throw SpecError("lambda", "must lie in [0, 1]");
  if (!(c.tf_prob >= 0.0 && c.tf_prob <= 1.0)) throw SpecError("tf_prob", "must lie in [0, 1]");
  if (!(c.weight_decay >= 0.0)) throw SpecError("weight_decay", "must be non-negative");
  if (!(c.grad_clip >= 0.0)) throw SpecError("grad_clip", "must be non-negative");
  if (c.joint_ec_fraction >= 1.0) throw SpecError("joint_ec_fraction", "must be below 1 (negative = corpus ratio)");
}

const std::vector<std::string>& train_config_keys() {
  static const std::vector<std::string> kKeys = {
      "learning_rate", "batch_size", "max_epochs", "warmup_fraction", "early_stop_patience",
      "lambda",        "tf_prob",    "seed",       "weight_decay",    "beta1",
      "beta2",         "epsilon",    "grad_clip",  "aggregation",     "loss_scope",
      "joint_ec_fraction"};
  return kKeys;
}

TrainConfig train_config_from(const KvConfig& kv, TrainConfig c) {
  c.learning_rate = kv.get_double("learning_rate", c.learning_rate);
  c.batch_size = kv.get_uint("batch_size", c.batch_size);
  c.max_epochs = kv.get_uint("max_epochs", c.max_epochs);
  c.warmup_fraction = kv.get_double("warmup_fraction", c.warmup_fraction);
  c.early_stop_patience = kv.get_uint("early_stop_patience", c.early_stop_patience);
  c.lambda = kv.get_double("lambda", c.lambda);
  c.tf_prob = kv.get_double("tf_prob", c.tf_prob);
  c.seed = kv.get_uint("seed", c.seed);
  c.weight_decay = kv.get_double("weight_decay", c.weight_decay);
  c.beta1 = kv.get_double("beta1", c.beta1);
  c.beta2 = kv.get_double("beta2", c.beta2);
  c.epsilon = kv.get_double("epsilon", c.epsilon);
  c.grad_clip = kv.get_double("grad_clip", c.grad_clip);
  c.joint_ec_fraction = kv.get_double("joint_ec_fraction", c.joint_ec_fraction);
  if (auto v = kv.get("aggregation")) {
    if (*v == "interpolate") {
      c.aggregation = LossAggregation::kInterpolate;
    } else if (*v == "sum") {
      c.aggregation = LossAggregation::kSum;
    } else {
      throw SpecError("aggregation", "expected 'interpolate' or 'sum'");
    }
  }
  if (auto v = kv.get("loss_scope")) {
    if (*v == "full") {
      c.loss_scope = LossScope::kFullSequence;
    } else if (*v == "targets") {
      c.loss_scope = LossScope::kTargetsOnly;
    } else {
      throw SpecError("loss_scope", "expected 'full' or 'targets'");
    }
  }
  validate_train_config(c);
  return c;
}

std::string train_config_to_text(const TrainConfig& c) {
  KvConfig kv;
  auto num = [](double x) {
    char buffer[64];
    std::snprintf(buffer, sizeof buffer, "%.17g", x);
    return std::string(buffer);
  };
  kv.set("learning_rate", num(c.learning_rate));
  kv.set("batch_size", std::to_string(c.batch_size));
  kv.set("max_epochs", std::to_string(c.max_epochs));
  kv.set("warmup_fraction", num(c.warmup_fraction));
  kv.set("early_stop_patience", std::to_string(c.early_stop_patience));
  kv.set("lambda", num(c.lambda));
  kv.set("tf_prob", num(c.tf_prob));
  kv.set("seed", std::to_string(c.seed));
  kv.set("weight_decay", num(c.weight_decay));
  kv.set("beta1", num(c.beta1));
  kv.set("beta2", num(c.beta2));
  kv.set("epsilon", num(c.epsilon));
  kv.set("grad_clip", num(c.grad_clip));
  kv.set("aggregation", c.aggregation == LossAggregation::kSum ? "sum" : "interpolate");
  kv.set("loss_scope", c.loss_scope == LossScope::kTargetsOnly ? "targets" : "full");
  kv.set("joint_ec_fraction", num(c.joint_ec_fraction));
  return kv.to_text();
}

std::size_t warmup_steps(std::size_t total_steps, double warmup_fraction) {
  const auto w = static_cast<std::size_t>(std::llround(warmup_fraction * static_cast<double>(total_steps)));
  return std::clamp<std::size_t>(w, 1, std::max<std::size_t>(total_steps, 1));
}

double lr_at(std::size_t step, std::size_t total_steps, double peak_lr, double warmup_fraction) {
  if (total_steps == 0) throw std::invalid_argument("lr_at: total_steps must be positive");
  if (step > total_steps) {
    throw std::out_of_range("lr_at: step " + std::to_string(step) + " beyond total " + std::to_string(total_steps));
  }
  const std::size_t warm = warmup_steps(total_steps, warmup_fraction);
  if (step <= warm) return peak_lr * static_cast<double>(step) / static_cast<double>(warm);
  return peak_lr * static_cast<double>(total_steps - step) / static_cast<double>(total_steps - warm);
}

AdamW::AdamW(std::vector<ag::Parameter*> params, const TrainConfig& config)
    : params_(std::move(params)),
      beta1_(config.beta1),
      beta2_(config.beta2),
      eps_(config.epsilon),
      weight_decay_(config.weight_decay),
      clip_(config.grad_clip) {
  for (auto* p : params_) {
    m_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
    v_.push_back(ag::Matrix::Zero(p->value.rows(), p->value.cols()));
  }
}

void AdamW::zero_grad() {
  for (auto* p : params_) p->zero_grad();
}

void AdamW::step(double lr) {
  ++t_;
  double scale = 1.0;
  if (clip_ > 0.0) {
    double sq = 0.0;
    for (auto* p : params_) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > clip_) scale = clip_ / norm;
  }
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    ag::Parameter& p = *params_[i];
    const ag::Matrix g = p.grad * scale;
    m_[i] = beta1_ * m_[i] + (1.0 - beta1_) * g;
    v_[i] = beta2_ * v_[i] + (1.0 - beta2_) * g.cwiseProduct(g);
    const bool decays = p.value.rows() > 1;
    if (decays && weight_decay_ > 0.0) p.value *= (1.0 - lr * weight_decay_);
    p.value.array() -= lr * (m_[i].array() / c1) / ((v_[i].array() / c2).sqrt() + eps_);
  }
}

std::string TrainLog::to_json() const {
  nlohmann::ordered_json j;
  j["epoch_train_loss"] = epoch_train_loss;
  j["epoch_val_metric"] = epoch_val_metric;
  j["total_steps"] = total_steps;
  j["stopping_epoch"] = stopping_epoch;
  j["best_epoch"] = best_epoch;
  j["best_checkpoint_id"] = best_checkpoint_id;
  j["lr_trace"] = lr_trace;
  j["notes"] = notes;
  return j.dump();
}

TrainLog train(TrainingTask& task, const TrainConfig& config) {
  validate_train_config(config);
  const std::size_t n_items = task.num_items();
  if (n_items == 0) throw RegimeError("no training items");
  const std::size_t batches = (n_items + config.batch_size - 1) / config.batch_size;

  TrainLog log;
  log.total_steps = batches * config.max_epochs;

  Rng root(Rng::mix(config.seed ^ 0x7a11ULL));
  Rng data_rng = root.fork(1);
  Rng step_rng = root.fork(2);

  std::vector<ag::Parameter*> params = task.parameters();
  AdamW optimizer(params, config);
  std::vector<ag::Matrix> best;
  double best_metric = -std::numeric_limits<double>::infinity();
  std::size_t epochs_without_gain = 0;
  std::size_t step = 0;

  std::vector<std::size_t> order(n_items);
  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    data_rng.shuffle(std::span<std::size_t>(order));
    double loss_sum = 0.0;
    for (std::size_t b = 0; b < batches; ++b) {
      const std::size_t begin = b * config.batch_size;
      const std::size_t end = std::min(n_items, begin + config.batch_size);
      optimizer.zero_grad();
      ag::Tape tape;
      ag::Var loss = task.batch_loss(tape, std::span<const std::size_t>(order).subspan(begin, end - begin), step_rng);
      const double value = tape.scalar(loss);
      if (!std::isfinite(value)) {
        throw TrainingAborted(step + 1, "non-finite loss in epoch " + std::to_string(epoch));
      }
      tape.backward(loss);
      ++step;
      const double lr = lr_at(step, log.total_steps, config.learning_rate, config.warmup_fraction);
      optimizer.step(lr);
      log.lr_trace.push_back(lr);
      loss_sum += value;
    }
    log.epoch_train_loss.push_back(loss_sum / static_cast<double>(batches));
    const double metric = task.validation_metric();
    log.epoch_val_metric.push_back(metric);
    log.stopping_epoch = epoch;
    if (metric > best_metric) {
      best_metric = metric;
      log.best_epoch = epoch;
      best.clear();
      for (auto* p : params) best.push_back(p->value);
      epochs_without_gain = 0;
    } else if (++epochs_without_gain >= config.early_stop_patience) {
      break;
    }
  }
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i]->value = best[i];
    params[i]->zero_grad();
  }
  log.best_checkpoint_id = "epoch-" + std::to_string(log.best_epoch);
  return log;
}

}  // namespace mtlaffect
