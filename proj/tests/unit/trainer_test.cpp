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

#include <cmath>
#include <cstdlib>
#include <limits>
#include <stdexcept>

#include "doctest.h"
#include "mtlaffect/error.hpp"
#include "mtlaffect/kv_config.hpp"
#include "mtlaffect/trainer.hpp"

using namespace mtlaffect;

namespace {

/// Quadratic loss on a scalar weight with a scripted validation curve.
class ScriptedTask final : public TrainingTask {
 public:
  explicit ScriptedTask(std::vector<double> metrics, std::size_t items = 10)
      : metrics_(std::move(metrics)), items_(items) {
    w_ = ag::Parameter("w", ag::Matrix::Constant(1, 1, 2.0));
  }
  std::vector<ag::Parameter*> parameters() override { return {&w_}; }
  std::size_t num_items() const override { return items_; }
  ag::Var batch_loss(ag::Tape& tape, std::span<const std::size_t> items, Rng&) override {
    seen_.insert(seen_.end(), items.begin(), items.end());
    ag::Var w = tape.param(w_);
    if (nan_at_ && ++calls_ == nan_at_) return tape.constant(ag::Matrix::Constant(1, 1, std::nan("")));
    return ag::matmul(tape, w, w);
  }
  double validation_metric() override {
    weights_.push_back(w_.value(0, 0));
    const double m = metrics_[std::min(epoch_, metrics_.size() - 1)];
    ++epoch_;
    return m;
  }

  ag::Parameter w_;
  std::vector<double> metrics_;
  std::vector<double> weights_;
  std::vector<std::size_t> seen_;
  std::size_t items_;
  std::size_t epoch_ = 0;
  std::size_t nan_at_ = 0;
  std::size_t calls_ = 0;
};

TrainConfig quick() {
  TrainConfig c;
  c.learning_rate = 0.1;
  c.batch_size = 4;
  c.max_epochs = 20;
  return c;
}

}  // namespace

TEST_CASE("lr schedule spot values") {
  CHECK(lr_at(0, 100, 1e-3, 0.1) == 0.0);
  CHECK(lr_at(10, 100, 1e-3, 0.1) == 1e-3);
  CHECK(lr_at(55, 100, 1e-3, 0.1) == doctest::Approx(5.0e-4).epsilon(1e-12));
  CHECK(lr_at(100, 100, 1e-3, 0.1) == 0.0);
  CHECK(lr_at(5, 100, 1e-3, 0.1) == doctest::Approx(5.0e-4).epsilon(1e-12));
  CHECK_THROWS_AS(lr_at(101, 100, 1e-3, 0.1), std::out_of_range);
  CHECK(warmup_steps(100, 0.1) == 10);
  CHECK(warmup_steps(4, 0.1) == 1);
  CHECK(warmup_steps(4, 0.0) == 1);
}

TEST_CASE("lr schedule is continuous, piecewise linear and peaks at the peak") {
  const std::size_t total = 37;
  double peak = 0.0;
  for (std::size_t s = 0; s <= total; ++s) {
    const double lr = lr_at(s, total, 2e-3, 0.1);
    peak = std::max(peak, lr);
    if (s > 0) CHECK(std::abs(lr - lr_at(s - 1, total, 2e-3, 0.1)) <= 2e-3 / 3.0 + 1e-15);
  }
  CHECK(peak == 2e-3);
  // Second differences vanish away from the apex.
  const std::size_t w = warmup_steps(total, 0.1);
  for (std::size_t s = w + 2; s <= total; ++s) {
    const double d2 = lr_at(s, total, 2e-3, 0.1) - 2 * lr_at(s - 1, total, 2e-3, 0.1) + lr_at(s - 2, total, 2e-3, 0.1);
    CHECK(std::abs(d2) <= 1e-15);
  }
}

TEST_CASE("patience 5 with no gain after epoch 1 stops at epoch 6") {
  ScriptedTask task({0.5, 0.4, 0.5, 0.3, 0.2, 0.5, 0.1});
  const TrainLog log = train(task, quick());
  CHECK(log.stopping_epoch == 6);
  CHECK(log.best_epoch == 1);
  CHECK(log.best_checkpoint_id == "epoch-1");
  CHECK(log.epoch_val_metric.size() == 6);
  CHECK(task.w_.value(0, 0) == task.weights_[0]);
}

TEST_CASE("the returned snapshot is never worse than an earlier epoch") {
  ScriptedTask task({0.1, 0.3, 0.2, 0.6, 0.6, 0.5, 0.4, 0.3, 0.2, 0.1, 0.7});
  const TrainLog log = train(task, quick());
  CHECK(log.best_epoch == 4);
  CHECK(log.stopping_epoch == 9);
  for (std::size_t e = 0; e < log.best_epoch; ++e) CHECK(log.epoch_val_metric[e] <= log.epoch_val_metric[log.best_epoch - 1]);
  CHECK(task.w_.value(0, 0) == task.weights_[3]);
}

TEST_CASE("lr trace follows the schedule and every item is seen once per epoch") {
  ScriptedTask task({0.1, 0.2, 0.3}, 10);
  TrainConfig c = quick();
  c.max_epochs = 3;
  const TrainLog log = train(task, c);
  CHECK(log.total_steps == 9);
  REQUIRE(log.lr_trace.size() == 9);
  for (std::size_t s = 0; s < 9; ++s) CHECK(log.lr_trace[s] == lr_at(s + 1, 9, c.learning_rate, c.warmup_fraction));
  for (std::size_t e = 0; e < 3; ++e) {
    std::vector<std::size_t> epoch(task.seen_.begin() + static_cast<long>(e * 10), task.seen_.begin() + static_cast<long>(e * 10 + 10));
    std::sort(epoch.begin(), epoch.end());
    for (std::size_t i = 0; i < 10; ++i) CHECK(epoch[i] == i);
  }
}

TEST_CASE("training is deterministic per seed") {
  ScriptedTask a({0.1, 0.2, 0.15}), b({0.1, 0.2, 0.15}), c({0.1, 0.2, 0.15});
  TrainConfig cfg = quick();
  cfg.max_epochs = 3;
  CHECK(train(a, cfg) == train(b, cfg));
  CHECK(a.seen_ == b.seen_);
  cfg.seed = 1;
  train(c, cfg);
  CHECK(c.seen_ != a.seen_);
}

TEST_CASE("a non-finite loss aborts naming the step") {
  ScriptedTask task({0.1});
  task.nan_at_ = 5;
  try {
    train(task, quick());
    FAIL("expected TrainingAborted");
  } catch (const TrainingAborted& e) {
    CHECK(e.step() == 5);
  }
}

TEST_CASE("AdamW decays matrices but not vectors") {
  ag::Parameter m("m", ag::Matrix::Constant(2, 2, 1.0));
  ag::Parameter v("v", ag::Matrix::Constant(1, 2, 1.0));
  TrainConfig cfg;
  cfg.weight_decay = 0.5;
  AdamW opt({&m, &v}, cfg);
  opt.zero_grad();
  opt.step(0.1);
  CHECK(m.value(0, 0) == doctest::Approx(1.0 - 0.1 * 0.5).epsilon(1e-12));
  CHECK(v.value(0, 0) == 1.0);
  CHECK(opt.steps() == 1);

  // First Adam step moves each coordinate by lr * sign(grad).
  ag::Parameter g("g", ag::Matrix::Constant(1, 2, 0.0));
  TrainConfig plain;
  AdamW o2({&g}, plain);
  g.grad << 3.0, -0.01;
  o2.step(0.01);
  CHECK(g.value(0, 0) == doctest::Approx(-0.01).epsilon(1e-6));
  CHECK(g.value(0, 1) == doctest::Approx(0.01).epsilon(1e-4));
}

TEST_CASE("config validation, parsing and environment overrides") {
  TrainConfig bad;
  bad.warmup_fraction = 1.0;
  try {
    validate_train_config(bad);
    FAIL("expected SpecError");
  } catch (const SpecError& e) {
    CHECK(e.field() == "warmup_fraction");
  }
  bad = TrainConfig{};
  bad.early_stop_patience = 0;
  CHECK_THROWS_AS(validate_train_config(bad), SpecError);

  KvConfig kv = KvConfig::parse("learning_rate = 0.002\nbatch_size = 8\naggregation = sum\nloss_scope = targets\n");
  ::setenv("MTLAFFECT_BATCH_SIZE", "16", 1);
  kv.apply_env_overrides(train_config_keys());
  ::unsetenv("MTLAFFECT_BATCH_SIZE");
  const TrainConfig c = train_config_from(kv, TrainConfig{});
  CHECK(c.learning_rate == 0.002);
  CHECK(c.batch_size == 16);
  CHECK(c.aggregation == LossAggregation::kSum);
  CHECK(c.loss_scope == LossScope::kTargetsOnly);

  const TrainConfig back = train_config_from(KvConfig::parse(train_config_to_text(c)), TrainConfig{});
  CHECK(back == c);
}
