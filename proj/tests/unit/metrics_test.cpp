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

#include <algorithm>
#include <cmath>
#include <sstream>

#include "doctest.h"
#include "fixtures.hpp"
#include "json.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/metrics.hpp"

using namespace mtlaffect;
using mtlaffect::testing::eight_units;

namespace {

// Reference implementation from an explicit confusion matrix.
double brute_force_macro_f1(const std::vector<int>& golds, const std::vector<int>& preds, int classes) {
  std::vector<std::vector<long>> confusion(classes, std::vector<long>(classes, 0));
  for (std::size_t i = 0; i < golds.size(); ++i) ++confusion[golds[i]][preds[i]];
  double sum = 0.0;
  for (int c = 0; c < classes; ++c) {
    long tp = confusion[c][c], fp = 0, fn = 0;
    for (int k = 0; k < classes; ++k) {
      if (k == c) continue;
      fp += confusion[k][c];
      fn += confusion[c][k];
    }
    const double p = tp + fp == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
    const double r = tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
    sum += p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
  }
  return sum / classes;
}

RunMetrics run_with(double val, double ec) {
  RunMetrics m;
  m.valence = TaskMetrics{};
  m.valence->macro_f1 = val;
  m.ec = TaskMetrics{};
  m.ec->macro_f1 = ec;
  return m;
}

}  // namespace

TEST_CASE("hand-derived macro-F1 fixtures") {
  const std::vector<int> golds = {0, 1, 2, 0}, preds = {0, 2, 2, 0};
  const TaskMetrics m = macro_f1(golds, preds, valence_label_names());
  CHECK(m.per_class[0].f1 == 1.0);
  CHECK(m.per_class[1].f1 == 0.0);
  CHECK(m.per_class[2].f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(std::abs(m.macro_f1 - 5.0 / 9.0) <= 1e-12);

  const std::vector<int> all = {0, 1, 2};
  CHECK(macro_f1(all, all, valence_label_names()).macro_f1 == 1.0);
  const std::vector<int> constant = {0, 0, 0};
  CHECK(macro_f1(all, constant, valence_label_names()).macro_f1 == doctest::Approx(1.0 / 6.0).epsilon(1e-15));
  // A class absent from both sides still counts with F1 = 0.
  const std::vector<int> two = {0, 1, 0, 1};
  CHECK(macro_f1(two, two, valence_label_names()).macro_f1 == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
}

TEST_CASE("macro-F1 agrees with a brute-force confusion matrix on 1000 random vectors") {
  Rng rng(31);
  for (int trial = 0; trial < 1000; ++trial) {
    const int classes = trial % 2 == 0 ? 3 : 2;
    const auto& names = classes == 3 ? valence_label_names() : carrier_label_names();
    const std::size_t n = 1 + rng.index(60);
    std::vector<int> g(n), p(n);
    for (std::size_t i = 0; i < n; ++i) {
      g[i] = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
      p[i] = static_cast<int>(rng.index(static_cast<std::size_t>(classes)));
    }
    const TaskMetrics m = macro_f1(g, p, names);
    CHECK(std::abs(m.macro_f1 - brute_force_macro_f1(g, p, classes)) <= 1e-12);
    for (const auto& c : m.per_class) {
      CHECK(c.f1 >= 0.0);
      CHECK(c.f1 <= 1.0);
    }
    // Permutation invariance.
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    std::vector<int> g2(n), p2(n);
    for (std::size_t i = 0; i < n; ++i) {
      g2[i] = g[order[i]];
      p2[i] = p[order[i]];
    }
    CHECK(std::abs(macro_f1(g2, p2, names).macro_f1 - m.macro_f1) <= 1e-12);
  }
}

TEST_CASE("macro-F1 input errors") {
  const std::vector<int> a = {0, 1}, b = {0};
  CHECK_THROWS(macro_f1(a, b, valence_label_names()));
  const std::vector<int> c = {0, 3};
  CHECK_THROWS(macro_f1(a, c, valence_label_names()));
}

TEST_CASE("aggregation") {
  const std::vector<double> two = {0.6, 0.8};
  const Summary s = aggregate(two);
  CHECK(std::abs(s.mean - 0.7) <= 1e-9);
  CHECK(std::abs(s.stdev - std::sqrt(0.02)) <= 1e-9);
  CHECK(std::abs(s.stdev - 0.1414) <= 1e-4);
  const std::vector<double> same = {0.42, 0.42, 0.42};
  CHECK(aggregate(same).stdev == 0.0);
  const std::vector<double> one = {0.3};
  CHECK(aggregate(one).stdev == 0.0);
  const std::vector<double> fwd = {0.1, 0.25, 0.7, 0.33}, rev = {0.33, 0.7, 0.25, 0.1};
  CHECK(aggregate(fwd).mean == aggregate(rev).mean);
  CHECK(aggregate(fwd).stdev == aggregate(rev).stdev);
  CHECK_THROWS(aggregate(std::span<const double>{}));

  const auto per_task = aggregate(std::vector<RunMetrics>{run_with(0.6, 0.5), run_with(0.8, 0.5)});
  CHECK(std::abs(per_task.at(Task::kValence).mean - 0.7) <= 1e-9);
  CHECK(per_task.at(Task::kEc).stdev == 0.0);
}

TEST_CASE("selection metric per setting") {
  const RunMetrics m = run_with(0.6, 0.2);
  CHECK(selection_metric(m, Setting::kSingle, Task::kEc, TaskOrder::kValFirst) == 0.2);
  CHECK(selection_metric(m, Setting::kTwoStep, Task::kValence, TaskOrder::kValFirst) == 0.2);
  CHECK(selection_metric(m, Setting::kTwoStep, Task::kValence, TaskOrder::kEcFirst) == 0.6);
  CHECK(selection_metric(m, Setting::kJoint, Task::kValence, TaskOrder::kValFirst) == doctest::Approx(0.4));
}

TEST_CASE("scoring predictions") {
  const auto units = eight_units();
  std::vector<UnitPrediction> perfect;
  std::size_t candidates = 0;
  for (const auto& u : units) {
    UnitPrediction p;
    p.valence = u.valence;
    p.ec = std::vector<Carrier>();
    for (const auto& c : u.candidates) p.ec->push_back(c.carrier);
    candidates += u.candidates.size();
    perfect.push_back(p);
  }
  const RunMetrics m = score_predictions("disc:joint", 3, units, perfect);
  CHECK(m.valence->macro_f1 == 1.0);
  CHECK(m.ec->macro_f1 == 1.0);
  CHECK(m.ec->count == candidates);
  CHECK(m.valence->count == units.size());

  auto valence_only = perfect;
  for (auto& p : valence_only) p.ec.reset();
  CHECK_FALSE(score_predictions("disc:single-val", 0, units, valence_only).ec.has_value());

  CHECK_THROWS_AS(score_predictions("x", 0, {}, {}), RegimeError);

  const RunMetrics back = RunMetrics::from_json(m.to_json());
  CHECK(back.regime == "disc:joint");
  CHECK(back.seed == 3);
  CHECK(back.ec->macro_f1 == 1.0);
  CHECK(back.to_json() == m.to_json());
}

TEST_CASE("prediction dump records") {
  const auto units = eight_units();
  std::vector<UnitPrediction> preds(units.size());
  for (std::size_t i = 0; i < units.size(); ++i) {
    preds[i].valence = Valence::kNeutral;
    preds[i].ec = std::vector<Carrier>(units[i].candidates.size(), Carrier::kNo);
  }
  const std::string dump = prediction_dump(units, preds);
  std::istringstream in(dump);
  std::string line;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    CHECK(j["unit_id"] == units[n].unit_id);
    CHECK(j["pred_valence"] == "neutral");
    CHECK(j["candidates"].size() == units[n].candidates.size());
    for (const auto& c : j["candidates"]) {
      CHECK(c.contains("start"));
      CHECK(c.contains("end"));
      CHECK(c["pred"] == "no");
    }
    ++n;
  }
  CHECK(n == units.size());
}
