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
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mtlaffect/encodings.hpp"

namespace mtlaffect {

struct ClassScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;
};

/// Per-class scores and their unweighted mean for one task.
struct TaskMetrics {
  std::vector<std::string> labels;
  std::vector<ClassScores> per_class;
  double macro_f1 = 0.0;
  std::size_t count = 0;
};

const std::vector<std::string>& valence_label_names();
const std::vector<std::string>& carrier_label_names();

/// Labels are codes into `label_names`. Every class counts towards the mean,
/// including classes absent from both sequences; 0/0 ratios are 0.
TaskMetrics macro_f1(std::span<const int> golds, std::span<const int> preds,
                     const std::vector<std::string>& label_names);

/// Metrics of one seeded run of one regime. A task is absent when the regime
/// does not predict it.
struct RunMetrics {
  std::string regime;
  std::uint64_t seed = 0;
  std::optional<TaskMetrics> valence;
  std::optional<TaskMetrics> ec;

  const std::optional<TaskMetrics>& task(Task t) const { return t == Task::kValence ? valence : ec; }
  std::string to_json() const;
  static RunMetrics from_json(const std::string& text);
};

struct Summary {
  double mean = 0.0;
  double stdev = 0.0;
  std::size_t n = 0;
};

/// Arithmetic mean and sample (n-1) standard deviation; stdev is 0 for n == 1.
Summary aggregate(std::span<const double> values);
/// Macro-F1 summary per task present in every run.
std::map<Task, Summary> aggregate(const std::vector<RunMetrics>& runs);

enum class Setting { kSingle, kJoint, kTwoStep };

/// Validation selection score: the task's macro-F1 for single task, the second
/// task's for two-step, the mean of both for joint.
double selection_metric(const RunMetrics& metrics, Setting setting, Task single_task, TaskOrder order);

/// Labels predicted for one unit. A task the model does not predict is empty.
struct UnitPrediction {
  std::optional<Valence> valence;
  std::optional<std::vector<Carrier>> ec;

  friend bool operator==(const UnitPrediction&, const UnitPrediction&) = default;
};

/// Valence over every unit, EC over every candidate of every unit. A task is
/// scored when every prediction carries it. Throws RegimeError on an empty set.
RunMetrics score_predictions(const std::string& regime, std::uint64_t seed, std::span<const FunctionalUnit> units,
                             std::span<const UnitPrediction> predictions);

/// One JSON line per unit: {unit_id, gold_valence, pred_valence, candidates:[{start,end,gold,pred}]}.
std::string prediction_dump(std::span<const FunctionalUnit> units, std::span<const UnitPrediction> predictions);

}  // namespace mtlaffect
