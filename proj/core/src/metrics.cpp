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

#include "mtlaffect/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "mtlaffect/error.hpp"

namespace mtlaffect {

using nlohmann::ordered_json;

const std::vector<std::string>& valence_label_names() {
  static const std::vector<std::string> kNames = {"negative", "positive", "neutral"};
  return kNames;
}

const std::vector<std::string>& carrier_label_names() {
  static const std::vector<std::string> kNames = {"no", "yes"};
  return kNames;
}

TaskMetrics macro_f1(std::span<const int> golds, std::span<const int> preds,
                     const std::vector<std::string>& label_names) {
  if (golds.size() != preds.size()) {
    throw std::invalid_argument("macro_f1: " + std::to_string(golds.size()) + " golds vs " +
                                std::to_string(preds.size()) + " predictions");
  }
  const std::size_t n = label_names.size();
  std::vector<std::size_t> tp(n, 0), gold_count(n, 0), pred_count(n, 0);
  for (std::size_t i = 0; i < golds.size(); ++i) {
    for (int label : {golds[i], preds[i]}) {
      if (label < 0 || static_cast<std::size_t>(label) >= n) {
        throw std::invalid_argument("macro_f1: label " + std::to_string(label) + " outside label set");
      }
    }
    ++gold_count[static_cast<std::size_t>(golds[i])];
    ++pred_count[static_cast<std::size_t>(preds[i])];
    if (golds[i] == preds[i]) ++tp[static_cast<std::size_t>(golds[i])];
  }
  auto ratio = [](std::size_t a, std::size_t b) { return b == 0 ? 0.0 : static_cast<double>(a) / static_cast<double>(b); };

  TaskMetrics m;
  m.labels = label_names;
  m.count = golds.size();
  double sum = 0.0;
  for (std::size_t c = 0; c < n; ++c) {
    ClassScores s;
    s.precision = ratio(tp[c], pred_count[c]);
    s.recall = ratio(tp[c], gold_count[c]);
    s.f1 = s.precision + s.recall == 0.0 ? 0.0 : 2.0 * s.precision * s.recall / (s.precision + s.recall);
    s.support = gold_count[c];
    sum += s.f1;
    m.per_class.push_back(s);
  }
  m.macro_f1 = n == 0 ? 0.0 : sum / static_cast<double>(n);
  return m;
}

namespace {

ordered_json task_to_json(const TaskMetrics& m) {
  ordered_json j;
  j["macro_f1"] = m.macro_f1;
  j["count"] = m.count;
  ordered_json classes;
  for (std::size_t c = 0; c < m.labels.size(); ++c) {
    classes[m.labels[c]] = ordered_json{{"precision", m.per_class[c].precision},
                                        {"recall", m.per_class[c].recall},
                                        {"f1", m.per_class[c].f1},
                                        {"support", m.per_class[c].support}};
  }
  j["per_class"] = std::move(classes);
  return j;
}

TaskMetrics task_from_json(const ordered_json& j) {
  TaskMetrics m;
  m.macro_f1 = j.at("macro_f1").get<double>();
  m.count = j.at("count").get<std::size_t>();
  for (const auto& [label, scores] : j.at("per_class").items()) {
    m.labels.push_back(label);
    ClassScores s;
    s.precision = scores.at("precision").get<double>();
    s.recall = scores.at("recall").get<double>();
    s.f1 = scores.at("f1").get<double>();
    s.support = scores.at("support").get<std::size_t>();
    m.per_class.push_back(s);
  }
  return m;
}

}  // namespace

std::string RunMetrics::to_json() const {
  ordered_json j;
  j["regime"] = regime;
  j["seed"] = seed;
  ordered_json tasks = ordered_json::object();
  if (valence) tasks["valence"] = task_to_json(*valence);
  if (ec) tasks["ec"] = task_to_json(*ec);
  j["tasks"] = std::move(tasks);
  return j.dump();
}

RunMetrics RunMetrics::from_json(const std::string& text) {
  const ordered_json j = ordered_json::parse(text);
  RunMetrics r;
  r.regime = j.at("regime").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  const auto& tasks = j.at("tasks");
  if (tasks.contains("valence")) r.valence = task_from_json(tasks.at("valence"));
  if (tasks.contains("ec")) r.ec = task_from_json(tasks.at("ec"));
  return r;
}

Summary aggregate(std::span<const double> values) {
  if (values.empty()) throw std::invalid_argument("aggregate of no runs");
  // Summing in sorted order makes the result independent of run order.
  std::vector<double> sorted(values.begin(), values.end());
  std::sort(sorted.begin(), sorted.end());
  Summary s;
  s.n = sorted.size();
  double sum = 0.0;
  for (double v : sorted) sum += v;
  s.mean = sum / static_cast<double>(s.n);
  if (s.n > 1) {
    double sq = 0.0;
    for (double v : sorted) sq += (v - s.mean) * (v - s.mean);
    s.stdev = std::sqrt(sq / static_cast<double>(s.n - 1));
  }
  return s;
}

std::map<Task, Summary> aggregate(const std::vector<RunMetrics>& runs) {
  if (runs.empty()) throw std::invalid_argument("aggregate of no runs");
  std::map<Task, Summary> out;
  for (Task t : {Task::kValence, Task::kEc}) {
    std::vector<double> values;
    for (const auto& r : runs) {
      if (r.task(t)) values.push_back(r.task(t)->macro_f1);
    }
    if (values.size() == runs.size()) out[t] = aggregate(values);
  }
  return out;
}

RunMetrics score_predictions(const std::string& regime, std::uint64_t seed, std::span<const FunctionalUnit> units,
                             std::span<const UnitPrediction> predictions) {
  if (units.empty()) throw RegimeError("cannot evaluate an empty test set");
  if (units.size() != predictions.size()) throw std::invalid_argument("one prediction per unit expected");
  RunMetrics m;
  m.regime = regime;
  m.seed = seed;
  const bool has_val = std::all_of(predictions.begin(), predictions.end(), [](const auto& p) { return p.valence.has_value(); });
  const bool has_ec = std::all_of(predictions.begin(), predictions.end(), [](const auto& p) { return p.ec.has_value(); });
  if (has_val) {
    std::vector<int> golds, preds;
    for (std::size_t i = 0; i < units.size(); ++i) {
      golds.push_back(static_cast<int>(units[i].valence));
      preds.push_back(static_cast<int>(*predictions[i].valence));
    }
    m.valence = macro_f1(golds, preds, valence_label_names());
  }
  if (has_ec) {
    std::vector<int> golds, preds;
    for (std::size_t i = 0; i < units.size(); ++i) {
      const auto& ec = *predictions[i].ec;
      if (ec.size() != units[i].candidates.size()) {
        throw std::invalid_argument("unit " + units[i].unit_id + ": EC prediction arity differs from candidate count");
      }
      for (std::size_t c = 0; c < ec.size(); ++c) {
        golds.push_back(static_cast<int>(units[i].candidates[c].carrier));
        preds.push_back(static_cast<int>(ec[c]));
      }
    }
    m.ec = macro_f1(golds, preds, carrier_label_names());
  }
  return m;
}

std::string prediction_dump(std::span<const FunctionalUnit> units, std::span<const UnitPrediction> predictions) {
  if (units.size() != predictions.size()) throw std::invalid_argument("one prediction per unit expected");
  std::string out;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const FunctionalUnit& u = units[i];
    const UnitPrediction& p = predictions[i];
    nlohmann::ordered_json j;
    j["unit_id"] = u.unit_id;
    j["gold_valence"] = std::string(valence_name(u.valence));
    j["pred_valence"] = p.valence ? nlohmann::ordered_json(std::string(valence_name(*p.valence))) : nlohmann::ordered_json();
    auto cands = nlohmann::ordered_json::array();
    for (std::size_t c = 0; c < u.candidates.size(); ++c) {
      nlohmann::ordered_json jc;
      jc["start"] = u.candidates[c].start;
      jc["end"] = u.candidates[c].end;
      jc["gold"] = std::string(carrier_name(u.candidates[c].carrier));
      jc["pred"] = p.ec ? nlohmann::ordered_json(std::string(carrier_name((*p.ec)[c]))) : nlohmann::ordered_json();
      cands.push_back(std::move(jc));
    }
    j["candidates"] = std::move(cands);
    out += j.dump();
    out += '\n';
  }
  return out;
}

double selection_metric(const RunMetrics& m, Setting setting, Task single_task, TaskOrder order) {
  auto f1 = [&m](Task t) {
    const auto& tm = m.task(t);
    if (!tm) throw std::logic_error("selection metric needs a task the regime does not predict");
    return tm->macro_f1;
  };
  switch (setting) {
    case Setting::kSingle:
      return f1(single_task);
    case Setting::kJoint:
      return 0.5 * (f1(Task::kValence) + f1(Task::kEc));
    case Setting::kTwoStep:
      return f1(order == TaskOrder::kValFirst ? Task::kEc : Task::kValence);
  }
  return 0.0;
}

}  // namespace mtlaffect
