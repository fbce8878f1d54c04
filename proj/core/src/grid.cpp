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

#include "mtlaffect/grid.hpp"

#include <cstdio>
#include <sstream>
#include <stdexcept>

#include "mtlaffect/error.hpp"

namespace mtlaffect {

std::string_view grid_row_name(GridRow row) {
  switch (row) {
    case GridRow::kDiscriminative:
      return "discriminative";
    case GridRow::kGenerative:
      return "generative";
    case GridRow::kGenerativeDomainAdapt:
      return "generative + domain adapt";
  }
  return "";
}

std::string_view grid_column_name(GridColumn column) {
  switch (column) {
    case GridColumn::kSingle:
      return "Single Task";
    case GridColumn::kValToEc:
      return "Val -> EC";
    case GridColumn::kEcToVal:
      return "EC -> Val";
    case GridColumn::kGroundTruth:
      return "w. ground truth";
    case GridColumn::kJoint:
      return "Joint";
  }
  return "";
}

GridPlacement grid_placement(const RegimeConfig& r) {
  GridPlacement p;
  p.row = r.family == ModelFamily::kDiscriminative ? GridRow::kDiscriminative
          : r.domain_adapt                         ? GridRow::kGenerativeDomainAdapt
                                                   : GridRow::kGenerative;
  switch (r.setting) {
    case Setting::kSingle:
      p.column = GridColumn::kSingle;
      p.tasks = {r.task};
      break;
    case Setting::kJoint:
      p.column = GridColumn::kJoint;
      p.tasks = {Task::kValence, Task::kEc};
      break;
    case Setting::kTwoStep:
      if (r.oracle) {
        p.column = GridColumn::kGroundTruth;
        p.tasks = {r.order == TaskOrder::kValFirst ? Task::kEc : Task::kValence};
      } else {
        p.column = r.order == TaskOrder::kValFirst ? GridColumn::kValToEc : GridColumn::kEcToVal;
        p.tasks = {Task::kValence, Task::kEc};
      }
      break;
  }
  return p;
}

std::vector<std::string> grid_regime_ids() {
  std::vector<std::string> ids;
  for (const char* family : {"disc", "gen"}) {
    for (const char* setting :
         {"single-val", "single-ec", "two-step-val-ec", "two-step-ec-val", "two-step-val-ec:oracle",
          "two-step-ec-val:oracle", "joint"}) {
      ids.push_back(std::string(family) + ":" + setting);
    }
  }
  ids.push_back("gen:two-step-val-ec:domain-adapt");
  ids.push_back("gen:two-step-ec-val:domain-adapt");
  return ids;
}

void ResultsGrid::set(GridRow row, GridColumn column, Task task, const Summary& summary) {
  cells_[{task, {row, column}}] = summary;
}

std::optional<Summary> ResultsGrid::get(GridRow row, GridColumn column, Task task) const {
  auto it = cells_.find({task, {row, column}});
  if (it == cells_.end()) return std::nullopt;
  return it->second;
}

void ResultsGrid::add_runs(const RegimeConfig& regime, const std::vector<RunMetrics>& runs) {
  const GridPlacement p = grid_placement(regime);
  const auto summaries = aggregate(runs);
  for (Task t : p.tasks) {
    auto it = summaries.find(t);
    if (it == summaries.end()) throw RegimeError("runs of " + regime.id() + " lack a task the grid needs");
    set(p.row, p.column, t, it->second);
  }
}

void ResultsGrid::add_failure(const std::string& regime_id, const std::string& log_reference) {
  failures_[regime_id] = log_reference;
}

bool ResultsGrid::row_present(GridRow row) const {
  for (const auto& [key, summary] : cells_) {
    if (key.second.first == row) return true;
  }
  return false;
}

namespace {

constexpr Task kSections[] = {Task::kValence, Task::kEc};

std::string_view section_name(Task t) { return t == Task::kValence ? "Valence Prediction" : "EC Prediction"; }
std::string_view section_key(Task t) { return t == Task::kValence ? "valence" : "ec"; }

std::string format_cell(const std::optional<Summary>& s) {
  if (!s) return "-";
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.1f ± %.1f", 100.0 * s->mean, 100.0 * s->stdev);
  return buffer;
}

std::vector<std::string> split(std::string_view line, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = line.find(sep, start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::string emit_grid(const ResultsGrid& grid, GridFormat format) {
  std::ostringstream out;
  if (format == GridFormat::kCsv) {
    out << "task,model";
    for (GridColumn c : kAllGridColumns) out << ',' << grid_column_name(c);
    out << '\n';
    for (Task t : kSections) {
      for (GridRow r : kAllGridRows) {
        if (!grid.row_present(r)) continue;
        out << section_key(t) << ',' << grid_row_name(r);
        for (GridColumn c : kAllGridColumns) out << ',' << format_cell(grid.get(r, c, t));
        out << '\n';
      }
    }
    return out.str();
  }
  bool first = true;
  for (Task t : kSections) {
    if (!first) out << '\n';
    first = false;
    out << "### " << section_name(t) << "\n\n| Model |";
    for (GridColumn c : kAllGridColumns) out << ' ' << grid_column_name(c) << " |";
    out << "\n|---|---|---|---|---|---|\n";
    for (GridRow r : kAllGridRows) {
      if (!grid.row_present(r)) continue;
      out << "| " << grid_row_name(r) << " |";
      for (GridColumn c : kAllGridColumns) out << ' ' << format_cell(grid.get(r, c, t)) << " |";
      out << '\n';
    }
  }
  if (!grid.failures().empty()) {
    out << "\nFailed regimes:\n\n";
    for (const auto& [id, ref] : grid.failures()) out << "- " << id << " (" << ref << ")\n";
  }
  return out.str();
}

ResultsGrid parse_grid_csv(std::string_view text) {
  ResultsGrid grid;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line_no == 1 || line.empty()) continue;
    const auto fields = split(line, ',');
    if (fields.size() != 2 + std::size(kAllGridColumns)) throw ParseError(line_no, "expected 7 fields");
    Task task;
    if (fields[0] == "valence") {
      task = Task::kValence;
    } else if (fields[0] == "ec") {
      task = Task::kEc;
    } else {
      throw ParseError(line_no, "unknown task '" + fields[0] + "'");
    }
    std::optional<GridRow> row;
    for (GridRow r : kAllGridRows) {
      if (grid_row_name(r) == fields[1]) row = r;
    }
    if (!row) throw ParseError(line_no, "unknown model '" + fields[1] + "'");
    for (std::size_t c = 0; c < std::size(kAllGridColumns); ++c) {
      const std::string& cell = fields[2 + c];
      if (cell == "-") continue;
      const std::size_t pm = cell.find(" ± ");
      if (pm == std::string::npos) throw ParseError(line_no, "malformed cell '" + cell + "'");
      Summary s;
      try {
        s.mean = std::stod(cell.substr(0, pm)) / 100.0;
        s.stdev = std::stod(cell.substr(pm + std::string_view(" ± ").size())) / 100.0;
      } catch (const std::exception&) {
        throw ParseError(line_no, "malformed cell '" + cell + "'");
      }
      grid.set(*row, kAllGridColumns[c], task, s);
    }
  }
  return grid;
}

}  // namespace mtlaffect
