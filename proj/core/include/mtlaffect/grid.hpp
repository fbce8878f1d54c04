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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mtlaffect/metrics.hpp"
#include "mtlaffect/regime.hpp"

namespace mtlaffect {

enum class GridRow { kDiscriminative, kGenerative, kGenerativeDomainAdapt };
enum class GridColumn { kSingle, kValToEc, kEcToVal, kGroundTruth, kJoint };

inline constexpr GridRow kAllGridRows[] = {GridRow::kDiscriminative, GridRow::kGenerative,
                                           GridRow::kGenerativeDomainAdapt};
inline constexpr GridColumn kAllGridColumns[] = {GridColumn::kSingle, GridColumn::kValToEc, GridColumn::kEcToVal,
                                                 GridColumn::kGroundTruth, GridColumn::kJoint};

std::string_view grid_row_name(GridRow row);
std::string_view grid_column_name(GridColumn column);

/// Where a regime's task results land in the grid.
struct GridPlacement {
  GridRow row = GridRow::kDiscriminative;
  GridColumn column = GridColumn::kSingle;
  std::vector<Task> tasks;
};

/// Single-task regimes fill their own task; oracle regimes fill the second task
/// of their order; other two-step and joint regimes fill both.
GridPlacement grid_placement(const RegimeConfig& regime);

/// Every regime of the results table, in a fixed order.
std::vector<std::string> grid_regime_ids();

/// Mean / stdev macro-F1 per (task, row, column). A cell exists only for a
/// regime that was run; failed regimes are listed with a log reference.
class ResultsGrid {
 public:
  using Key = std::pair<GridRow, GridColumn>;

  void set(GridRow row, GridColumn column, Task task, const Summary& summary);
  std::optional<Summary> get(GridRow row, GridColumn column, Task task) const;
  /// Aggregates the runs of one regime into its cells.
  void add_runs(const RegimeConfig& regime, const std::vector<RunMetrics>& runs);
  void add_failure(const std::string& regime_id, const std::string& log_reference);

  bool empty() const { return cells_.empty(); }
  const std::map<std::string, std::string>& failures() const { return failures_; }
  bool row_present(GridRow row) const;

 private:
  std::map<std::pair<Task, Key>, Summary> cells_;
  std::map<std::string, std::string> failures_;
};

enum class GridFormat { kMarkdown, kCsv };

/// Percentages with one decimal, "mean ± stdev", "-" for absent cells; the
/// two task sections come valence first, columns in table order.
std::string emit_grid(const ResultsGrid& grid, GridFormat format);

/// Reads the CSV emitted by emit_grid (values keep their one-decimal precision).
ResultsGrid parse_grid_csv(std::string_view text);

}  // namespace mtlaffect
