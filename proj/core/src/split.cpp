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
#include <numeric>
#include <stdexcept>

#include "mtlaffect/corpus.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/random.hpp"

namespace mtlaffect {

namespace {

enum class Part { kTrain, kValidation, kTest };

void check_proportions(const std::vector<FunctionalUnit>& all, const std::vector<FunctionalUnit>& part,
                       const char* name) {
  if (part.empty()) return;
  const StatsReport global = corpus_stats(all);
  const StatsReport local = corpus_stats(part);
  for (Valence v : kAllValences) {
    const double delta = std::abs(global.polarity_fraction(v) - local.polarity_fraction(v));
    if (delta > kStratificationTolerance + 1e-12) {
      throw StratificationError(std::string(name) + " split deviates by " + std::to_string(delta * 100.0) +
                                "pp on class '" + std::string(valence_name(v)) + "'");
    }
  }
}

}  // namespace

CorpusSplit stratified_split(const std::vector<FunctionalUnit>& units, SplitRatios ratios, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.validation < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.validation + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be non-negative and sum to 1");
  }
  if (units.size() < 10) {
    throw StratificationError("stratified split needs at least 10 units, got " + std::to_string(units.size()));
  }

  Rng rng(Rng::mix(seed ^ 0x5b1175eedULL));
  std::vector<Part> assignment(units.size(), Part::kTrain);
  for (Valence v : kAllValences) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < units.size(); ++i) {
      if (units[i].valence == v) members.push_back(i);
    }
    if (members.empty()) continue;
    rng.shuffle(std::span<std::size_t>(members));
    const auto n = static_cast<double>(members.size());
    const auto n_test = static_cast<std::size_t>(std::llround(n * ratios.test));
    const auto n_val = static_cast<std::size_t>(std::llround(n * ratios.validation));
    const bool starved = (ratios.test > 0 && n_test == 0) || (ratios.validation > 0 && n_val == 0) ||
                         (ratios.train > 0 && n_test + n_val >= members.size());
    if (starved) {
      throw StratificationError("class '" + std::string(valence_name(v)) + "' has " +
                                std::to_string(members.size()) + " units, too few to populate every split");
    }
    for (std::size_t k = 0; k < members.size(); ++k) {
      if (k < n_test) {
        assignment[members[k]] = Part::kTest;
      } else if (k < n_test + n_val) {
        assignment[members[k]] = Part::kValidation;
      }
    }
  }

  CorpusSplit split;
  split.seed = seed;
  for (std::size_t i = 0; i < units.size(); ++i) {
    switch (assignment[i]) {
      case Part::kTrain:
        split.train.push_back(units[i]);
        break;
      case Part::kValidation:
        split.validation.push_back(units[i]);
        break;
      case Part::kTest:
        split.test.push_back(units[i]);
        break;
    }
  }
  check_proportions(units, split.train, "train");
  check_proportions(units, split.validation, "validation");
  check_proportions(units, split.test, "test");
  return split;
}

}  // namespace mtlaffect
