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
#include <iterator>
#include <sstream>

#include "json.hpp"
#include "mtlaffect/corpus.hpp"

namespace mtlaffect {

namespace {

double ratio(std::size_t num, std::size_t den) {
  return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
}

std::string format_number(double x) {
  std::ostringstream out;
  out.precision(6);
  out << std::fixed << x;
  return out.str();
}

}  // namespace

double StatsReport::polarity_fraction(Valence v) const {
  auto it = polarity_counts.find(v);
  return ratio(it == polarity_counts.end() ? 0 : it->second, unit_count);
}

double StatsReport::polar_fraction() const {
  return polarity_fraction(Valence::kNegative) + polarity_fraction(Valence::kPositive);
}

double StatsReport::ec_rate_overall() const { return ratio(carrier_count, candidate_count); }
double StatsReport::ec_rate_polar() const { return ratio(polar_carrier_count, polar_candidate_count); }

StatsReport corpus_stats(const std::vector<FunctionalUnit>& units) {
  StatsReport r;
  for (Valence v : kAllValences) r.polarity_counts[v] = 0;
  r.unit_count = units.size();
  for (const auto& u : units) {
    ++r.polarity_counts[u.valence];
    const std::size_t carriers = u.carrier_count();
    r.candidate_count += u.candidates.size();
    r.carrier_count += carriers;
    if (u.is_polar()) {
      r.polar_candidate_count += u.candidates.size();
      r.polar_carrier_count += carriers;
    }
  }
  return r;
}

std::string StatsReport::to_text() const {
  std::ostringstream out;
  out << "units " << unit_count << '\n';
  for (Valence v : kAllValences) {
    auto it = polarity_counts.find(v);
    out << "count_" << valence_name(v) << ' ' << (it == polarity_counts.end() ? 0 : it->second) << '\n';
  }
  for (Valence v : kAllValences) {
    out << "fraction_" << valence_name(v) << ' ' << format_number(polarity_fraction(v)) << '\n';
  }
  out << "polar_fraction " << format_number(polar_fraction()) << '\n';
  out << "candidates " << candidate_count << '\n';
  out << "carriers " << carrier_count << '\n';
  out << "polar_candidates " << polar_candidate_count << '\n';
  out << "polar_carriers " << polar_carrier_count << '\n';
  out << "ec_rate_overall " << format_number(ec_rate_overall()) << '\n';
  out << "ec_rate_polar " << format_number(ec_rate_polar()) << '\n';
  return out.str();
}

std::string StatsReport::to_json() const {
  nlohmann::ordered_json j;
  j["units"] = unit_count;
  for (Valence v : kAllValences) {
    auto it = polarity_counts.find(v);
    j[std::string("count_") + std::string(valence_name(v))] = it == polarity_counts.end() ? 0 : it->second;
  }
  j["polar_fraction"] = polar_fraction();
  j["candidates"] = candidate_count;
  j["carriers"] = carrier_count;
  j["polar_candidates"] = polar_candidate_count;
  j["polar_carriers"] = polar_carrier_count;
  j["ec_rate_overall"] = ec_rate_overall();
  j["ec_rate_polar"] = ec_rate_polar();
  return j.dump();
}

IntersectionReport ec_intersection_stats(const std::vector<FunctionalUnit>& units) {
  IntersectionReport r;
  for (const auto& u : units) {
    if (!u.is_polar()) continue;
    auto& target = u.valence == Valence::kPositive ? r.positive : r.negative;
    for (const auto& c : u.candidates) {
      if (c.carrier == Carrier::kYes) target.insert(u.span_text(c));
    }
  }
  std::set_intersection(r.positive.begin(), r.positive.end(), r.negative.begin(), r.negative.end(),
                        std::inserter(r.intersection, r.intersection.begin()));
  return r;
}

double IntersectionReport::ratio_of_union() const {
  return ratio(intersection.size(), positive.size() + negative.size() - intersection.size());
}
double IntersectionReport::ratio_of_positive() const { return ratio(intersection.size(), positive.size()); }
double IntersectionReport::ratio_of_negative() const { return ratio(intersection.size(), negative.size()); }

std::string IntersectionReport::to_text() const {
  std::ostringstream out;
  out << "positive_forms " << positive.size() << '\n';
  out << "negative_forms " << negative.size() << '\n';
  out << "shared_forms " << intersection.size() << '\n';
  out << "shared_of_union " << format_number(ratio_of_union()) << '\n';
  out << "shared_of_positive " << format_number(ratio_of_positive()) << '\n';
  out << "shared_of_negative " << format_number(ratio_of_negative()) << '\n';
  return out.str();
}

std::string IntersectionReport::to_json() const {
  nlohmann::ordered_json j;
  j["positive_forms"] = positive.size();
  j["negative_forms"] = negative.size();
  j["shared_forms"] = intersection.size();
  j["shared_of_union"] = ratio_of_union();
  j["shared_of_positive"] = ratio_of_positive();
  j["shared_of_negative"] = ratio_of_negative();
  return j.dump();
}

}  // namespace mtlaffect
