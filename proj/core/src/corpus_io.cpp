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
#include <cctype>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "json.hpp"
#include "mtlaffect/corpus.hpp"
#include "mtlaffect/error.hpp"

namespace mtlaffect {

using nlohmann::json;

std::string_view valence_name(Valence v) {
  switch (v) {
    case Valence::kNegative:
      return "negative";
    case Valence::kPositive:
      return "positive";
    case Valence::kNeutral:
      return "neutral";
  }
  throw std::invalid_argument("invalid valence code");
}

std::string_view carrier_name(Carrier c) { return c == Carrier::kYes ? "yes" : "no"; }

Valence parse_valence(std::string_view name) {
  if (name == "negative") return Valence::kNegative;
  if (name == "positive") return Valence::kPositive;
  if (name == "neutral") return Valence::kNeutral;
  throw std::invalid_argument("unknown valence '" + std::string(name) + "'");
}

Carrier parse_carrier(std::string_view name) {
  if (name == "yes") return Carrier::kYes;
  if (name == "no") return Carrier::kNo;
  throw std::invalid_argument("unknown carrier label '" + std::string(name) + "'");
}

std::size_t FunctionalUnit::carrier_count() const {
  return static_cast<std::size_t>(std::count_if(
      candidates.begin(), candidates.end(), [](const ECCandidate& c) { return c.carrier == Carrier::kYes; }));
}

std::string FunctionalUnit::span_text(const ECCandidate& c) const {
  std::string out;
  for (std::size_t i = c.start; i < c.end && i < tokens.size(); ++i) {
    if (i > c.start) out.push_back(' ');
    for (unsigned char ch : tokens[i]) out.push_back(static_cast<char>(std::tolower(ch)));
  }
  return out;
}

void validate_unit(const FunctionalUnit& unit) {
  if (unit.tokens.empty()) throw ValidationError(unit.unit_id, "tokens must be non-empty");
  const std::size_t carriers = unit.carrier_count();
  if (unit.valence == Valence::kNeutral && carriers > 0) {
    throw ValidationError(unit.unit_id, "neutral valence implies no emotion carrier (found " +
                                            std::to_string(carriers) + " carrier=yes candidates)");
  }
  std::size_t previous_end = 0;
  for (std::size_t i = 0; i < unit.candidates.size(); ++i) {
    const auto& c = unit.candidates[i];
    if (!(c.start < c.end && c.end <= unit.tokens.size())) {
      throw ValidationError(unit.unit_id, "candidate " + std::to_string(i) + " [" + std::to_string(c.start) +
                                              "," + std::to_string(c.end) + ") out of bounds");
    }
    if (i > 0 && c.start < previous_end) {
      throw ValidationError(unit.unit_id,
                            "candidates must be sorted by start and non-overlapping (candidate " +
                                std::to_string(i) + ")");
    }
    previous_end = c.end;
  }
}

void validate_corpus(const std::vector<Narrative>& narratives) {
  std::unordered_set<std::string> narrative_ids;
  std::unordered_set<std::string> unit_ids;
  for (const auto& n : narratives) {
    if (!narrative_ids.insert(n.narrative_id).second) {
      throw ValidationError("", "duplicate narrative_id '" + n.narrative_id + "'");
    }
    if (n.units.empty()) throw ValidationError("", "narrative '" + n.narrative_id + "' has no units");
    for (const auto& u : n.units) {
      if (u.narrative_id != n.narrative_id) {
        throw ValidationError(u.unit_id, "narrative_id '" + u.narrative_id + "' differs from parent '" +
                                             n.narrative_id + "'");
      }
      if (!unit_ids.insert(u.unit_id).second) throw ValidationError(u.unit_id, "duplicate unit_id");
      validate_unit(u);
    }
  }
}

std::vector<FunctionalUnit> flatten_units(const std::vector<Narrative>& narratives) {
  std::vector<FunctionalUnit> out;
  for (const auto& n : narratives) out.insert(out.end(), n.units.begin(), n.units.end());
  return out;
}

namespace {

json unit_to_json(const Narrative& n, const FunctionalUnit& u) {
  json candidates = json::array();
  for (const auto& c : u.candidates) {
    candidates.push_back(
        json{{"start", c.start}, {"end", c.end}, {"carrier", std::string(carrier_name(c.carrier))}});
  }
  return json{{"narrative_id", n.narrative_id},
              {"subject_id", n.subject_id},
              {"unit_id", u.unit_id},
              {"tokens", u.tokens},
              {"valence", std::string(valence_name(u.valence))},
              {"candidates", std::move(candidates)}};
}

template <typename T>
T required(const json& record, const char* key, std::size_t line) {
  auto it = record.find(key);
  if (it == record.end()) throw ParseError(line, std::string("missing field '") + key + "'");
  try {
    return it->get<T>();
  } catch (const json::exception&) {
    throw ParseError(line, std::string("field '") + key + "' has the wrong type");
  }
}

}  // namespace

std::vector<Narrative> parse_corpus(std::string_view text) {
  std::vector<Narrative> narratives;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (std::all_of(line.begin(), line.end(), [](unsigned char ch) { return std::isspace(ch); })) continue;
    json record;
    try {
      record = json::parse(line);
    } catch (const json::parse_error& e) {
      throw ParseError(line_no, std::string("invalid JSON: ") + e.what());
    }
    if (!record.is_object()) throw ParseError(line_no, "record must be a JSON object");

    FunctionalUnit unit;
    unit.narrative_id = required<std::string>(record, "narrative_id", line_no);
    auto subject_id = required<std::string>(record, "subject_id", line_no);
    unit.unit_id = required<std::string>(record, "unit_id", line_no);
    unit.tokens = required<std::vector<std::string>>(record, "tokens", line_no);
    try {
      unit.valence = parse_valence(required<std::string>(record, "valence", line_no));
    } catch (const std::invalid_argument& e) {
      throw ParseError(line_no, e.what());
    }
    const auto candidates = required<json>(record, "candidates", line_no);
    if (!candidates.is_array()) throw ParseError(line_no, "field 'candidates' must be an array");
    for (const auto& c : candidates) {
      ECCandidate cand;
      cand.start = required<std::size_t>(c, "start", line_no);
      cand.end = required<std::size_t>(c, "end", line_no);
      try {
        cand.carrier = parse_carrier(required<std::string>(c, "carrier", line_no));
      } catch (const std::invalid_argument& e) {
        throw ParseError(line_no, e.what());
      }
      unit.candidates.push_back(cand);
    }

    // Records of one narrative are contiguous in files we write; tolerate
    // interleaving by searching backwards for the narrative.
    auto it = std::find_if(narratives.rbegin(), narratives.rend(),
                           [&](const Narrative& n) { return n.narrative_id == unit.narrative_id; });
    if (it == narratives.rend()) {
      narratives.push_back(Narrative{unit.narrative_id, std::move(subject_id), {}});
      narratives.back().units.push_back(std::move(unit));
    } else {
      if (it->subject_id != subject_id) {
        throw ParseError(line_no, "subject_id differs from earlier records of narrative '" +
                                      unit.narrative_id + "'");
      }
      it->units.push_back(std::move(unit));
    }
  }
  validate_corpus(narratives);
  return narratives;
}

std::string serialize_corpus(const std::vector<Narrative>& narratives) {
  std::string out;
  for (const auto& n : narratives) {
    for (const auto& u : n.units) {
      out += unit_to_json(n, u).dump();
      out.push_back('\n');
    }
  }
  return out;
}

std::vector<Narrative> load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open corpus file '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_corpus(buffer.str());
}

void save_corpus(const std::vector<Narrative>& narratives, const std::filesystem::path& path) {
  validate_corpus(narratives);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write corpus file '" + path.string() + "'");
  out << serialize_corpus(narratives);
  if (!out) throw std::runtime_error("failed writing corpus file '" + path.string() + "'");
}

}  // namespace mtlaffect
