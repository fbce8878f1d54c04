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

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace mtlaffect {

/// Valence of a functional unit. Codes are fixed: 0=negative, 1=positive, 2=neutral.
enum class Valence : int { kNegative = 0, kPositive = 1, kNeutral = 2 };

inline constexpr std::array<Valence, 3> kAllValences = {Valence::kNegative, Valence::kPositive,
                                                         Valence::kNeutral};

/// Binary emotion-carrier label of a candidate span.
enum class Carrier : int { kNo = 0, kYes = 1 };

std::string_view valence_name(Valence v);
std::string_view carrier_name(Carrier c);
Valence parse_valence(std::string_view name);
Carrier parse_carrier(std::string_view name);

/// A contiguous token span [start, end) of a functional unit.
struct ECCandidate {
  std::size_t start = 0;
  std::size_t end = 0;
  Carrier carrier = Carrier::kNo;

  std::size_t length() const { return end - start; }
  friend bool operator==(const ECCandidate&, const ECCandidate&) = default;
};

/// The atomic annotation unit: one dialogue act worth of tokens.
struct FunctionalUnit {
  std::string unit_id;
  std::string narrative_id;
  std::vector<std::string> tokens;
  Valence valence = Valence::kNeutral;
  std::vector<ECCandidate> candidates;

  std::size_t carrier_count() const;
  bool is_polar() const { return valence != Valence::kNeutral; }
  /// Lower-cased, whitespace-joined surface form of a span.
  std::string span_text(const ECCandidate& c) const;

  friend bool operator==(const FunctionalUnit&, const FunctionalUnit&) = default;
};

struct Narrative {
  std::string narrative_id;
  std::string subject_id;
  std::vector<FunctionalUnit> units;

  friend bool operator==(const Narrative&, const Narrative&) = default;
};

/// Throws ValidationError naming the unit and the violated invariant.
void validate_unit(const FunctionalUnit& unit);
/// Validates every unit plus narrative-level invariants (unique ids, non-empty, parent ids).
void validate_corpus(const std::vector<Narrative>& narratives);

std::vector<FunctionalUnit> flatten_units(const std::vector<Narrative>& narratives);

// ---------------------------------------------------------------------------
// Persistence: one JSON object per line, one line per functional unit.

std::vector<Narrative> parse_corpus(std::string_view text);
std::string serialize_corpus(const std::vector<Narrative>& narratives);
std::vector<Narrative> load_corpus(const std::filesystem::path& path);
void save_corpus(const std::vector<Narrative>& narratives, const std::filesystem::path& path);

// ---------------------------------------------------------------------------
// Splitting

struct SplitRatios {
  double train = 0.8;
  double validation = 0.1;
  double test = 0.1;
};

struct CorpusSplit {
  std::vector<FunctionalUnit> train;
  std::vector<FunctionalUnit> validation;
  std::vector<FunctionalUnit> test;
  std::uint64_t seed = 0;
};

/// Allowed deviation of a split's class proportions from the global ones.
inline constexpr double kStratificationTolerance = 0.02;

/// Per-class proportional split. Deterministic for a fixed seed.
CorpusSplit stratified_split(const std::vector<FunctionalUnit>& units, SplitRatios ratios,
                             std::uint64_t seed);

// ---------------------------------------------------------------------------
// Statistics

struct StatsReport {
  std::size_t unit_count = 0;
  std::map<Valence, std::size_t> polarity_counts;
  std::size_t candidate_count = 0;
  std::size_t carrier_count = 0;
  std::size_t polar_candidate_count = 0;
  std::size_t polar_carrier_count = 0;

  double polarity_fraction(Valence v) const;
  double polar_fraction() const;
  double ec_rate_overall() const;
  double ec_rate_polar() const;

  /// Flat `key value` lines, fixed key order.
  std::string to_text() const;
  std::string to_json() const;
};

StatsReport corpus_stats(const std::vector<FunctionalUnit>& units);

struct IntersectionReport {
  std::set<std::string> positive;
  std::set<std::string> negative;
  std::set<std::string> intersection;

  double ratio_of_union() const;
  double ratio_of_positive() const;
  double ratio_of_negative() const;

  std::string to_text() const;
  std::string to_json() const;
};

/// Compares distinct carrier surface forms found in positive vs. negative units.
IntersectionReport ec_intersection_stats(const std::vector<FunctionalUnit>& units);

// ---------------------------------------------------------------------------
// Candidate extraction for raw text

enum class ChunkTag { kFiller, kNoun, kVerb };

using TokenSpan = std::pair<std::size_t, std::size_t>;

/// Proposes candidate spans over a token list.
class CandidateExtractor {
 public:
  virtual ~CandidateExtractor() = default;
  virtual std::vector<TokenSpan> extract(const std::vector<std::string>& tokens) const = 0;
};

/// Maximal runs of noun-like or verb-like tokens under a supplied tag function.
/// A run is homogeneous in tag; noun and verb runs that touch are separate spans.
class RunChunker final : public CandidateExtractor {
 public:
  using TagFn = std::function<ChunkTag(std::string_view)>;
  explicit RunChunker(TagFn tag) : tag_(std::move(tag)) {}
  std::vector<TokenSpan> extract(const std::vector<std::string>& tokens) const override;

 private:
  TagFn tag_;
};

std::vector<TokenSpan> extract_candidates(const std::vector<std::string>& tokens,
                                          const CandidateExtractor& chunker);

// ---------------------------------------------------------------------------
// Synthetic corpus generation

/// Parameters of the synthetic narrative generator.
///
/// Polar units carry at least one emotion carrier drawn from the lexicon of
/// their polarity (or from the shared lexicon, which feeds both polarities);
/// neutral units only contain non-carrier candidates.
struct GeneratorSpec {
  std::size_t n_narratives = 481;
  std::size_t units_per_narrative = 9;
  /// Overrides n_narratives * units_per_narrative when non-zero.
  std::size_t total_units = 4273;
  std::size_t n_subjects = 45;

  double polar_fraction = 0.40;
  double positive_fraction_of_all = 0.13;
  double negative_fraction_of_all = 0.27;
  double ec_rate_in_polar = 0.447;
  double lexicon_overlap = 0.04;
  double mean_candidates_per_unit = 2.5;

  std::size_t filler_vocab = 400;
  std::size_t positive_lexicon = 46;
  std::size_t negative_lexicon = 125;
  std::size_t neutral_candidate_lexicon = 300;

  /// Probability that a non-carrier candidate is drawn from an EC lexicon
  /// (opposite polarity in polar units) instead of the neutral lexicon.
  double distractor_rate = 0.0;
  /// Probability that a cue token precedes a carrier / non-carrier span.
  double carrier_cue_rate = 0.0;
  double false_cue_rate = 0.0;

  std::uint64_t seed = 1;

  std::size_t unit_count() const;
  std::size_t shared_lexicon_size() const;

  /// Calibrated to the reference corpus statistics.
  static GeneratorSpec calibrated();
  /// No shared lexemes; carrier lexicon fully determines polarity, and carrier
  /// status is only partially visible from the text.
  static GeneratorSpec strongly_dependent(std::size_t units, std::uint64_t seed);
};

/// Throws SpecError naming the offending field.
void validate_generator_spec(const GeneratorSpec& spec);

std::vector<Narrative> generate_corpus(const GeneratorSpec& spec);

class KvConfig;
/// Reads GeneratorSpec fields (same names as the struct members) over `base`.
GeneratorSpec generator_spec_from_config(const KvConfig& config, GeneratorSpec base = {});
std::string generator_spec_to_text(const GeneratorSpec& spec);

}  // namespace mtlaffect
