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
#include <cstdio>
#include <unordered_set>

#include "mtlaffect/corpus.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/kv_config.hpp"
#include "mtlaffect/random.hpp"

namespace mtlaffect {

namespace {

using Lexeme = std::vector<std::string>;

constexpr int kCandidateTrials = 4;
constexpr std::size_t kCueWords = 3;

/// Produces pronounceable pseudo-words, never repeating one.
class WordFactory {
 public:
  explicit WordFactory(Rng& rng) : rng_(rng) {}

  std::string next() {
    static constexpr const char* kOnsets[] = {"b", "d", "f", "g", "k", "l", "m", "n", "p", "r",
                                              "s", "t", "v", "z", "br", "tr", "st", "ch", "gl", "pr"};
    static constexpr const char* kNuclei[] = {"a", "e", "i", "o", "u", "ai", "ou", "ea"};
    for (;;) {
      const std::size_t syllables = 2 + rng_.index(2);
      std::string word;
      for (std::size_t s = 0; s < syllables; ++s) {
        word += kOnsets[rng_.index(std::size(kOnsets))];
        word += kNuclei[rng_.index(std::size(kNuclei))];
      }
      if (seen_.insert(word).second) return word;
    }
  }

  std::vector<Lexeme> lexicon(std::size_t size, double two_token_rate) {
    std::vector<Lexeme> out;
    out.reserve(size);
    for (std::size_t i = 0; i < size; ++i) {
      Lexeme lexeme{next()};
      if (rng_.bernoulli(two_token_rate)) lexeme.push_back(next());
      out.push_back(std::move(lexeme));
    }
    return out;
  }

 private:
  Rng& rng_;
  std::unordered_set<std::string> seen_;
};

struct Lexicons {
  std::vector<Lexeme> filler;
  std::vector<Lexeme> cues;
  std::vector<Lexeme> positive;  // own + shared
  std::vector<Lexeme> negative;  // own + shared
  std::size_t positive_own = 0;
  std::size_t negative_own = 0;
  std::vector<Lexeme> neutral;
};

Lexicons build_lexicons(const GeneratorSpec& spec, Rng& rng) {
  WordFactory words(rng);
  Lexicons lex;
  lex.filler = words.lexicon(spec.filler_vocab, 0.0);
  lex.cues = words.lexicon(kCueWords, 0.0);
  const auto pos_own = words.lexicon(spec.positive_lexicon, 0.3);
  const auto neg_own = words.lexicon(spec.negative_lexicon, 0.3);
  const auto shared = words.lexicon(spec.shared_lexicon_size(), 0.3);
  lex.neutral = words.lexicon(spec.neutral_candidate_lexicon, 0.3);
  lex.positive = pos_own;
  lex.positive.insert(lex.positive.end(), shared.begin(), shared.end());
  lex.negative = neg_own;
  lex.negative.insert(lex.negative.end(), shared.begin(), shared.end());
  lex.positive_own = pos_own.size();
  lex.negative_own = neg_own.size();
  return lex;
}

const Lexeme& pick(const std::vector<Lexeme>& lexicon, std::size_t limit, Rng& rng) {
  return lexicon[rng.index(limit)];
}

double extra_carrier_probability(const GeneratorSpec& spec) {
  const double mean = spec.mean_candidates_per_unit;
  if (mean <= 1.0) return 0.0;
  return (spec.ec_rate_in_polar * mean - 1.0) / (mean - 1.0);
}

FunctionalUnit make_unit(const GeneratorSpec& spec, const Lexicons& lex, Valence valence, Rng& rng) {
  FunctionalUnit unit;
  unit.valence = valence;
  const double extra_p = (spec.mean_candidates_per_unit - 1.0) / kCandidateTrials;
  const std::size_t k = 1 + static_cast<std::size_t>(rng.binomial(kCandidateTrials, extra_p));

  std::vector<bool> is_carrier(k, false);
  if (valence != Valence::kNeutral) {
    const std::size_t carriers =
        1 + static_cast<std::size_t>(rng.binomial(static_cast<int>(k) - 1, extra_carrier_probability(spec)));
    std::vector<std::size_t> order(k);
    for (std::size_t i = 0; i < k; ++i) order[i] = i;
    rng.shuffle(std::span<std::size_t>(order));
    for (std::size_t i = 0; i < carriers; ++i) is_carrier[order[i]] = true;
  }

  auto add_filler = [&](std::size_t count) {
    for (std::size_t i = 0; i < count; ++i) unit.tokens.push_back(pick(lex.filler, lex.filler.size(), rng)[0]);
  };

  for (std::size_t i = 0; i < k; ++i) {
    const Lexeme* lexeme = nullptr;
    if (is_carrier[i]) {
      lexeme = valence == Valence::kPositive ? &pick(lex.positive, lex.positive.size(), rng)
                                             : &pick(lex.negative, lex.negative.size(), rng);
    } else if (rng.bernoulli(spec.distractor_rate) && lex.positive_own + lex.negative_own > 0) {
      bool from_positive = valence == Valence::kNegative;
      if (valence == Valence::kNeutral) from_positive = rng.bernoulli(0.5);
      if (from_positive && lex.positive_own == 0) from_positive = false;
      if (!from_positive && lex.negative_own == 0) from_positive = true;
      lexeme = from_positive ? &pick(lex.positive, lex.positive_own, rng)
                             : &pick(lex.negative, lex.negative_own, rng);
    } else {
      lexeme = &pick(lex.neutral, lex.neutral.size(), rng);
    }

    add_filler((i == 0 ? 0 : 1) + static_cast<std::size_t>(rng.binomial(2, 0.5)));
    const double cue_rate = is_carrier[i] ? spec.carrier_cue_rate : spec.false_cue_rate;
    if (rng.bernoulli(cue_rate)) unit.tokens.push_back(pick(lex.cues, lex.cues.size(), rng)[0]);

    ECCandidate cand;
    cand.start = unit.tokens.size();
    unit.tokens.insert(unit.tokens.end(), lexeme->begin(), lexeme->end());
    cand.end = unit.tokens.size();
    cand.carrier = is_carrier[i] ? Carrier::kYes : Carrier::kNo;
    unit.candidates.push_back(cand);
  }
  add_filler(static_cast<std::size_t>(rng.binomial(2, 0.5)));
  return unit;
}

void require_probability(double p, const char* field) {
  if (!(p >= 0.0 && p <= 1.0)) throw SpecError(field, "must be a probability in [0, 1]");
}

}  // namespace

std::size_t GeneratorSpec::unit_count() const {
  return total_units != 0 ? total_units : n_narratives * units_per_narrative;
}

std::size_t GeneratorSpec::shared_lexicon_size() const {
  if (lexicon_overlap <= 0.0) return 0;
  const double own = static_cast<double>(positive_lexicon + negative_lexicon);
  const auto shared = static_cast<std::size_t>(std::llround(lexicon_overlap * own / (1.0 - lexicon_overlap)));
  return std::max<std::size_t>(shared, 1);
}

GeneratorSpec GeneratorSpec::calibrated() { return GeneratorSpec{}; }

GeneratorSpec GeneratorSpec::strongly_dependent(std::size_t units, std::uint64_t seed) {
  GeneratorSpec spec;
  spec.total_units = units;
  spec.units_per_narrative = 10;
  spec.n_narratives = std::max<std::size_t>(1, units / 10);
  spec.n_subjects = std::max<std::size_t>(1, spec.n_narratives / 4);
  spec.polar_fraction = 0.60;
  spec.positive_fraction_of_all = 0.30;
  spec.negative_fraction_of_all = 0.30;
  spec.ec_rate_in_polar = 0.5;
  spec.lexicon_overlap = 0.0;
  spec.mean_candidates_per_unit = 2.5;
  spec.filler_vocab = 40;
  spec.positive_lexicon = 16;
  spec.negative_lexicon = 16;
  spec.neutral_candidate_lexicon = 24;
  spec.distractor_rate = 0.6;
  spec.carrier_cue_rate = 0.8;
  spec.false_cue_rate = 0.2;
  spec.seed = seed;
  return spec;
}

void validate_generator_spec(const GeneratorSpec& spec) {
  require_probability(spec.polar_fraction, "polar_fraction");
  require_probability(spec.positive_fraction_of_all, "positive_fraction_of_all");
  require_probability(spec.negative_fraction_of_all, "negative_fraction_of_all");
  require_probability(spec.ec_rate_in_polar, "ec_rate_in_polar");
  require_probability(spec.lexicon_overlap, "lexicon_overlap");
  require_probability(spec.distractor_rate, "distractor_rate");
  require_probability(spec.carrier_cue_rate, "carrier_cue_rate");
  require_probability(spec.false_cue_rate, "false_cue_rate");
  if (std::abs(spec.positive_fraction_of_all + spec.negative_fraction_of_all - spec.polar_fraction) > 1e-9) {
    throw SpecError("polar_fraction", "must equal positive_fraction_of_all + negative_fraction_of_all");
  }
  if (spec.lexicon_overlap >= 1.0) throw SpecError("lexicon_overlap", "must be below 1");
  if (spec.n_narratives == 0) throw SpecError("n_narratives", "must be positive");
  if (spec.total_units == 0 && spec.units_per_narrative == 0) {
    throw SpecError("units_per_narrative", "must be positive");
  }
  if (spec.unit_count() < spec.n_narratives) {
    throw SpecError("total_units", "fewer units than narratives");
  }
  if (spec.n_subjects == 0) throw SpecError("n_subjects", "must be positive");
  if (!(spec.mean_candidates_per_unit >= 1.0 && spec.mean_candidates_per_unit <= 1.0 + kCandidateTrials)) {
    throw SpecError("mean_candidates_per_unit", "must lie in [1, 5]");
  }
  if (spec.filler_vocab == 0) throw SpecError("filler_vocab", "must be positive");
  if (spec.positive_fraction_of_all > 0 && spec.positive_lexicon + spec.shared_lexicon_size() == 0) {
    throw SpecError("positive_lexicon", "positive units need a non-empty lexicon");
  }
  if (spec.negative_fraction_of_all > 0 && spec.negative_lexicon + spec.shared_lexicon_size() == 0) {
    throw SpecError("negative_lexicon", "negative units need a non-empty lexicon");
  }
  if (spec.neutral_candidate_lexicon == 0 && spec.distractor_rate < 1.0) {
    throw SpecError("neutral_candidate_lexicon", "must be positive");
  }
  if (spec.polar_fraction > 0.0) {
    // Every polar unit holds at least one carrier, so the carrier rate can be
    // neither below 1/mean nor reach it unless the mean is exactly one.
    const double p = extra_carrier_probability(spec);
    const bool exact_single = spec.mean_candidates_per_unit <= 1.0 && spec.ec_rate_in_polar == 1.0;
    if (spec.mean_candidates_per_unit <= 1.0 ? !exact_single : (p < -1e-12 || p > 1.0 + 1e-12)) {
      throw SpecError("ec_rate_in_polar", "infeasible with at least one carrier per polar unit and " +
                                              std::to_string(spec.mean_candidates_per_unit) +
                                              " candidates per unit on average");
    }
  }
}

std::vector<Narrative> generate_corpus(const GeneratorSpec& spec) {
  validate_generator_spec(spec);
  Rng rng(Rng::mix(spec.seed));
  Rng lexicon_rng = rng.fork(1);
  Rng label_rng = rng.fork(2);
  Rng unit_rng = rng.fork(3);
  const Lexicons lex = build_lexicons(spec, lexicon_rng);

  const std::size_t n_units = spec.unit_count();
  const auto n_pos = static_cast<std::size_t>(std::llround(spec.positive_fraction_of_all * n_units));
  const auto n_neg = std::min(n_units - std::min(n_units, n_pos),
                              static_cast<std::size_t>(std::llround(spec.negative_fraction_of_all * n_units)));
  std::vector<Valence> labels(n_units, Valence::kNeutral);
  std::fill_n(labels.begin(), n_pos, Valence::kPositive);
  std::fill_n(labels.begin() + static_cast<std::ptrdiff_t>(n_pos), n_neg, Valence::kNegative);
  label_rng.shuffle(std::span<Valence>(labels));

  std::vector<Narrative> narratives;
  narratives.reserve(spec.n_narratives);
  const std::size_t base = n_units / spec.n_narratives;
  const std::size_t remainder = n_units % spec.n_narratives;
  std::size_t next_unit = 0;
  char buffer[64];
  for (std::size_t n = 0; n < spec.n_narratives; ++n) {
    Narrative narrative;
    std::snprintf(buffer, sizeof buffer, "n%04zu", n);
    narrative.narrative_id = buffer;
    std::snprintf(buffer, sizeof buffer, "s%03zu", n % spec.n_subjects);
    narrative.subject_id = buffer;
    const std::size_t count = base + (n < remainder ? 1 : 0);
    for (std::size_t u = 0; u < count; ++u) {
      FunctionalUnit unit = make_unit(spec, lex, labels[next_unit++], unit_rng);
      std::snprintf(buffer, sizeof buffer, "%s_u%02zu", narrative.narrative_id.c_str(), u);
      unit.unit_id = buffer;
      unit.narrative_id = narrative.narrative_id;
      narrative.units.push_back(std::move(unit));
    }
    narratives.push_back(std::move(narrative));
  }
  return narratives;
}

namespace {

template <typename Fn>
void for_each_field(Fn&& fn, auto& spec) {
  fn("n_narratives", spec.n_narratives);
  fn("units_per_narrative", spec.units_per_narrative);
  fn("total_units", spec.total_units);
  fn("n_subjects", spec.n_subjects);
  fn("polar_fraction", spec.polar_fraction);
  fn("positive_fraction_of_all", spec.positive_fraction_of_all);
  fn("negative_fraction_of_all", spec.negative_fraction_of_all);
  fn("ec_rate_in_polar", spec.ec_rate_in_polar);
  fn("lexicon_overlap", spec.lexicon_overlap);
  fn("mean_candidates_per_unit", spec.mean_candidates_per_unit);
  fn("filler_vocab", spec.filler_vocab);
  fn("positive_lexicon", spec.positive_lexicon);
  fn("negative_lexicon", spec.negative_lexicon);
  fn("neutral_candidate_lexicon", spec.neutral_candidate_lexicon);
  fn("distractor_rate", spec.distractor_rate);
  fn("carrier_cue_rate", spec.carrier_cue_rate);
  fn("false_cue_rate", spec.false_cue_rate);
  fn("seed", spec.seed);
}

}  // namespace

GeneratorSpec generator_spec_from_config(const KvConfig& config, GeneratorSpec base) {
  for_each_field(
      [&](const char* key, auto& field) {
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_same_v<T, double>) {
          field = config.get_double(key, field);
        } else {
          field = static_cast<T>(config.get_uint(key, field));
        }
      },
      base);
  return base;
}

std::string generator_spec_to_text(const GeneratorSpec& spec) {
  KvConfig out;
  for_each_field(
      [&](const char* key, const auto& field) {
        char buffer[64];
        using T = std::decay_t<decltype(field)>;
        if constexpr (std::is_same_v<T, double>) {
          std::snprintf(buffer, sizeof buffer, "%.17g", field);
        } else {
          std::snprintf(buffer, sizeof buffer, "%llu", static_cast<unsigned long long>(field));
        }
        out.set(key, buffer);
      },
      spec);
  return out.to_text();
}

}  // namespace mtlaffect
