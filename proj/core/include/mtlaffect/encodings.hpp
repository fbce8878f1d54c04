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
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "mtlaffect/corpus.hpp"

namespace mtlaffect {

namespace tokens {
inline constexpr std::string_view kPad = "[PAD]";
inline constexpr std::string_view kUnk = "[UNK]";
inline constexpr std::string_view kCls = "[CLS]";
inline constexpr std::string_view kSep = "[SEP]";
inline constexpr std::string_view kValSep = "<val>";
inline constexpr std::string_view kCandSep = "<cand>";
inline constexpr std::string_view kEcPredSep = "<EC_pred>";
inline constexpr std::string_view kValenceContext = "valence:";
inline constexpr std::string_view kEcContext = "EC:";
inline constexpr std::string_view kNone = "none";
inline constexpr std::string_view kYes = "y";
inline constexpr std::string_view kNo = "n";
}  // namespace tokens

/// Closed whitespace-token vocabulary. Ids are dense; line number == id on disk.
class Vocabulary {
 public:
  /// Reserved tokens followed by corpus tokens in first-appearance order.
  static Vocabulary build(const std::vector<FunctionalUnit>& units);
  static Vocabulary from_tokens(std::vector<std::string> tokens);
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  /// Unknown tokens map to the UNK id.
  int id(std::string_view token) const;
  std::optional<int> find(std::string_view token) const;
  const std::string& token(int id) const;
  std::string detokenize(std::span<const int> ids) const;

  int pad() const { return pad_; }
  int unk() const { return unk_; }
  int cls() const { return cls_; }
  int sep() const { return sep_; }
  int val_sep() const { return val_sep_; }
  int cand_sep() const { return cand_sep_; }
  int ec_pred_sep() const { return ec_pred_sep_; }

  int valence_label_id(Valence v) const;
  int carrier_label_id(Carrier c) const;
  std::vector<int> valence_label_ids() const;
  std::vector<int> carrier_label_ids() const;
  /// Inverse of the two label mappings; nullopt for non-label ids.
  std::optional<Valence> valence_of_label(int id) const;
  std::optional<Carrier> carrier_of_label(int id) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  friend bool operator==(const Vocabulary& a, const Vocabulary& b) { return a.tokens_ == b.tokens_; }

 private:
  void index();

  std::vector<std::string> tokens_;
  std::unordered_map<std::string, int> ids_;
  int pad_ = 0, unk_ = 0, cls_ = 0, sep_ = 0, val_sep_ = 0, cand_sep_ = 0, ec_pred_sep_ = 0;
  int valence_labels_[3] = {0, 0, 0};
  int carrier_labels_[2] = {0, 0};
};

// ---------------------------------------------------------------------------
// Label codecs

int encode_valence_label(std::string_view name);
std::string decode_valence_label(int code);

// ---------------------------------------------------------------------------
// Discriminative inputs

enum class ContextSource { kPredicted, kGroundTruth };

struct ValenceContext {
  Valence valence = Valence::kNeutral;
};

/// Surface texts of the spans labelled as carriers.
struct ECContext {
  std::vector<std::string> spans;
};

/// First-step label handed to the second step of a two-step model.
struct TwoStepContext {
  std::variant<ValenceContext, ECContext> value;
  ContextSource source = ContextSource::kPredicted;
};

/// Raw (case-preserving) whitespace-joined text of a candidate span.
std::string span_surface(const FunctionalUnit& unit, const ECCandidate& candidate);
/// Gold first-step context for a unit.
TwoStepContext gold_valence_context(const FunctionalUnit& unit);
TwoStepContext gold_ec_context(const FunctionalUnit& unit);

struct DiscriminativeExample {
  std::vector<int> input_ids;
  /// Candidate spans as [begin, end) positions into input_ids.
  std::vector<std::pair<std::size_t, std::size_t>> span_slices;
  int valence_target = 0;
  std::vector<int> ec_targets;
};

DiscriminativeExample encode_discriminative(const FunctionalUnit& unit, const Vocabulary& vocab,
                                            const TwoStepContext* context = nullptr);

// ---------------------------------------------------------------------------
// Generative prompts

enum class TaskOrder { kValFirst, kEcFirst };
enum class Task { kValence, kEc };
enum class LossScope { kFullSequence, kTargetsOnly };

struct TargetSlot {
  std::size_t position = 0;
  Task task = Task::kValence;
  /// Token ids the slot may take, in ascending label-code order.
  std::vector<int> allowed;
  int gold = 0;
  /// Index of the EC candidate the slot labels; unused for valence slots.
  std::size_t candidate = 0;
};

struct Segment {
  std::string name;
  std::size_t begin = 0;
  std::size_t end = 0;
};

/// A rendered training sequence. `loss_mask[t]` selects the prediction of
/// token t from the prefix [0, t); position 0 is never a target.
struct PromptSequence {
  std::vector<int> input_ids;
  std::vector<std::uint8_t> loss_mask;
  std::vector<TargetSlot> target_slots;
  /// Consecutive named segments covering the whole sequence.
  std::vector<Segment> segment_spans;
  /// Token positions of each candidate's text (without its separator).
  std::vector<std::pair<std::size_t, std::size_t>> candidate_spans;

  /// Length of the context that precedes the first forced separator.
  std::size_t prefix_length() const;
  const Segment* segment(std::string_view name) const;
};

PromptSequence render_prompt_valence(const FunctionalUnit& unit, const Vocabulary& vocab,
                                     LossScope scope = LossScope::kFullSequence);
PromptSequence render_prompt_ec(const FunctionalUnit& unit, const Vocabulary& vocab,
                                LossScope scope = LossScope::kFullSequence);
PromptSequence render_prompt_two_step(const FunctionalUnit& unit, const Vocabulary& vocab, TaskOrder order,
                                      LossScope scope = LossScope::kFullSequence);

}  // namespace mtlaffect
