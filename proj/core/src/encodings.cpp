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

#include "mtlaffect/encodings.hpp"

#include <sstream>
#include <stdexcept>

#include "mtlaffect/error.hpp"

namespace mtlaffect {

int encode_valence_label(std::string_view name) { return static_cast<int>(parse_valence(name)); }

std::string decode_valence_label(int code) {
  if (code < 0 || code > 2) throw std::invalid_argument("valence code " + std::to_string(code) + " out of range");
  return std::string(valence_name(static_cast<Valence>(code)));
}

std::string span_surface(const FunctionalUnit& unit, const ECCandidate& candidate) {
  std::string out;
  for (std::size_t i = candidate.start; i < candidate.end; ++i) {
    if (i > candidate.start) out.push_back(' ');
    out += unit.tokens.at(i);
  }
  return out;
}

TwoStepContext gold_valence_context(const FunctionalUnit& unit) {
  return TwoStepContext{ValenceContext{unit.valence}, ContextSource::kGroundTruth};
}

TwoStepContext gold_ec_context(const FunctionalUnit& unit) {
  ECContext ec;
  for (const auto& c : unit.candidates) {
    if (c.carrier == Carrier::kYes) ec.spans.push_back(span_surface(unit, c));
  }
  return TwoStepContext{std::move(ec), ContextSource::kGroundTruth};
}

namespace {

void append_words(std::vector<int>& ids, const Vocabulary& vocab, const std::string& text) {
  std::istringstream in(text);
  std::string word;
  while (in >> word) ids.push_back(vocab.id(word));
}

struct PromptBuilder {
  const FunctionalUnit& unit;
  const Vocabulary& vocab;
  PromptSequence prompt;

  void open(const char* name) { prompt.segment_spans.push_back(Segment{name, prompt.input_ids.size(), 0}); }
  void close() { prompt.segment_spans.back().end = prompt.input_ids.size(); }

  void add_fu() {
    open("fu");
    for (const auto& t : unit.tokens) prompt.input_ids.push_back(vocab.id(t));
    close();
  }

  void add_candidates() {
    open("candidates");
    for (const auto& c : unit.candidates) {
      prompt.input_ids.push_back(vocab.cand_sep());
      const std::size_t begin = prompt.input_ids.size();
      for (std::size_t i = c.start; i < c.end; ++i) prompt.input_ids.push_back(vocab.id(unit.tokens[i]));
      prompt.candidate_spans.emplace_back(begin, prompt.input_ids.size());
    }
    close();
  }

  void add_valence_block() {
    open("valence");
    prompt.input_ids.push_back(vocab.val_sep());
    TargetSlot slot;
    slot.position = prompt.input_ids.size();
    slot.task = Task::kValence;
    slot.allowed = vocab.valence_label_ids();
    slot.gold = vocab.valence_label_id(unit.valence);
    prompt.input_ids.push_back(slot.gold);
    prompt.target_slots.push_back(std::move(slot));
    close();
  }

  void add_ec_block() {
    open("ec");
    for (std::size_t k = 0; k < unit.candidates.size(); ++k) {
      prompt.input_ids.push_back(vocab.ec_pred_sep());
      TargetSlot slot;
      slot.position = prompt.input_ids.size();
      slot.task = Task::kEc;
      slot.allowed = vocab.carrier_label_ids();
      slot.gold = vocab.carrier_label_id(unit.candidates[k].carrier);
      slot.candidate = k;
      prompt.input_ids.push_back(slot.gold);
      prompt.target_slots.push_back(std::move(slot));
    }
    close();
  }

  PromptSequence finish(LossScope scope) {
    prompt.loss_mask.assign(prompt.input_ids.size(), 0);
    if (scope == LossScope::kFullSequence) {
      for (std::size_t t = 1; t < prompt.loss_mask.size(); ++t) prompt.loss_mask[t] = 1;
    } else {
      for (const auto& s : prompt.target_slots) prompt.loss_mask[s.position] = 1;
    }
    return std::move(prompt);
  }
};

void require_valid(const FunctionalUnit& unit) { validate_unit(unit); }

void require_candidates(const FunctionalUnit& unit, const char* what) {
  if (unit.candidates.empty()) {
    throw RenderError(std::string(what) + " prompt needs at least one candidate (unit '" + unit.unit_id + "')");
  }
}

}  // namespace

DiscriminativeExample encode_discriminative(const FunctionalUnit& unit, const Vocabulary& vocab,
                                            const TwoStepContext* context) {
  if (unit.tokens.empty()) throw ValidationError(unit.unit_id, "tokens must be non-empty");
  DiscriminativeExample ex;
  ex.input_ids.reserve(unit.tokens.size() + 8);
  ex.input_ids.push_back(vocab.cls());
  for (const auto& t : unit.tokens) ex.input_ids.push_back(vocab.id(t));
  if (context != nullptr) {
    if (const auto* val = std::get_if<ValenceContext>(&context->value)) {
      ex.input_ids.push_back(vocab.id(tokens::kValenceContext));
      ex.input_ids.push_back(vocab.valence_label_id(val->valence));
    } else {
      const auto& ec = std::get<ECContext>(context->value);
      ex.input_ids.push_back(vocab.id(tokens::kEcContext));
      if (ec.spans.empty()) {
        ex.input_ids.push_back(vocab.id(tokens::kNone));
      } else {
        for (const auto& span : ec.spans) append_words(ex.input_ids, vocab, span);
      }
    }
  }
  ex.input_ids.push_back(vocab.sep());
  for (const auto& c : unit.candidates) {
    ex.span_slices.emplace_back(c.start + 1, c.end + 1);
    ex.ec_targets.push_back(static_cast<int>(c.carrier));
  }
  ex.valence_target = static_cast<int>(unit.valence);
  return ex;
}

std::size_t PromptSequence::prefix_length() const {
  return target_slots.empty() ? input_ids.size() : target_slots.front().position - 1;
}

const Segment* PromptSequence::segment(std::string_view name) const {
  for (const auto& s : segment_spans) {
    if (s.name == name) return &s;
  }
  return nullptr;
}

PromptSequence render_prompt_valence(const FunctionalUnit& unit, const Vocabulary& vocab, LossScope scope) {
  require_valid(unit);
  PromptBuilder b{unit, vocab, {}};
  b.add_fu();
  b.add_valence_block();
  return b.finish(scope);
}

PromptSequence render_prompt_ec(const FunctionalUnit& unit, const Vocabulary& vocab, LossScope scope) {
  require_valid(unit);
  require_candidates(unit, "EC");
  PromptBuilder b{unit, vocab, {}};
  b.add_fu();
  b.add_candidates();
  b.add_ec_block();
  return b.finish(scope);
}

PromptSequence render_prompt_two_step(const FunctionalUnit& unit, const Vocabulary& vocab, TaskOrder order,
                                      LossScope scope) {
  require_valid(unit);
  require_candidates(unit, "two-step");
  PromptBuilder b{unit, vocab, {}};
  b.add_fu();
  b.add_candidates();
  if (order == TaskOrder::kValFirst) {
    b.add_valence_block();
    b.add_ec_block();
  } else {
    b.add_ec_block();
    b.add_valence_block();
  }
  return b.finish(scope);
}

}  // namespace mtlaffect
