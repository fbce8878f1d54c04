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
#include <set>
#include <filesystem>

#include "doctest.h"
#include "fixtures.hpp"
#include "mtlaffect/encodings.hpp"
#include "mtlaffect/error.hpp"

using namespace mtlaffect;
using mtlaffect::testing::eight_units;
using mtlaffect::testing::make_unit;

namespace {

std::vector<Task> slot_tasks(const PromptSequence& p) {
  std::vector<Task> out;
  for (const auto& s : p.target_slots) out.push_back(s.task);
  return out;
}

std::size_t count_id(const std::vector<int>& ids, int id) {
  return static_cast<std::size_t>(std::count(ids.begin(), ids.end(), id));
}

std::string detok(const Vocabulary& v, const std::vector<int>& ids, std::size_t b, std::size_t e) {
  return v.detokenize(std::span<const int>(ids).subspan(b, e - b));
}

}  // namespace

TEST_CASE("valence label codec is a fixed bijection") {
  CHECK(encode_valence_label("negative") == 0);
  CHECK(encode_valence_label("positive") == 1);
  CHECK(encode_valence_label("neutral") == 2);
  for (const char* name : {"negative", "positive", "neutral"}) CHECK(decode_valence_label(encode_valence_label(name)) == name);
  CHECK_THROWS(decode_valence_label(3));
  CHECK_THROWS(decode_valence_label(-1));
}

TEST_CASE("vocabulary reserves specials with bit-exact surfaces and persists") {
  const Vocabulary v = Vocabulary::build(eight_units());
  CHECK(v.token(v.val_sep()) == "<val>");
  CHECK(v.token(v.cand_sep()) == "<cand>");
  CHECK(v.token(v.ec_pred_sep()) == "<EC_pred>");
  std::set<int> specials = {v.pad(), v.unk(), v.cls(), v.sep(), v.val_sep(), v.cand_sep(), v.ec_pred_sep()};
  CHECK(specials.size() == 7);
  for (int id : v.valence_label_ids()) CHECK(v.valence_of_label(id).has_value());
  CHECK(v.token(v.valence_label_id(Valence::kNeutral)) == "2");
  CHECK(v.token(v.carrier_label_id(Carrier::kYes)) == "y");
  CHECK(v.id("never-seen") == v.unk());
  for (std::size_t i = 0; i < v.size(); ++i) CHECK(v.id(v.token(static_cast<int>(i))) == static_cast<int>(i));

  const auto path = std::filesystem::temp_directory_path() / "mtlaffect_vocab_test.txt";
  v.save(path);
  CHECK(Vocabulary::load(path) == v);
  std::filesystem::remove(path);
}

TEST_CASE("discriminative encoding layouts") {
  const auto u = make_unit("u", "w1 w2", Valence::kPositive, {{1, 2, Carrier::kYes}});
  const Vocabulary v = Vocabulary::build({u});

  const DiscriminativeExample plain = encode_discriminative(u, v);
  CHECK(plain.input_ids == std::vector<int>{v.cls(), v.id("w1"), v.id("w2"), v.sep()});
  CHECK(plain.valence_target == 1);
  CHECK(plain.ec_targets == std::vector<int>{1});

  const TwoStepContext val{ValenceContext{Valence::kPositive}, ContextSource::kPredicted};
  const DiscriminativeExample with_val = encode_discriminative(u, v, &val);
  CHECK(v.detokenize(with_val.input_ids) == "[CLS] w1 w2 valence: 1 [SEP]");

  const TwoStepContext empty{ECContext{}, ContextSource::kPredicted};
  CHECK(v.detokenize(encode_discriminative(u, v, &empty).input_ids) == "[CLS] w1 w2 EC: none [SEP]");

  const TwoStepContext gold = gold_ec_context(u);
  const DiscriminativeExample with_ec = encode_discriminative(u, v, &gold);
  CHECK(v.detokenize(with_ec.input_ids) == "[CLS] w1 w2 EC: w2 [SEP]");
  CHECK(gold.source == ContextSource::kGroundTruth);

  FunctionalUnit none = u;
  none.tokens.clear();
  none.candidates.clear();
  CHECK_THROWS_AS(encode_discriminative(none, v), ValidationError);
}

TEST_CASE("context never moves candidate spans") {
  const Vocabulary v = Vocabulary::build(eight_units());
  for (const auto& u : eight_units()) {
    const auto plain = encode_discriminative(u, v);
    const TwoStepContext contexts[] = {gold_valence_context(u), gold_ec_context(u)};
    for (const auto& ctx : contexts) {
      const auto ex = encode_discriminative(u, v, &ctx);
      REQUIRE(ex.span_slices.size() == plain.span_slices.size());
      for (std::size_t k = 0; k < ex.span_slices.size(); ++k) {
        const auto [b, e] = ex.span_slices[k];
        CHECK(e <= ex.input_ids.size() - 1);
        CHECK(detok(v, ex.input_ids, b, e) == span_surface(u, u.candidates[k]));
        CHECK(detok(v, ex.input_ids, b, e) == detok(v, plain.input_ids, plain.span_slices[k].first, plain.span_slices[k].second));
      }
    }
  }
}

TEST_CASE("valence prompt layout") {
  const auto u = make_unit("u", "a b c", Valence::kNegative);
  const Vocabulary v = Vocabulary::build({u});
  const PromptSequence p = render_prompt_valence(u, v);
  CHECK(p.input_ids.size() == 5);
  CHECK(p.input_ids[3] == v.val_sep());
  REQUIRE(p.target_slots.size() == 1);
  CHECK(p.target_slots[0].allowed == std::vector<int>{v.id("0"), v.id("1"), v.id("2")});
  CHECK(p.target_slots[0].gold == v.id("0"));
  const Segment* fu = p.segment("fu");
  REQUIRE(fu != nullptr);
  CHECK(std::vector<int>(p.input_ids.begin() + static_cast<long>(fu->begin), p.input_ids.begin() + static_cast<long>(fu->end)) ==
        std::vector<int>{v.id("a"), v.id("b"), v.id("c")});
  CHECK(p.loss_mask[0] == 0);
  CHECK(std::count(p.loss_mask.begin(), p.loss_mask.end(), 1) == 4);
  CHECK(p.prefix_length() == 3);

  const PromptSequence t = render_prompt_valence(u, v, LossScope::kTargetsOnly);
  CHECK(std::count(t.loss_mask.begin(), t.loss_mask.end(), 1) == 1);
  CHECK(t.loss_mask[4] == 1);
}

TEST_CASE("EC prompt layout") {
  const auto u = make_unit("u", "we won the big match", Valence::kPositive, {{1, 2, Carrier::kYes}, {3, 5, Carrier::kNo}});
  const Vocabulary v = Vocabulary::build({u});
  const PromptSequence p = render_prompt_ec(u, v);
  CHECK(count_id(p.input_ids, v.cand_sep()) == 2);
  CHECK(count_id(p.input_ids, v.ec_pred_sep()) == 2);
  REQUIRE(p.target_slots.size() == 2);
  for (const auto& s : p.target_slots) {
    CHECK(s.allowed == std::vector<int>{v.id("n"), v.id("y")});
    CHECK(p.input_ids[s.position - 1] == v.ec_pred_sep());
  }
  CHECK(p.target_slots[0].gold == v.id("y"));
  CHECK(p.target_slots[1].gold == v.id("n"));
  REQUIRE(p.candidate_spans.size() == 2);
  CHECK(detok(v, p.input_ids, p.candidate_spans[0].first, p.candidate_spans[0].second) == "won");
  CHECK(detok(v, p.input_ids, p.candidate_spans[1].first, p.candidate_spans[1].second) == "big match");

  const auto bare = make_unit("x", "a b", Valence::kNeutral);
  CHECK_THROWS_AS(render_prompt_ec(bare, v), RenderError);
  CHECK_THROWS_AS(render_prompt_two_step(bare, v, TaskOrder::kValFirst), RenderError);
}

TEST_CASE("two-step prompt orders") {
  const auto two = make_unit("u", "we won the big match", Valence::kPositive, {{1, 2, Carrier::kYes}, {3, 5, Carrier::kNo}});
  const auto one = make_unit("v", "a sad day", Valence::kNegative, {{1, 2, Carrier::kYes}});
  const Vocabulary v = Vocabulary::build({two, one});

  const auto vf = render_prompt_two_step(two, v, TaskOrder::kValFirst);
  CHECK(slot_tasks(vf) == std::vector<Task>{Task::kValence, Task::kEc, Task::kEc});
  const auto ef = render_prompt_two_step(one, v, TaskOrder::kEcFirst);
  CHECK(slot_tasks(ef) == std::vector<Task>{Task::kEc, Task::kValence});

  for (const auto& u : eight_units()) {
    if (u.candidates.empty()) continue;
    for (TaskOrder o : {TaskOrder::kValFirst, TaskOrder::kEcFirst}) {
      const auto p = render_prompt_two_step(u, Vocabulary::build(eight_units()), o);
      CHECK(p.target_slots.size() == 1 + u.candidates.size());
    }
  }
}

TEST_CASE("segments cover the prompt and reproduce the unit") {
  const Vocabulary v = Vocabulary::build(eight_units());
  for (const auto& u : eight_units()) {
    if (u.candidates.empty()) continue;
    const auto p = render_prompt_two_step(u, v, TaskOrder::kEcFirst);
    std::size_t cursor = 0;
    for (const auto& s : p.segment_spans) {
      CHECK(s.begin == cursor);
      cursor = s.end;
    }
    CHECK(cursor == p.input_ids.size());
    const Segment* fu = p.segment("fu");
    std::string joined;
    for (const auto& t : u.tokens) joined += (joined.empty() ? "" : " ") + t;
    CHECK(detok(v, p.input_ids, fu->begin, fu->end) == joined);
  }
}
