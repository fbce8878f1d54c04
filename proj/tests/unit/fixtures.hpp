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

#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "mtlaffect/backbone.hpp"
#include "mtlaffect/corpus.hpp"
#include "mtlaffect/encodings.hpp"

namespace mtlaffect::testing {

/// Unit from a whitespace-separated sentence and (start, end, carrier) triples.
inline FunctionalUnit make_unit(std::string id, const std::string& text, Valence valence,
                                std::vector<std::tuple<std::size_t, std::size_t, Carrier>> spans = {}) {
  FunctionalUnit u;
  u.unit_id = std::move(id);
  u.narrative_id = "n0";
  std::istringstream in(text);
  for (std::string t; in >> t;) u.tokens.push_back(t);
  u.valence = valence;
  for (auto [s, e, c] : spans) u.candidates.push_back({s, e, c});
  return u;
}

/// Eight units covering every valence and both carrier labels.
inline std::vector<FunctionalUnit> eight_units() {
  using C = Carrier;
  using V = Valence;
  return {
      make_unit("u0", "i lost my dog today", V::kNegative, {{1, 2, C::kYes}, {3, 4, C::kNo}}),
      make_unit("u1", "we won the final match", V::kPositive, {{1, 2, C::kYes}, {3, 5, C::kNo}}),
      make_unit("u2", "the bus was late", V::kNeutral, {{0, 2, C::kNo}}),
      make_unit("u3", "my exam went badly", V::kNegative, {{1, 2, C::kNo}, {3, 4, C::kYes}}),
      make_unit("u4", "a gift from my sister", V::kPositive, {{1, 2, C::kYes}, {4, 5, C::kNo}}),
      make_unit("u5", "then we walked home", V::kNeutral, {{2, 3, C::kNo}, {3, 4, C::kNo}}),
      make_unit("u6", "the funeral was sad", V::kNegative, {{1, 2, C::kYes}}),
      make_unit("u7", "it was sunny", V::kNeutral),
  };
}

inline TransformerConfig tiny_config(std::size_t vocab_size, std::uint64_t seed = 7) {
  TransformerConfig c;
  c.vocab_size = vocab_size;
  c.hidden_dim = 8;
  c.n_layers = 1;
  c.n_heads = 2;
  c.max_seq_len = 48;
  c.seed = seed;
  return c;
}

}  // namespace mtlaffect::testing
