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

#include "mtlaffect/corpus.hpp"

namespace mtlaffect {

std::vector<TokenSpan> RunChunker::extract(const std::vector<std::string>& tokens) const {
  std::vector<TokenSpan> spans;
  std::size_t i = 0;
  while (i < tokens.size()) {
    const ChunkTag tag = tag_(tokens[i]);
    if (tag == ChunkTag::kFiller) {
      ++i;
      continue;
    }
    std::size_t j = i + 1;
    while (j < tokens.size() && tag_(tokens[j]) == tag) ++j;
    spans.emplace_back(i, j);
    i = j;
  }
  return spans;
}

std::vector<TokenSpan> extract_candidates(const std::vector<std::string>& tokens,
                                          const CandidateExtractor& chunker) {
  return chunker.extract(tokens);
}

}  // namespace mtlaffect
