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

#include <fstream>
#include <sstream>
#include <stdexcept>

#include "mtlaffect/encodings.hpp"
#include "mtlaffect/error.hpp"

namespace mtlaffect {

namespace {

const std::vector<std::string>& reserved_tokens() {
  static const std::vector<std::string> kReserved = {
      std::string(tokens::kPad),    std::string(tokens::kUnk),          std::string(tokens::kCls),
      std::string(tokens::kSep),    std::string(tokens::kValSep),       std::string(tokens::kCandSep),
      std::string(tokens::kEcPredSep), "0", "1", "2", std::string(tokens::kYes), std::string(tokens::kNo),
      std::string(tokens::kValenceContext), std::string(tokens::kEcContext), std::string(tokens::kNone)};
  return kReserved;
}

}  // namespace

Vocabulary Vocabulary::build(const std::vector<FunctionalUnit>& units) {
  std::vector<std::string> list = reserved_tokens();
  std::unordered_map<std::string, int> seen;
  for (std::size_t i = 0; i < list.size(); ++i) seen.emplace(list[i], static_cast<int>(i));
  for (const auto& u : units) {
    for (const auto& t : u.tokens) {
      if (seen.emplace(t, static_cast<int>(list.size())).second) list.push_back(t);
    }
  }
  return from_tokens(std::move(list));
}

Vocabulary Vocabulary::from_tokens(std::vector<std::string> tokens) {
  Vocabulary v;
  v.tokens_ = std::move(tokens);
  v.index();
  return v;
}

void Vocabulary::index() {
  ids_.clear();
  for (std::size_t i = 0; i < tokens_.size(); ++i) {
    if (tokens_[i].empty() || tokens_[i].find_first_of(" \t\n\r") != std::string::npos) {
      throw ParseError(i + 1, "vocabulary tokens must be non-empty and contain no whitespace");
    }
    if (!ids_.emplace(tokens_[i], static_cast<int>(i)).second) {
      throw ParseError(i + 1, "duplicate vocabulary token '" + tokens_[i] + "'");
    }
  }
  auto require = [&](std::string_view t) {
    auto it = ids_.find(std::string(t));
    if (it == ids_.end()) throw ParseError(0, "vocabulary lacks reserved token '" + std::string(t) + "'");
    return it->second;
  };
  pad_ = require(tokens::kPad);
  unk_ = require(tokens::kUnk);
  cls_ = require(tokens::kCls);
  sep_ = require(tokens::kSep);
  val_sep_ = require(tokens::kValSep);
  cand_sep_ = require(tokens::kCandSep);
  ec_pred_sep_ = require(tokens::kEcPredSep);
  valence_labels_[0] = require("0");
  valence_labels_[1] = require("1");
  valence_labels_[2] = require("2");
  carrier_labels_[static_cast<int>(Carrier::kNo)] = require(tokens::kNo);
  carrier_labels_[static_cast<int>(Carrier::kYes)] = require(tokens::kYes);
  require(tokens::kValenceContext);
  require(tokens::kEcContext);
  require(tokens::kNone);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open vocabulary '" + path.string() + "'");
  std::vector<std::string> list;
  std::string line;
  while (std::getline(in, line)) list.push_back(line);
  return from_tokens(std::move(list));
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write vocabulary '" + path.string() + "'");
  for (const auto& t : tokens_) out << t << '\n';
}

int Vocabulary::id(std::string_view token) const { return find(token).value_or(unk_); }

std::optional<int> Vocabulary::find(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  if (it == ids_.end()) return std::nullopt;
  return it->second;
}

const std::string& Vocabulary::token(int id) const {
  if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
    throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
  }
  return tokens_[static_cast<std::size_t>(id)];
}

std::string Vocabulary::detokenize(std::span<const int> ids) const {
  std::string out;
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (i > 0) out.push_back(' ');
    out += token(ids[i]);
  }
  return out;
}

int Vocabulary::valence_label_id(Valence v) const { return valence_labels_[static_cast<int>(v)]; }
int Vocabulary::carrier_label_id(Carrier c) const { return carrier_labels_[static_cast<int>(c)]; }

std::vector<int> Vocabulary::valence_label_ids() const {
  return {valence_labels_[0], valence_labels_[1], valence_labels_[2]};
}

std::vector<int> Vocabulary::carrier_label_ids() const { return {carrier_labels_[0], carrier_labels_[1]}; }

std::optional<Valence> Vocabulary::valence_of_label(int id) const {
  for (int c = 0; c < 3; ++c) {
    if (valence_labels_[c] == id) return static_cast<Valence>(c);
  }
  return std::nullopt;
}

std::optional<Carrier> Vocabulary::carrier_of_label(int id) const {
  for (int c = 0; c < 2; ++c) {
    if (carrier_labels_[c] == id) return static_cast<Carrier>(c);
  }
  return std::nullopt;
}

}  // namespace mtlaffect
