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
#include <span>
#include <string>
#include <vector>

#include "mtlaffect/autograd.hpp"
#include "mtlaffect/random.hpp"

namespace mtlaffect {

/// Size of a tiny pre-LN transformer stack.
struct TransformerConfig {
  std::size_t vocab_size = 0;
  std::size_t hidden_dim = 64;
  std::size_t n_layers = 2;
  std::size_t n_heads = 4;
  std::size_t max_seq_len = 128;
  std::size_t ffn_multiplier = 4;
  double dropout_rate = 0.0;
  std::uint64_t seed = 0;

  friend bool operator==(const TransformerConfig&, const TransformerConfig&) = default;
};
using EncoderConfig = TransformerConfig;
using DecoderConfig = TransformerConfig;

/// Throws SpecError naming the offending field.
void validate_config(const TransformerConfig& config);

/// Rectangular batch of token ids; mask 0 marks padding.
struct TokenBatch {
  std::vector<std::vector<int>> ids;
  std::vector<std::vector<std::uint8_t>> mask;

  static TokenBatch pad(const std::vector<std::vector<int>>& sequences, int pad_id);
  std::size_t batch_size() const { return ids.size(); }
  std::size_t seq_len() const { return ids.empty() ? 0 : ids.front().size(); }
};

/// One (len x hidden) node per batch entry, where len drops the entry's
/// trailing padding, plus the batch mask.
struct HiddenStates {
  std::vector<ag::Var> states;
  std::vector<std::vector<std::uint8_t>> mask;
};

/// Shared implementation of the bidirectional encoder and the causal decoder.
class TransformerStack {
 public:
  TransformerStack() = default;
  TransformerStack(const TransformerConfig& config, bool causal, bool lm_head);

  const TransformerConfig& config() const { return config_; }
  bool causal() const { return causal_; }

  std::vector<ag::Parameter>& parameters() { return params_; }
  const std::vector<ag::Parameter>& parameters() const { return params_; }
  std::size_t parameter_count() const;

  /// Final hidden states (len x hidden) of one sequence. `dropout_rng` enables dropout.
  ag::Var hidden(ag::Tape& tape, std::span<const int> ids, std::span<const std::uint8_t> mask,
                 Rng* dropout_rng) const;
  /// Projects hidden states onto the vocabulary (requires an LM head).
  ag::Var project(ag::Tape& tape, ag::Var hidden) const;

 private:
  struct Layer {
    std::size_t ln1_g, ln1_b, wq, bq, wk, bk, wv, bv, wo, bo, ln2_g, ln2_b, w1, b1, w2, b2;
  };

  std::size_t add(std::string name, ag::Matrix value);
  ag::Var bind(ag::Tape& tape, std::size_t index) const;

  TransformerConfig config_;
  bool causal_ = false;
  bool lm_head_ = false;
  // Parameters are owned here and referenced by index so copies stay valid.
  mutable std::vector<ag::Parameter> params_;
  std::size_t tok_emb_ = 0, pos_emb_ = 0, lnf_g_ = 0, lnf_b_ = 0, head_w_ = 0, head_b_ = 0;
  std::vector<Layer> layers_;
};

/// Bidirectional encoder producing per-position hidden states.
class Encoder {
 public:
  Encoder() = default;
  explicit Encoder(const EncoderConfig& config) : stack_(config, /*causal=*/false, /*lm_head=*/false) {}

  const EncoderConfig& config() const { return stack_.config(); }
  TransformerStack& stack() { return stack_; }
  const TransformerStack& stack() const { return stack_; }
  std::size_t parameter_count() const { return stack_.parameter_count(); }

  /// Throws std::length_error when the batch exceeds max_seq_len.
  HiddenStates forward(ag::Tape& tape, const TokenBatch& batch, Rng* dropout_rng = nullptr) const;

 private:
  TransformerStack stack_;
};

/// Causal decoder with a language-model head.
class Decoder {
 public:
  Decoder() = default;
  explicit Decoder(const DecoderConfig& config) : stack_(config, /*causal=*/true, /*lm_head=*/true) {}

  const DecoderConfig& config() const { return stack_.config(); }
  TransformerStack& stack() { return stack_; }
  const TransformerStack& stack() const { return stack_; }
  std::size_t parameter_count() const { return stack_.parameter_count(); }

  /// Next-token logits (seq x vocab) for every sequence in the batch.
  std::vector<ag::Var> forward(ag::Tape& tape, const TokenBatch& batch, Rng* dropout_rng = nullptr) const;
  ag::Var logits(ag::Tape& tape, std::span<const int> ids, Rng* dropout_rng = nullptr) const;
  /// Logits predicting the token after `ids` (eval mode, no gradients).
  Eigen::RowVectorXd next_token_logits(std::span<const int> ids) const;

 private:
  TransformerStack stack_;
};

/// Seeded initialisation; identical seeds give identical parameters.
Encoder init_encoder(const EncoderConfig& config);
Decoder init_decoder(const DecoderConfig& config);

/// Order-sensitive FNV-1a hash of parameter names and values.
std::uint64_t parameter_hash(const std::vector<ag::Parameter>& params);

}  // namespace mtlaffect
