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

#include "mtlaffect/backbone.hpp"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "mtlaffect/error.hpp"

namespace mtlaffect {

void validate_config(const TransformerConfig& c) {
  if (c.vocab_size == 0) throw SpecError("vocab_size", "must be positive");
  if (c.hidden_dim == 0) throw SpecError("hidden_dim", "must be positive");
  if (c.n_layers == 0) throw SpecError("n_layers", "must be positive");
  if (c.n_heads == 0 || c.hidden_dim % c.n_heads != 0) {
    throw SpecError("n_heads", "hidden_dim must be divisible by n_heads");
  }
  if (c.max_seq_len == 0) throw SpecError("max_seq_len", "must be positive");
  if (c.ffn_multiplier == 0) throw SpecError("ffn_multiplier", "must be positive");
  if (!(c.dropout_rate >= 0.0 && c.dropout_rate < 1.0)) throw SpecError("dropout_rate", "must lie in [0, 1)");
}

TokenBatch TokenBatch::pad(const std::vector<std::vector<int>>& sequences, int pad_id) {
  std::size_t longest = 0;
  for (const auto& s : sequences) longest = std::max(longest, s.size());
  TokenBatch b;
  for (const auto& s : sequences) {
    std::vector<int> ids(s);
    std::vector<std::uint8_t> mask(s.size(), 1);
    ids.resize(longest, pad_id);
    mask.resize(longest, 0);
    b.ids.push_back(std::move(ids));
    b.mask.push_back(std::move(mask));
  }
  return b;
}

namespace {

ag::Matrix gaussian(Rng& rng, std::size_t rows, std::size_t cols, double stddev) {
  ag::Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

ag::Matrix zeros(std::size_t rows, std::size_t cols) {
  return ag::Matrix::Zero(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

ag::Matrix ones(std::size_t rows, std::size_t cols) {
  return ag::Matrix::Ones(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
}

}  // namespace

std::size_t TransformerStack::add(std::string name, ag::Matrix value) {
  params_.emplace_back(std::move(name), std::move(value));
  return params_.size() - 1;
}

TransformerStack::TransformerStack(const TransformerConfig& config, bool causal, bool lm_head)
    : config_(config), causal_(causal), lm_head_(lm_head) {
  validate_config(config);
  Rng rng(Rng::mix(config.seed ^ (causal ? 0xdec0deULL : 0xe2c0deULL)));
  const std::size_t H = config.hidden_dim;
  const std::size_t F = config.ffn_multiplier * H;
  const double in_std = 1.0 / std::sqrt(static_cast<double>(H));
  const double residual_std = in_std / std::sqrt(2.0 * static_cast<double>(config.n_layers));

  tok_emb_ = add("embed.token", gaussian(rng, config.vocab_size, H, 0.1));
  pos_emb_ = add("embed.position", gaussian(rng, config.max_seq_len, H, 0.1));
  for (std::size_t l = 0; l < config.n_layers; ++l) {
    const std::string p = "layer" + std::to_string(l) + ".";
    Layer layer{};
    layer.ln1_g = add(p + "ln1.gamma", ones(1, H));
    layer.ln1_b = add(p + "ln1.beta", zeros(1, H));
    layer.wq = add(p + "attn.wq", gaussian(rng, H, H, in_std));
    layer.bq = add(p + "attn.bq", zeros(1, H));
    layer.wk = add(p + "attn.wk", gaussian(rng, H, H, in_std));
    layer.bk = add(p + "attn.bk", zeros(1, H));
    layer.wv = add(p + "attn.wv", gaussian(rng, H, H, in_std));
    layer.bv = add(p + "attn.bv", zeros(1, H));
    layer.wo = add(p + "attn.wo", gaussian(rng, H, H, residual_std));
    layer.bo = add(p + "attn.bo", zeros(1, H));
    layer.ln2_g = add(p + "ln2.gamma", ones(1, H));
    layer.ln2_b = add(p + "ln2.beta", zeros(1, H));
    layer.w1 = add(p + "ffn.w1", gaussian(rng, H, F, in_std));
    layer.b1 = add(p + "ffn.b1", zeros(1, F));
    layer.w2 = add(p + "ffn.w2", gaussian(rng, F, H, 1.0 / std::sqrt(static_cast<double>(F)) /
                                                         std::sqrt(2.0 * static_cast<double>(config.n_layers))));
    layer.b2 = add(p + "ffn.b2", zeros(1, H));
    layers_.push_back(layer);
  }
  lnf_g_ = add("final_ln.gamma", ones(1, H));
  lnf_b_ = add("final_ln.beta", zeros(1, H));
  if (lm_head) {
    head_w_ = add("lm_head.weight", gaussian(rng, H, config.vocab_size, in_std));
    head_b_ = add("lm_head.bias", zeros(1, config.vocab_size));
  }
}

std::size_t TransformerStack::parameter_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += static_cast<std::size_t>(p.value.size());
  return n;
}

ag::Var TransformerStack::bind(ag::Tape& tape, std::size_t index) const { return tape.param(params_[index]); }

ag::Var TransformerStack::hidden(ag::Tape& tape, std::span<const int> ids, std::span<const std::uint8_t> mask,
                                 Rng* dropout_rng) const {
  if (ids.empty()) throw std::invalid_argument("empty sequence");
  if (ids.size() > config_.max_seq_len) {
    throw std::length_error("sequence of " + std::to_string(ids.size()) + " tokens exceeds max_seq_len " +
                            std::to_string(config_.max_seq_len));
  }
  if (mask.size() != ids.size()) throw std::invalid_argument("mask length differs from sequence length");
  for (int id : ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= config_.vocab_size) {
      throw std::out_of_range("token id " + std::to_string(id) + " outside vocabulary");
    }
  }
  const double rate = dropout_rng != nullptr ? config_.dropout_rate : 0.0;
  std::vector<int> positions(ids.size());
  for (std::size_t i = 0; i < positions.size(); ++i) positions[i] = static_cast<int>(i);

  ag::Var x = ag::add(tape, ag::gather_rows(tape, bind(tape, tok_emb_), ids),
                      ag::gather_rows(tape, bind(tape, pos_emb_), positions));
  if (rate > 0) x = ag::dropout(tape, x, rate, *dropout_rng);
  for (const Layer& L : layers_) {
    ag::Var h = ag::layer_norm(tape, x, bind(tape, L.ln1_g), bind(tape, L.ln1_b));
    ag::Var q = ag::linear(tape, h, bind(tape, L.wq), bind(tape, L.bq));
    ag::Var k = ag::linear(tape, h, bind(tape, L.wk), bind(tape, L.bk));
    ag::Var v = ag::linear(tape, h, bind(tape, L.wv), bind(tape, L.bv));
    ag::Var a = ag::attention(tape, q, k, v, config_.n_heads, causal_, mask);
    ag::Var o = ag::linear(tape, a, bind(tape, L.wo), bind(tape, L.bo));
    if (rate > 0) o = ag::dropout(tape, o, rate, *dropout_rng);
    x = ag::add(tape, x, o);
    ag::Var h2 = ag::layer_norm(tape, x, bind(tape, L.ln2_g), bind(tape, L.ln2_b));
    ag::Var f = ag::gelu(tape, ag::linear(tape, h2, bind(tape, L.w1), bind(tape, L.b1)));
    f = ag::linear(tape, f, bind(tape, L.w2), bind(tape, L.b2));
    if (rate > 0) f = ag::dropout(tape, f, rate, *dropout_rng);
    x = ag::add(tape, x, f);
  }
  return ag::layer_norm(tape, x, bind(tape, lnf_g_), bind(tape, lnf_b_));
}

ag::Var TransformerStack::project(ag::Tape& tape, ag::Var hidden) const {
  if (!lm_head_) throw std::logic_error("stack has no language-model head");
  return ag::linear(tape, hidden, bind(tape, head_w_), bind(tape, head_b_));
}

HiddenStates Encoder::forward(ag::Tape& tape, const TokenBatch& batch, Rng* dropout_rng) const {
  HiddenStates out;
  out.mask = batch.mask;
  out.states.reserve(batch.batch_size());
  for (std::size_t b = 0; b < batch.batch_size(); ++b) {
    // Trailing padding never influences real positions, so it is not computed.
    std::size_t len = batch.mask[b].size();
    while (len > 1 && batch.mask[b][len - 1] == 0) --len;
    out.states.push_back(stack_.hidden(tape, std::span<const int>(batch.ids[b]).first(len),
                                       std::span<const std::uint8_t>(batch.mask[b]).first(len), dropout_rng));
  }
  return out;
}

std::vector<ag::Var> Decoder::forward(ag::Tape& tape, const TokenBatch& batch, Rng* dropout_rng) const {
  std::vector<ag::Var> out;
  out.reserve(batch.batch_size());
  for (std::size_t b = 0; b < batch.batch_size(); ++b) {
    out.push_back(stack_.project(tape, stack_.hidden(tape, batch.ids[b], batch.mask[b], dropout_rng)));
  }
  return out;
}

ag::Var Decoder::logits(ag::Tape& tape, std::span<const int> ids, Rng* dropout_rng) const {
  std::vector<std::uint8_t> mask(ids.size(), 1);
  return stack_.project(tape, stack_.hidden(tape, ids, mask, dropout_rng));
}

Eigen::RowVectorXd Decoder::next_token_logits(std::span<const int> ids) const {
  ag::Tape tape(/*grad_enabled=*/false);
  std::vector<std::uint8_t> mask(ids.size(), 1);
  ag::Var h = stack_.hidden(tape, ids, mask, nullptr);
  ag::Var last = ag::slice_rows(tape, h, ids.size() - 1, 1);
  return tape.value(stack_.project(tape, last)).row(0);
}

Encoder init_encoder(const EncoderConfig& config) { return Encoder(config); }
Decoder init_decoder(const DecoderConfig& config) { return Decoder(config); }

std::uint64_t parameter_hash(const std::vector<ag::Parameter>& params) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  auto feed = [&h](const void* data, std::size_t n) {
    const auto* bytes = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  };
  for (const auto& p : params) {
    feed(p.name.data(), p.name.size());
    feed(p.value.data(), static_cast<std::size_t>(p.value.size()) * sizeof(double));
  }
  return h;
}

}  // namespace mtlaffect
