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

#include "mtlaffect/discriminative.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "mtlaffect/error.hpp"

namespace mtlaffect {

namespace {

constexpr std::size_t kValW = 0, kValB = 1, kEcW = 2, kEcB = 3;

ag::Matrix gaussian(Rng& rng, Eigen::Index rows, Eigen::Index cols, double stddev) {
  ag::Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = rng.normal(0.0, stddev);
  return m;
}

std::vector<ag::Parameter*> pointers(std::vector<ag::Parameter>& params) {
  std::vector<ag::Parameter*> out;
  out.reserve(params.size());
  for (auto& p : params) out.push_back(&p);
  return out;
}

TokenBatch to_batch(std::span<const DiscriminativeExample> batch, int pad_id) {
  std::vector<std::vector<int>> seqs;
  seqs.reserve(batch.size());
  for (const auto& ex : batch) seqs.push_back(ex.input_ids);
  return TokenBatch::pad(seqs, pad_id);
}

std::size_t candidate_total(std::span<const DiscriminativeExample> batch) {
  std::size_t n = 0;
  for (const auto& ex : batch) n += ex.span_slices.size();
  return n;
}

ag::Var mean_ce(ag::Tape& tape, ag::Var logits, const std::vector<int>& targets) {
  return ag::scale(tape, ag::cross_entropy_sum(tape, logits, targets), 1.0 / static_cast<double>(targets.size()));
}

std::vector<int> valence_targets(std::span<const DiscriminativeExample> batch) {
  std::vector<int> t;
  for (const auto& ex : batch) t.push_back(ex.valence_target);
  return t;
}

std::vector<int> ec_targets(std::span<const DiscriminativeExample> batch) {
  std::vector<int> t;
  for (const auto& ex : batch) t.insert(t.end(), ex.ec_targets.begin(), ex.ec_targets.end());
  return t;
}

void check_lambda(double lambda) {
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw SpecError("lambda", "must lie in [0, 1]");
}

// Both terms of a multi-task loss; a missing term counts as zero.
ag::Var combine(ag::Tape& tape, double lambda, LossAggregation aggregation, ag::Var lv, ag::Var le) {
  check_lambda(lambda);
  const double wv = aggregation == LossAggregation::kSum ? 1.0 : lambda;
  const double we = aggregation == LossAggregation::kSum ? 1.0 : 1.0 - lambda;
  std::vector<ag::Var> terms;
  std::vector<double> weights;
  if (lv.valid()) {
    terms.push_back(lv);
    weights.push_back(wv);
  }
  if (le.valid()) {
    terms.push_back(le);
    weights.push_back(we);
  }
  if (terms.empty()) throw std::invalid_argument("no loss term to combine");
  return ag::weighted_sum(tape, terms, weights);
}

}  // namespace

int argmax(const Eigen::Ref<const Eigen::RowVectorXd>& row) {
  int best = 0;
  for (Eigen::Index i = 1; i < row.size(); ++i) {
    if (row(i) > row(best)) best = static_cast<int>(i);
  }
  return best;
}

DiscriminativeModel::DiscriminativeModel(const EncoderConfig& config) : encoder_(config) {
  Rng rng(Rng::mix(config.seed ^ 0x4eadULL));
  const auto H = static_cast<Eigen::Index>(config.hidden_dim);
  const double stddev = 1.0 / std::sqrt(static_cast<double>(H));
  heads_.emplace_back("valence_head.weight", gaussian(rng, H, 3, stddev));
  heads_.emplace_back("valence_head.bias", ag::Matrix::Zero(1, 3));
  heads_.emplace_back("ec_head.weight", gaussian(rng, H, 2, stddev));
  heads_.emplace_back("ec_head.bias", ag::Matrix::Zero(1, 2));
}

std::vector<ag::Parameter*> DiscriminativeModel::parameters() {
  std::vector<ag::Parameter*> out = pointers(encoder_.stack().parameters());
  for (auto* p : pointers(heads_)) out.push_back(p);
  return out;
}

std::vector<ag::Parameter*> DiscriminativeModel::valence_head_parameters() { return {&heads_[kValW], &heads_[kValB]}; }
std::vector<ag::Parameter*> DiscriminativeModel::ec_head_parameters() { return {&heads_[kEcW], &heads_[kEcB]}; }

ag::Var DiscriminativeModel::valence_logits(ag::Tape& tape, const HiddenStates& hidden) const {
  std::vector<ag::Var> cls;
  cls.reserve(hidden.states.size());
  for (ag::Var h : hidden.states) cls.push_back(ag::slice_rows(tape, h, 0, 1));
  ag::Var x = ag::concat_rows(tape, cls);
  return ag::linear(tape, x, tape.param(heads_[kValW]), tape.param(heads_[kValB]));
}

ag::Var DiscriminativeModel::ec_logits(ag::Tape& tape, const HiddenStates& hidden,
                                       std::span<const DiscriminativeExample> examples) const {
  if (examples.size() != hidden.states.size()) throw std::invalid_argument("hidden states do not match the batch");
  std::vector<ag::Var> pooled;
  for (std::size_t b = 0; b < examples.size(); ++b) {
    for (const auto& [begin, end] : examples[b].span_slices) {
      std::vector<std::size_t> rows{0};
      for (std::size_t r = begin; r < end; ++r) rows.push_back(r);
      pooled.push_back(ag::max_pool_rows(tape, hidden.states[b], rows));
    }
  }
  if (pooled.empty()) throw std::invalid_argument("EC head needs at least one candidate in the batch");
  ag::Var x = ag::concat_rows(tape, pooled);
  return ag::linear(tape, x, tape.param(heads_[kEcW]), tape.param(heads_[kEcB]));
}

CheckpointFile DiscriminativeModel::to_checkpoint(const std::string& metadata_json) const {
  CheckpointFile file;
  auto meta = nlohmann::ordered_json::parse(metadata_json);
  meta["model_config"] = nlohmann::ordered_json::parse(transformer_config_json(config()));
  file.metadata = meta.dump();
  file.arrays = export_parameters(encoder_.stack().parameters(), "encoder.");
  for (auto& a : export_parameters(heads_, "")) file.arrays.push_back(std::move(a));
  return file;
}

DiscriminativeModel DiscriminativeModel::from_checkpoint(const CheckpointFile& file) {
  const auto meta = nlohmann::json::parse(file.metadata);
  if (!meta.contains("model_config")) throw ParseError(0, "checkpoint metadata lacks model_config");
  DiscriminativeModel model(transformer_config_from_json(meta["model_config"].dump()));
  import_parameters(model.encoder_.stack().parameters(), file.arrays, "encoder.");
  import_parameters(model.heads_, file.arrays, "");
  return model;
}

double interpolated_loss(double lambda, double loss_valence, double loss_ec) {
  check_lambda(lambda);
  return lambda * loss_valence + (1.0 - lambda) * loss_ec;
}

ag::Var interpolated_loss(ag::Tape& tape, double lambda, ag::Var loss_valence, ag::Var loss_ec) {
  check_lambda(lambda);
  const ag::Var terms[] = {loss_valence, loss_ec};
  const double weights[] = {lambda, 1.0 - lambda};
  return ag::weighted_sum(tape, terms, weights);
}

DiscOutput forward_single(ag::Tape& tape, const DiscriminativeModel& model,
                          std::span<const DiscriminativeExample> batch, Task task, bool with_loss, Rng* dropout_rng) {
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (task == Task::kEc && candidate_total(batch) == 0) {
    throw std::invalid_argument("EC task on a batch without candidates");
  }
  DiscOutput out;
  const HiddenStates hidden = model.encoder().forward(tape, to_batch(batch, 0), dropout_rng);
  if (task == Task::kValence) {
    ag::Var logits = model.valence_logits(tape, hidden);
    out.valence_probs = ag::softmax_rows(tape.value(logits));
    if (with_loss) out.loss = out.loss_valence = mean_ce(tape, logits, valence_targets(batch));
  } else {
    ag::Var logits = model.ec_logits(tape, hidden, batch);
    out.ec_probs = ag::softmax_rows(tape.value(logits));
    if (with_loss) out.loss = out.loss_ec = mean_ce(tape, logits, ec_targets(batch));
  }
  return out;
}

DiscOutput forward_joint(ag::Tape& tape, const DiscriminativeModel& model, std::span<const DiscriminativeExample> batch,
                         double lambda, LossAggregation aggregation, Rng* dropout_rng) {
  check_lambda(lambda);
  if (batch.empty()) throw std::invalid_argument("empty batch");
  if (candidate_total(batch) == 0) throw std::invalid_argument("EC task on a batch without candidates");
  DiscOutput out;
  const HiddenStates hidden = model.encoder().forward(tape, to_batch(batch, 0), dropout_rng);
  ag::Var vl = model.valence_logits(tape, hidden);
  ag::Var el = model.ec_logits(tape, hidden, batch);
  out.valence_probs = ag::softmax_rows(tape.value(vl));
  out.ec_probs = ag::softmax_rows(tape.value(el));
  out.loss_valence = mean_ce(tape, vl, valence_targets(batch));
  out.loss_ec = mean_ce(tape, el, ec_targets(batch));
  out.loss = combine(tape, lambda, aggregation, out.loss_valence, out.loss_ec);
  return out;
}

DiscOutput forward_two_step(ag::Tape& tape, const DiscriminativeModel& model, const Vocabulary& vocab,
                            std::span<const FunctionalUnit* const> units, const TwoStepOptions& options, Rng& rng,
                            Rng* dropout_rng) {
  check_lambda(options.lambda);
  if (!(options.tf_prob >= 0.0 && options.tf_prob <= 1.0)) throw SpecError("tf_prob", "must lie in [0, 1]");
  if (options.order != TaskOrder::kValFirst && options.order != TaskOrder::kEcFirst) {
    throw std::invalid_argument("invalid task order");
  }
  if (units.empty()) throw std::invalid_argument("empty batch");
  const bool val_first = options.order == TaskOrder::kValFirst;
  const Task first = val_first ? Task::kValence : Task::kEc;
  const Task second = val_first ? Task::kEc : Task::kValence;

  std::vector<DiscriminativeExample> plain;
  plain.reserve(units.size());
  for (const auto* u : units) plain.push_back(encode_discriminative(*u, vocab));

  DiscOutput out;
  // Step 1 on context-free inputs.
  ag::Var loss1;
  ag::Matrix probs1;
  if (first == Task::kValence || candidate_total(plain) > 0) {
    DiscOutput s1 = forward_single(tape, model, plain, first, /*with_loss=*/true, dropout_rng);
    loss1 = s1.loss;
    probs1 = first == Task::kValence ? s1.valence_probs : s1.ec_probs;
  }

  // First-step labels become plain text; no gradient flows through them.
  std::vector<DiscriminativeExample> contextual;
  contextual.reserve(units.size());
  std::size_t cand_row = 0;
  for (std::size_t i = 0; i < units.size(); ++i) {
    const FunctionalUnit& u = *units[i];
    const bool forced = options.oracle || (options.training && rng.bernoulli(options.tf_prob));
    TwoStepContext ctx;
    if (forced) {
      ctx = val_first ? gold_valence_context(u) : gold_ec_context(u);
    } else if (val_first) {
      ctx = TwoStepContext{ValenceContext{static_cast<Valence>(argmax(probs1.row(static_cast<Eigen::Index>(i))))},
                           ContextSource::kPredicted};
    } else {
      ECContext ec;
      for (const auto& c : u.candidates) {
        if (argmax(probs1.row(static_cast<Eigen::Index>(cand_row))) == static_cast<int>(Carrier::kYes)) {
          ec.spans.push_back(span_surface(u, c));
        }
        ++cand_row;
      }
      ctx = TwoStepContext{std::move(ec), ContextSource::kPredicted};
    }
    if (forced && !val_first) cand_row += u.candidates.size();
    contextual.push_back(encode_discriminative(u, vocab, &ctx));
    out.contexts.push_back(std::move(ctx));
  }

  // Step 2 on the contextualised inputs.
  ag::Var loss2;
  ag::Matrix probs2;
  if (second == Task::kValence || candidate_total(contextual) > 0) {
    DiscOutput s2 = forward_single(tape, model, contextual, second, /*with_loss=*/true, dropout_rng);
    loss2 = s2.loss;
    probs2 = second == Task::kValence ? s2.valence_probs : s2.ec_probs;
  }

  out.loss_valence = val_first ? loss1 : loss2;
  out.loss_ec = val_first ? loss2 : loss1;
  out.valence_probs = val_first ? probs1 : probs2;
  out.ec_probs = val_first ? probs2 : probs1;
  out.loss = combine(tape, options.lambda, options.aggregation, out.loss_valence, out.loss_ec);
  return out;
}

UnitPrediction predict_unit(const DiscriminativeModel& model, const Vocabulary& vocab, const FunctionalUnit& unit,
                            const DiscSetting& setting) {
  ag::Tape tape(/*grad_enabled=*/false);
  ag::Matrix vp, ep;
  bool want_val = true, want_ec = true;
  if (setting.setting == Setting::kTwoStep) {
    TwoStepOptions options;
    options.order = setting.order;
    options.oracle = setting.oracle;
    Rng unused(0);
    const FunctionalUnit* units[] = {&unit};
    DiscOutput o = forward_two_step(tape, model, vocab, units, options, unused);
    vp = o.valence_probs;
    ep = o.ec_probs;
  } else {
    if (setting.setting == Setting::kSingle) {
      want_val = setting.task == Task::kValence;
      want_ec = setting.task == Task::kEc;
    }
    const DiscriminativeExample ex[] = {encode_discriminative(unit, vocab)};
    const HiddenStates hidden = model.encoder().forward(tape, to_batch(ex, 0));
    if (want_val) vp = ag::softmax_rows(tape.value(model.valence_logits(tape, hidden)));
    if (want_ec && !unit.candidates.empty()) ep = ag::softmax_rows(tape.value(model.ec_logits(tape, hidden, ex)));
  }
  UnitPrediction p;
  if (want_val) p.valence = static_cast<Valence>(argmax(vp.row(0)));
  if (want_ec) {
    std::vector<Carrier> labels;
    for (std::size_t c = 0; c < unit.candidates.size(); ++c) {
      labels.push_back(static_cast<Carrier>(argmax(ep.row(static_cast<Eigen::Index>(c)))));
    }
    p.ec = std::move(labels);
  }
  return p;
}

std::vector<UnitPrediction> predict_units(const DiscriminativeModel& model, const Vocabulary& vocab,
                                          std::span<const FunctionalUnit> units, const DiscSetting& setting) {
  std::vector<UnitPrediction> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(predict_unit(model, vocab, u, setting));
  return out;
}

namespace {

class DiscriminativeTask final : public TrainingTask {
 public:
  DiscriminativeTask(DiscriminativeModel& model, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                     std::span<const FunctionalUnit> validation, const DiscSetting& setting, const TrainConfig& config)
      : model_(model), vocab_(vocab), train_(train), validation_(validation), setting_(setting), config_(config) {
    if (setting.setting == Setting::kSingle && setting.task == Task::kEc) {
      // Units without candidates carry nothing to learn for EC.
      for (std::size_t i = 0; i < train.size(); ++i) {
        if (!train[i].candidates.empty()) items_.push_back(i);
      }
    } else {
      for (std::size_t i = 0; i < train.size(); ++i) items_.push_back(i);
    }
    if (setting.setting != Setting::kTwoStep) {
      for (const auto& u : train) plain_.push_back(encode_discriminative(u, vocab));
    }
  }

  std::vector<ag::Parameter*> parameters() override { return model_.parameters(); }
  std::size_t num_items() const override { return items_.size(); }

  ag::Var batch_loss(ag::Tape& tape, std::span<const std::size_t> items, Rng& rng) override {
    if (setting_.setting == Setting::kTwoStep) {
      std::vector<const FunctionalUnit*> units;
      for (std::size_t i : items) units.push_back(&train_[items_[i]]);
      TwoStepOptions options;
      options.order = setting_.order;
      options.tf_prob = config_.tf_prob;
      options.lambda = config_.lambda;
      options.aggregation = config_.aggregation;
      options.training = true;
      if (!setting_.oracle) return forward_two_step(tape, model_, vocab_, units, options, rng, &rng).loss;
      // The oracle bound fits the second step alone, on gold first-step labels.
      options.oracle = true;
      const DiscOutput o = forward_two_step(tape, model_, vocab_, units, options, rng, &rng);
      const ag::Var second = setting_.order == TaskOrder::kValFirst ? o.loss_ec : o.loss_valence;
      return second.valid() ? second : tape.constant(ag::Matrix::Zero(1, 1));
    }
    std::vector<DiscriminativeExample> batch;
    for (std::size_t i : items) batch.push_back(plain_[items_[i]]);
    if (setting_.setting == Setting::kSingle) return forward_single(tape, model_, batch, setting_.task, true, &rng).loss;
    if (candidate_total(batch) == 0) {
      DiscOutput o = forward_single(tape, model_, batch, Task::kValence, true, &rng);
      return combine(tape, config_.lambda, config_.aggregation, o.loss, ag::Var());
    }
    return forward_joint(tape, model_, batch, config_.lambda, config_.aggregation, &rng).loss;
  }

  double validation_metric() override {
    const auto preds = predict_units(model_, vocab_, validation_, setting_);
    const RunMetrics m = score_predictions("validation", config_.seed, validation_, preds);
    return selection_metric(m, setting_.setting, setting_.task, setting_.order);
  }

 private:
  DiscriminativeModel& model_;
  const Vocabulary& vocab_;
  std::span<const FunctionalUnit> train_;
  std::span<const FunctionalUnit> validation_;
  DiscSetting setting_;
  TrainConfig config_;
  std::vector<std::size_t> items_;
  std::vector<DiscriminativeExample> plain_;
};

}  // namespace

std::unique_ptr<TrainingTask> make_discriminative_task(DiscriminativeModel& model, const Vocabulary& vocab,
                                                       std::span<const FunctionalUnit> train,
                                                       std::span<const FunctionalUnit> validation,
                                                       const DiscSetting& setting, const TrainConfig& config) {
  return std::make_unique<DiscriminativeTask>(model, vocab, train, validation, setting, config);
}

}  // namespace mtlaffect
