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

#include "mtlaffect/generative.hpp"

#include <cmath>
#include <stdexcept>

#include "json.hpp"
#include "mtlaffect/error.hpp"

namespace mtlaffect {

GenerationConstraint GenerationConstraint::from_prompt(const PromptSequence& prompt) {
  GenerationConstraint c;
  for (const TargetSlot& slot : prompt.target_slots) {
    if (slot.position == 0 || slot.position >= prompt.input_ids.size()) {
      throw std::invalid_argument("target slot outside the prompt");
    }
    if (slot.allowed.empty()) throw std::invalid_argument("target slot with an empty label set");
    c.schedule.push_back({prompt.input_ids[slot.position - 1], slot.allowed, slot.task, slot.candidate});
  }
  return c;
}

TokenBatch MixedBatch::padded(int pad_id) const {
  std::vector<std::vector<int>> seqs;
  for (const auto& p : prompts) seqs.push_back(p.input_ids);
  return TokenBatch::pad(seqs, pad_id);
}

ag::Var lm_loss(ag::Tape& tape, const Decoder& decoder, std::span<const PromptSequence> prompts, Rng* dropout_rng) {
  std::vector<ag::Var> sums;
  std::size_t count = 0;
  for (const PromptSequence& p : prompts) {
    if (p.loss_mask.size() != p.input_ids.size()) throw std::invalid_argument("loss mask length differs from prompt");
    // Row t of the logits predicts token t + 1.
    std::vector<int> targets(p.input_ids.size(), -1);
    std::size_t selected = 0;
    for (std::size_t t = 1; t < p.input_ids.size(); ++t) {
      if (p.loss_mask[t] != 0) {
        targets[t - 1] = p.input_ids[t];
        ++selected;
      }
    }
    if (selected == 0) continue;
    count += selected;
    sums.push_back(ag::cross_entropy_sum(tape, decoder.logits(tape, p.input_ids, dropout_rng), targets));
  }
  if (count == 0) throw std::invalid_argument("loss mask selects no position");
  std::vector<double> weights(sums.size(), 1.0 / static_cast<double>(count));
  return ag::weighted_sum(tape, sums, weights);
}

std::vector<int> constrained_decode(const Decoder& decoder, std::span<const int> prefix,
                                    const GenerationConstraint& constraint, std::span<const std::optional<int>> fixed) {
  if (prefix.empty()) throw std::invalid_argument("empty decoding prefix");
  if (!fixed.empty() && fixed.size() != constraint.schedule.size()) {
    throw std::invalid_argument("fixed labels must match the slot count");
  }
  const std::size_t needed = prefix.size() + 2 * constraint.schedule.size();
  if (needed > decoder.config().max_seq_len) {
    throw std::length_error("decoding needs " + std::to_string(needed) + " positions, max_seq_len is " +
                            std::to_string(decoder.config().max_seq_len));
  }
  std::vector<int> seq(prefix.begin(), prefix.end());
  std::vector<int> labels;
  labels.reserve(constraint.schedule.size());
  for (std::size_t i = 0; i < constraint.schedule.size(); ++i) {
    const auto& slot = constraint.schedule[i];
    if (slot.allowed.empty()) throw std::invalid_argument("slot with an empty label set");
    seq.push_back(slot.forced_token);
    int label;
    if (!fixed.empty() && fixed[i].has_value()) {
      label = *fixed[i];
    } else {
      const Eigen::RowVectorXd logits = decoder.next_token_logits(seq);
      label = slot.allowed.front();
      for (int candidate : slot.allowed) {
        if (logits(candidate) > logits(label)) label = candidate;
      }
    }
    seq.push_back(label);
    labels.push_back(label);
  }
  return labels;
}

namespace {

std::span<const int> prefix_of(const PromptSequence& p) {
  return std::span<const int>(p.input_ids).first(p.prefix_length());
}

void fill_prediction(const PromptSequence& prompt, const std::vector<int>& labels, const Vocabulary& vocab,
                     UnitPrediction& out) {
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const TargetSlot& slot = prompt.target_slots[i];
    if (slot.task == Task::kValence) {
      out.valence = vocab.valence_of_label(labels[i]).value();
    } else {
      if (!out.ec) out.ec = std::vector<Carrier>();
      if (out.ec->size() <= slot.candidate) out.ec->resize(slot.candidate + 1, Carrier::kNo);
      (*out.ec)[slot.candidate] = vocab.carrier_of_label(labels[i]).value();
    }
  }
}

UnitPrediction decode_prompt(const Decoder& decoder, const Vocabulary& vocab, const PromptSequence& prompt,
                             std::span<const std::optional<int>> fixed = {}) {
  UnitPrediction p;
  fill_prediction(prompt, constrained_decode(decoder, prefix_of(prompt), GenerationConstraint::from_prompt(prompt), fixed),
                  vocab, p);
  return p;
}

// Gold tokens for the slots of `first`, nothing elsewhere.
std::vector<std::optional<int>> gold_slots(const PromptSequence& prompt, Task first) {
  std::vector<std::optional<int>> fixed;
  for (const TargetSlot& slot : prompt.target_slots) {
    fixed.push_back(slot.task == first ? std::optional<int>(slot.gold) : std::nullopt);
  }
  return fixed;
}

}  // namespace

std::vector<int> oracle_decode(const Decoder& decoder, const Vocabulary& vocab, const FunctionalUnit& unit,
                               TaskOrder order) {
  const PromptSequence prompt = render_prompt_two_step(unit, vocab, order);
  const Task first = order == TaskOrder::kValFirst ? Task::kValence : Task::kEc;
  const auto fixed = gold_slots(prompt, first);
  const auto labels = constrained_decode(decoder, prefix_of(prompt), GenerationConstraint::from_prompt(prompt), fixed);
  std::vector<int> second;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (prompt.target_slots[i].task != first) second.push_back(labels[i]);
  }
  return second;
}

UnitPrediction predict_unit(const Decoder& decoder, const Vocabulary& vocab, const FunctionalUnit& unit,
                            const GenSetting& setting) {
  const bool has_candidates = !unit.candidates.empty();
  UnitPrediction p;
  switch (setting.setting) {
    case Setting::kSingle:
      if (setting.task == Task::kValence) {
        p = decode_prompt(decoder, vocab, render_prompt_valence(unit, vocab));
      } else if (has_candidates) {
        p = decode_prompt(decoder, vocab, render_prompt_ec(unit, vocab));
      }
      if (setting.task == Task::kEc && !p.ec) p.ec = std::vector<Carrier>();
      return p;
    case Setting::kJoint:
      p = decode_prompt(decoder, vocab, render_prompt_valence(unit, vocab));
      if (has_candidates) {
        p.ec = decode_prompt(decoder, vocab, render_prompt_ec(unit, vocab)).ec;
      } else {
        p.ec = std::vector<Carrier>();
      }
      return p;
    case Setting::kTwoStep:
      if (!has_candidates) {
        p = decode_prompt(decoder, vocab, render_prompt_valence(unit, vocab));
        p.ec = std::vector<Carrier>();
        return p;
      } else {
        const PromptSequence prompt = render_prompt_two_step(unit, vocab, setting.order);
        if (!setting.oracle) return decode_prompt(decoder, vocab, prompt);
        const Task first = setting.order == TaskOrder::kValFirst ? Task::kValence : Task::kEc;
        // First-task labels are reported from a plain pass; the oracle pass
        // only contributes second-task labels.
        UnitPrediction plain = decode_prompt(decoder, vocab, prompt);
        UnitPrediction forced = decode_prompt(decoder, vocab, prompt, gold_slots(prompt, first));
        if (first == Task::kValence) {
          plain.ec = forced.ec;
        } else {
          plain.valence = forced.valence;
        }
        return plain;
      }
  }
  return p;
}

std::vector<UnitPrediction> predict_units(const Decoder& decoder, const Vocabulary& vocab,
                                          std::span<const FunctionalUnit> units, const GenSetting& setting) {
  std::vector<UnitPrediction> out;
  out.reserve(units.size());
  for (const auto& u : units) out.push_back(predict_unit(decoder, vocab, u, setting));
  return out;
}

std::vector<PromptSequence> training_prompts(std::span<const FunctionalUnit> units, const Vocabulary& vocab,
                                             const GenSetting& setting, const TrainConfig& config,
                                             std::vector<Task>* kinds) {
  std::vector<PromptSequence> out;
  std::vector<Task> tags;
  auto push = [&](PromptSequence p, Task kind) {
    out.push_back(std::move(p));
    tags.push_back(kind);
  };
  const LossScope scope = config.loss_scope;
  switch (setting.setting) {
    case Setting::kSingle:
      for (const auto& u : units) {
        if (setting.task == Task::kValence) {
          push(render_prompt_valence(u, vocab, scope), Task::kValence);
        } else if (!u.candidates.empty()) {
          push(render_prompt_ec(u, vocab, scope), Task::kEc);
        }
      }
      break;
    case Setting::kJoint: {
      std::vector<PromptSequence> ec;
      for (const auto& u : units) {
        push(render_prompt_valence(u, vocab, scope), Task::kValence);
        if (!u.candidates.empty()) ec.push_back(render_prompt_ec(u, vocab, scope));
      }
      std::size_t n_ec = ec.size();
      if (config.joint_ec_fraction >= 0.0 && !ec.empty()) {
        const double f = config.joint_ec_fraction;
        n_ec = static_cast<std::size_t>(std::llround(f / (1.0 - f) * static_cast<double>(units.size())));
      }
      for (std::size_t i = 0; i < n_ec; ++i) push(ec[i % ec.size()], Task::kEc);
      break;
    }
    case Setting::kTwoStep: {
      const Task second = setting.order == TaskOrder::kValFirst ? Task::kEc : Task::kValence;
      for (const auto& u : units) {
        if (u.candidates.empty() && setting.oracle && second == Task::kEc) continue;
        PromptSequence p = u.candidates.empty() ? render_prompt_valence(u, vocab, scope)
                                                : render_prompt_two_step(u, vocab, setting.order, scope);
        if (setting.oracle) {
          // The oracle bound fits the second step alone, after gold first-step labels.
          std::fill(p.loss_mask.begin(), p.loss_mask.end(), 0);
          for (const auto& slot : p.target_slots) {
            if (slot.task == second) p.loss_mask[slot.position] = 1;
          }
        }
        push(std::move(p), u.candidates.empty() ? Task::kValence : second);
      }
      break;
    }
  }
  if (kinds != nullptr) *kinds = std::move(tags);
  return out;
}

namespace {

class GenerativeTask final : public TrainingTask {
 public:
  GenerativeTask(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                 std::span<const FunctionalUnit> validation, const GenSetting& setting, const TrainConfig& config)
      : decoder_(decoder),
        vocab_(vocab),
        validation_(validation),
        setting_(setting),
        config_(config),
        prompts_(training_prompts(train, vocab, setting, config)) {}

  std::vector<ag::Parameter*> parameters() override {
    std::vector<ag::Parameter*> out;
    for (auto& p : decoder_.stack().parameters()) out.push_back(&p);
    return out;
  }
  std::size_t num_items() const override { return prompts_.size(); }

  ag::Var batch_loss(ag::Tape& tape, std::span<const std::size_t> items, Rng& rng) override {
    std::vector<PromptSequence> batch;
    batch.reserve(items.size());
    for (std::size_t i : items) batch.push_back(prompts_[i]);
    return lm_loss(tape, decoder_, batch, &rng);
  }

  double validation_metric() override {
    GenSetting eval = setting_;
    const auto preds = predict_units(decoder_, vocab_, validation_, eval);
    const RunMetrics m = score_predictions("validation", config_.seed, validation_, preds);
    return selection_metric(m, setting_.setting, setting_.task, setting_.order);
  }

 private:
  Decoder& decoder_;
  const Vocabulary& vocab_;
  std::span<const FunctionalUnit> validation_;
  GenSetting setting_;
  TrainConfig config_;
  std::vector<PromptSequence> prompts_;
};

std::string hex(std::uint64_t h) {
  char buffer[20];
  std::snprintf(buffer, sizeof buffer, "%016llx", static_cast<unsigned long long>(h));
  return buffer;
}

}  // namespace

std::unique_ptr<TrainingTask> make_generative_task(Decoder& decoder, const Vocabulary& vocab,
                                                   std::span<const FunctionalUnit> train,
                                                   std::span<const FunctionalUnit> validation,
                                                   const GenSetting& setting, const TrainConfig& config) {
  return std::make_unique<GenerativeTask>(decoder, vocab, train, validation, setting, config);
}

TrainLog train_generative(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                          std::span<const FunctionalUnit> validation, const GenSetting& setting,
                          const TrainConfig& config) {
  GenerativeTask task(decoder, vocab, train, validation, setting, config);
  return mtlaffect::train(task, config);
}

TrainLog train_joint_generative(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                                std::span<const FunctionalUnit> validation, const TrainConfig& config) {
  return train_generative(decoder, vocab, train, validation, GenSetting{Setting::kJoint}, config);
}

TrainLog train_two_step_generative(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                                   std::span<const FunctionalUnit> validation, TaskOrder order,
                                   const TrainConfig& config) {
  GenSetting s;
  s.setting = Setting::kTwoStep;
  s.order = order;
  return train_generative(decoder, vocab, train, validation, s, config);
}

DomainAdaptResult domain_adapt(Decoder& decoder, const Vocabulary& vocab, std::span<const FunctionalUnit> train,
                               std::span<const FunctionalUnit> validation, Task first_task,
                               const TrainConfig& phase1, const TrainConfig& phase2) {
  if (first_task != Task::kValence && first_task != Task::kEc) throw std::invalid_argument("invalid first task");
  DomainAdaptResult r;
  r.initial_hash = parameter_hash(decoder.stack().parameters());

  GenSetting single;
  single.setting = Setting::kSingle;
  single.task = first_task;
  r.phase1 = train_generative(decoder, vocab, train, validation, single, phase1);
  r.boundary_hash = parameter_hash(decoder.stack().parameters());
  r.boundary = decoder_checkpoint(decoder, R"({"phase":1})");

  GenSetting two_step;
  two_step.setting = Setting::kTwoStep;
  two_step.order = first_task == Task::kValence ? TaskOrder::kValFirst : TaskOrder::kEcFirst;
  r.phase2_start_hash = parameter_hash(decoder.stack().parameters());
  r.phase2 = train_generative(decoder, vocab, train, validation, two_step, phase2);
  r.phase1.notes["end_hash"] = hex(r.boundary_hash);
  r.phase2.notes["start_hash"] = hex(r.phase2_start_hash);
  return r;
}

CheckpointFile decoder_checkpoint(const Decoder& decoder, const std::string& metadata_json) {
  CheckpointFile file;
  auto meta = nlohmann::ordered_json::parse(metadata_json);
  meta["model_config"] = nlohmann::ordered_json::parse(transformer_config_json(decoder.config()));
  file.metadata = meta.dump();
  file.arrays = export_parameters(decoder.stack().parameters(), "decoder.");
  return file;
}

Decoder decoder_from_checkpoint(const CheckpointFile& file) {
  const auto meta = nlohmann::json::parse(file.metadata);
  if (!meta.contains("model_config")) throw ParseError(0, "checkpoint metadata lacks model_config");
  Decoder decoder(transformer_config_from_json(meta["model_config"].dump()));
  import_parameters(decoder.stack().parameters(), file.arrays, "decoder.");
  return decoder;
}

}  // namespace mtlaffect
