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

#include "mtlaffect/regime.hpp"

#include <algorithm>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/kv_config.hpp"

namespace mtlaffect {

std::string_view profile_name(Profile p) { return p == Profile::kPublished ? "published" : "desk"; }

Profile parse_profile(std::string_view name) {
  if (name == "published") return Profile::kPublished;
  if (name == "desk") return Profile::kDesk;
  throw SpecError("profile", "expected 'published' or 'desk', got '" + std::string(name) + "'");
}

namespace {

std::vector<std::string> split_colon(std::string_view id) {
  std::vector<std::string> parts;
  std::size_t start = 0;
  while (true) {
    const std::size_t pos = id.find(':', start);
    parts.emplace_back(id.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return parts;
}

std::string setting_token(const RegimeConfig& r) {
  switch (r.setting) {
    case Setting::kSingle:
      return r.task == Task::kValence ? "single-val" : "single-ec";
    case Setting::kJoint:
      return "joint";
    case Setting::kTwoStep:
      return r.order == TaskOrder::kValFirst ? "two-step-val-ec" : "two-step-ec-val";
  }
  return {};
}

}  // namespace

std::string RegimeConfig::id() const {
  std::string out = family == ModelFamily::kDiscriminative ? "disc:" : "gen:";
  out += setting_token(*this);
  if (oracle) out += ":oracle";
  if (domain_adapt) out += ":domain-adapt";
  return out;
}

RegimeConfig RegimeConfig::parse(std::string_view id, Profile profile) {
  const auto parts = split_colon(id);
  auto fail = [&](const std::string& why) { throw RegimeError("invalid regime '" + std::string(id) + "': " + why); };
  if (parts.size() < 2 || parts.size() > 4) fail("expected family:setting[:oracle][:domain-adapt]");
  RegimeConfig r;
  if (parts[0] == "disc") {
    r.family = ModelFamily::kDiscriminative;
  } else if (parts[0] == "gen") {
    r.family = ModelFamily::kGenerative;
  } else {
    fail("unknown model family '" + parts[0] + "'");
  }
  const std::string& s = parts[1];
  if (s == "single-val") {
    r.setting = Setting::kSingle;
    r.task = Task::kValence;
  } else if (s == "single-ec") {
    r.setting = Setting::kSingle;
    r.task = Task::kEc;
  } else if (s == "joint") {
    r.setting = Setting::kJoint;
  } else if (s == "two-step-val-ec") {
    r.setting = Setting::kTwoStep;
    r.order = TaskOrder::kValFirst;
  } else if (s == "two-step-ec-val") {
    r.setting = Setting::kTwoStep;
    r.order = TaskOrder::kEcFirst;
  } else {
    fail("unknown setting '" + s + "'");
  }
  std::size_t i = 2;
  if (i < parts.size() && parts[i] == "oracle") {
    r.oracle = true;
    ++i;
  }
  if (i < parts.size() && parts[i] == "domain-adapt") {
    r.domain_adapt = true;
    ++i;
  }
  if (i != parts.size()) fail("unknown flag '" + parts[i] + "'");
  if (r.oracle && r.setting != Setting::kTwoStep) fail("oracle applies to two-step settings only");
  if (r.domain_adapt && (r.family != ModelFamily::kGenerative || r.setting != Setting::kTwoStep)) {
    fail("domain adaptation applies to generative two-step settings only");
  }
  r.profile = profile;
  r.model = default_model_config(profile);
  r.train = default_train_config(r, profile);
  return r;
}

DiscSetting RegimeConfig::disc_setting() const { return DiscSetting{setting, task, order, oracle}; }
GenSetting RegimeConfig::gen_setting() const { return GenSetting{setting, task, order, oracle}; }

TransformerConfig default_model_config(Profile) {
  TransformerConfig c;
  c.hidden_dim = 64;
  c.n_layers = 2;
  c.n_heads = 4;
  c.max_seq_len = 128;
  return c;
}

TrainConfig default_train_config(const RegimeConfig& r, Profile profile) {
  TrainConfig c;
  const bool disc = r.family == ModelFamily::kDiscriminative;
  c.batch_size = 32;
  c.warmup_fraction = 0.10;
  c.early_stop_patience = 5;
  c.max_epochs = disc ? 30 : 60;
  c.lambda = 0.5;
  c.tf_prob = 0.0;
  switch (r.setting) {
    case Setting::kSingle:
      if (profile == Profile::kPublished) {
        c.learning_rate = disc ? (r.task == Task::kValence ? 5e-5 : 4e-5) : (r.task == Task::kValence ? 9e-3 : 8e-3);
      }
      break;
    case Setting::kJoint:
      if (profile == Profile::kPublished) c.learning_rate = disc ? 1e-5 : 8e-3;
      c.lambda = 0.3;
      break;
    case Setting::kTwoStep:
      // The oracle reuses the learning rate and lambda of its order.
      if (r.order == TaskOrder::kValFirst) {
        if (profile == Profile::kPublished) c.learning_rate = disc ? 4e-5 : 9e-4;
        c.lambda = 0.5;
        c.tf_prob = 1.0;
      } else {
        if (profile == Profile::kPublished) c.learning_rate = disc ? 6e-5 : 7e-4;
        c.lambda = 0.4;
        c.tf_prob = 0.1;
      }
      if (r.oracle) c.tf_prob = 1.0;
      break;
  }
  if (profile == Profile::kDesk) c.learning_rate = disc ? 1e-3 : 2e-3;
  if (!disc) c.tf_prob = 0.0;
  return c;
}

std::vector<std::string> regime_config_keys() {
  std::vector<std::string> keys = {"hidden_dim", "n_layers",     "n_heads",   "max_seq_len",
                                   "ffn_multiplier", "dropout_rate", "split_seed", "phase1_learning_rate", "profile"};
  for (const auto& k : train_config_keys()) keys.push_back(k);
  return keys;
}

void apply_config(RegimeConfig& r, const KvConfig& kv) {
  for (const auto& [key, value] : kv.values()) {
    const auto keys = regime_config_keys();
    // `regime` is written by regime_config_to_text for reference only.
    if (key != "regime" && std::find(keys.begin(), keys.end(), key) == keys.end()) {
      throw SpecError(key, "unknown config key");
    }
  }
  if (auto p = kv.get("profile")) {
    r.profile = parse_profile(*p);
    r.model = default_model_config(r.profile);
    r.train = default_train_config(r, r.profile);
  }
  r.model.hidden_dim = kv.get_uint("hidden_dim", r.model.hidden_dim);
  r.model.n_layers = kv.get_uint("n_layers", r.model.n_layers);
  r.model.n_heads = kv.get_uint("n_heads", r.model.n_heads);
  r.model.max_seq_len = kv.get_uint("max_seq_len", r.model.max_seq_len);
  r.model.ffn_multiplier = kv.get_uint("ffn_multiplier", r.model.ffn_multiplier);
  r.model.dropout_rate = kv.get_double("dropout_rate", r.model.dropout_rate);
  r.split_seed = kv.get_uint("split_seed", r.split_seed);
  r.phase1_learning_rate = kv.get_double("phase1_learning_rate", r.phase1_learning_rate);
  if (!(r.phase1_learning_rate >= 0.0)) throw SpecError("phase1_learning_rate", "must be non-negative");
  r.train = train_config_from(kv, r.train);
}

std::string regime_config_to_text(const RegimeConfig& r) {
  std::ostringstream out;
  out << "regime=" << r.id() << '\n';
  out << "profile=" << profile_name(r.profile) << '\n';
  out << "hidden_dim=" << r.model.hidden_dim << '\n';
  out << "n_layers=" << r.model.n_layers << '\n';
  out << "n_heads=" << r.model.n_heads << '\n';
  out << "max_seq_len=" << r.model.max_seq_len << '\n';
  out << "ffn_multiplier=" << r.model.ffn_multiplier << '\n';
  char buffer[64];
  std::snprintf(buffer, sizeof buffer, "%.17g", r.model.dropout_rate);
  out << "dropout_rate=" << buffer << '\n';
  out << "split_seed=" << r.split_seed << '\n';
  std::snprintf(buffer, sizeof buffer, "%.17g", r.phase1_learning_rate);
  out << "phase1_learning_rate=" << buffer << '\n';
  out << train_config_to_text(r.train);
  return out.str();
}

RunMetrics evaluate_regime(const TrainedModel& model, const Vocabulary& vocab, std::span<const FunctionalUnit> units,
                           const RegimeConfig& regime, std::uint64_t seed, std::vector<UnitPrediction>* predictions) {
  if (units.empty()) throw RegimeError("cannot evaluate an empty test set");
  std::vector<UnitPrediction> preds;
  if (const auto* disc = std::get_if<DiscriminativeModel>(&model)) {
    preds = predict_units(*disc, vocab, units, regime.disc_setting());
  } else {
    preds = predict_units(std::get<Decoder>(model), vocab, units, regime.gen_setting());
  }
  RunMetrics m = score_predictions(regime.id(), seed, units, preds);
  if (predictions != nullptr) *predictions = std::move(preds);
  return m;
}

namespace {

void check_feasible(const RegimeConfig& regime, std::span<const FunctionalUnit> train) {
  const bool needs_candidates = regime.setting != Setting::kSingle || regime.task == Task::kEc;
  if (!needs_candidates) return;
  for (const auto& u : train) {
    if (!u.candidates.empty()) return;
  }
  throw RegimeError("regime " + regime.id() + " needs EC candidates but the training split has none");
}

}  // namespace

RunResult run_single(const RegimeConfig& regime, const CorpusSplit& split, const Vocabulary& vocab,
                     std::uint64_t seed) {
  check_feasible(regime, split.train);
  TransformerConfig model_config = regime.model;
  model_config.vocab_size = vocab.size();
  model_config.seed = seed;
  TrainConfig train_config = regime.train;
  train_config.seed = seed;

  RunResult result{RunMetrics{}, TrainLog{}, std::nullopt, DiscriminativeModel{}, {}};
  if (regime.family == ModelFamily::kDiscriminative) {
    DiscriminativeModel model(model_config);
    auto task = make_discriminative_task(model, vocab, split.train, split.validation, regime.disc_setting(),
                                         train_config);
    result.log = train(*task, train_config);
    result.model = std::move(model);
  } else {
    Decoder decoder(model_config);
    if (regime.domain_adapt) {
      const Task first = regime.order == TaskOrder::kValFirst ? Task::kValence : Task::kEc;
      RegimeConfig single = regime;
      single.setting = Setting::kSingle;
      single.task = first;
      single.oracle = false;
      single.domain_adapt = false;
      TrainConfig phase1 = train_config;
      phase1.learning_rate = regime.phase1_learning_rate > 0.0
                                 ? regime.phase1_learning_rate
                                 : default_train_config(single, regime.profile).learning_rate;
      DomainAdaptResult da = domain_adapt(decoder, vocab, split.train, split.validation, first, phase1, train_config);
      result.phase1_log = std::move(da.phase1);
      result.log = std::move(da.phase2);
    } else {
      result.log = train_generative(decoder, vocab, split.train, split.validation, regime.gen_setting(), train_config);
    }
    result.model = std::move(decoder);
  }
  result.metrics = evaluate_regime(result.model, vocab, split.test, regime, seed, &result.predictions);
  return result;
}

std::vector<RunMetrics> run_regime(const RegimeConfig& regime, const std::vector<FunctionalUnit>& units,
                                   std::size_t n_seeds, std::uint64_t base_seed) {
  if (n_seeds == 0) throw RegimeError("at least one seed is required");
  const CorpusSplit split = stratified_split(units, SplitRatios{}, regime.split_seed);
  const Vocabulary vocab = Vocabulary::build(split.train);
  std::vector<RunMetrics> out;
  for (std::size_t i = 0; i < n_seeds; ++i) {
    out.push_back(run_single(regime, split, vocab, base_seed + i).metrics);
  }
  return out;
}

CheckpointFile model_checkpoint(const TrainedModel& model, const RegimeConfig& regime, std::uint64_t seed) {
  nlohmann::ordered_json meta;
  meta["regime"] = regime.id();
  meta["seed"] = seed;
  if (const auto* disc = std::get_if<DiscriminativeModel>(&model)) {
    meta["family"] = "disc";
    return disc->to_checkpoint(meta.dump());
  }
  meta["family"] = "gen";
  return decoder_checkpoint(std::get<Decoder>(model), meta.dump());
}

TrainedModel model_from_checkpoint(const CheckpointFile& file) {
  const auto meta = nlohmann::json::parse(file.metadata);
  const std::string family = meta.value("family", "");
  if (family == "disc") return DiscriminativeModel::from_checkpoint(file);
  if (family == "gen") return decoder_from_checkpoint(file);
  throw ParseError(0, "checkpoint metadata names no model family");
}

}  // namespace mtlaffect
