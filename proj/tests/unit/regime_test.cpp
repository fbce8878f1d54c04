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

#include "doctest.h"
#include "fixtures.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/kv_config.hpp"
#include "mtlaffect/grid.hpp"
#include "mtlaffect/regime.hpp"

using namespace mtlaffect;

namespace {

// Small enough to train a regime in well under a second.
RegimeConfig tiny_regime(const std::string& id) {
  RegimeConfig r = RegimeConfig::parse(id);
  apply_config(r, KvConfig::parse("hidden_dim=8\nn_layers=1\nn_heads=2\nmax_seq_len=64\nmax_epochs=2\nbatch_size=16\n"));
  return r;
}

std::vector<FunctionalUnit> small_corpus() {
  return flatten_units(generate_corpus(GeneratorSpec::strongly_dependent(120, 5)));
}

}  // namespace

TEST_CASE("regime ids parse and print back") {
  for (const auto& id : grid_regime_ids()) CHECK(RegimeConfig::parse(id).id() == id);
  const auto r = RegimeConfig::parse("gen:two-step-ec-val:oracle");
  CHECK(r.family == ModelFamily::kGenerative);
  CHECK(r.setting == Setting::kTwoStep);
  CHECK(r.order == TaskOrder::kEcFirst);
  CHECK(r.oracle);
  for (const char* bad : {"disc:foo", "disc", "disc:joint:oracle", "disc:two-step-val-ec:domain-adapt",
                          "gen:single-val:domain-adapt", "llm:joint", "gen:joint:extra"}) {
    CHECK_THROWS_AS(RegimeConfig::parse(bad), RegimeError);
  }
}

TEST_CASE("published profile defaults follow the published hyper-parameters") {
  struct Row {
    const char* id;
    double lr;
    double lambda;
  };
  const Row rows[] = {
      {"disc:single-val", 5e-5, 0.5},        {"disc:single-ec", 4e-5, 0.5},
      {"disc:two-step-val-ec", 4e-5, 0.5},   {"disc:two-step-ec-val", 6e-5, 0.4},
      {"disc:joint", 1e-5, 0.3},             {"gen:single-val", 9e-3, 0.5},
      {"gen:single-ec", 8e-3, 0.5},          {"gen:two-step-val-ec", 9e-4, 0.5},
      {"gen:two-step-ec-val", 7e-4, 0.4},    {"gen:joint", 8e-3, 0.3},
      {"disc:two-step-ec-val:oracle", 6e-5, 0.4},
  };
  for (const auto& row : rows) {
    const TrainConfig c = RegimeConfig::parse(row.id, Profile::kPublished).train;
    CHECK_MESSAGE(c.learning_rate == row.lr, row.id);
    CHECK_MESSAGE(c.lambda == row.lambda, row.id);
    CHECK(c.batch_size == 32);
    CHECK(c.early_stop_patience == 5);
    CHECK(c.warmup_fraction == 0.1);
    CHECK(c.max_epochs == (row.id[0] == 'd' ? 30u : 60u));
  }
  CHECK(RegimeConfig::parse("disc:two-step-val-ec", Profile::kPublished).train.tf_prob == 1.0);
  CHECK(RegimeConfig::parse("disc:two-step-ec-val", Profile::kPublished).train.tf_prob == 0.1);
  CHECK(RegimeConfig::parse("gen:two-step-ec-val", Profile::kPublished).train.tf_prob == 0.0);
}

TEST_CASE("config application") {
  RegimeConfig r = RegimeConfig::parse("disc:joint");
  apply_config(r, KvConfig::parse("profile=published\nlambda=0.6\nsplit_seed=4\n"));
  CHECK(r.profile == Profile::kPublished);
  CHECK(r.train.learning_rate == 1e-5);
  CHECK(r.train.lambda == 0.6);
  CHECK(r.split_seed == 4);
  CHECK_THROWS_AS(apply_config(r, KvConfig::parse("no_such_key=1\n")), SpecError);

  RegimeConfig back = RegimeConfig::parse("disc:joint");
  apply_config(back, KvConfig::parse(regime_config_to_text(r)));
  CHECK(back.train == r.train);
  CHECK(back.model == r.model);
}

TEST_CASE("run_regime with one seed gives one result") {
  const auto runs = run_regime(tiny_regime("disc:joint"), small_corpus(), 1, 3);
  REQUIRE(runs.size() == 1);
  CHECK(runs[0].seed == 3);
  CHECK(runs[0].regime == "disc:joint");
  CHECK(runs[0].valence.has_value());
  CHECK(runs[0].ec.has_value());
}

TEST_CASE("regimes that need candidates fail on a corpus without them") {
  std::vector<FunctionalUnit> bare;
  for (int i = 0; i < 30; ++i) {
    bare.push_back(testing::make_unit("b" + std::to_string(i), "plain words here", Valence::kNeutral));
  }
  CHECK_THROWS_AS(run_regime(tiny_regime("disc:two-step-ec-val"), bare, 1), RegimeError);
  CHECK_THROWS_AS(run_regime(tiny_regime("gen:single-ec"), bare, 1), RegimeError);
}

TEST_CASE("evaluation shares gold sets across regimes and checkpoints round trip") {
  const auto units = small_corpus();
  const CorpusSplit split = stratified_split(units, {}, 0);
  const Vocabulary vocab = Vocabulary::build(split.train);
  const RegimeConfig two = tiny_regime("disc:two-step-val-ec");
  const RunResult result = run_single(two, split, vocab, 1);

  std::size_t candidates = 0;
  for (const auto& u : split.test) candidates += u.candidates.size();
  CHECK(result.metrics.ec->count == candidates);
  CHECK(result.metrics.valence->count == split.test.size());

  const RunMetrics single = evaluate_regime(result.model, vocab, split.test, tiny_regime("disc:single-val"), 1);
  CHECK(single.valence->count == result.metrics.valence->count);
  std::size_t support_a = 0, support_b = 0;
  for (std::size_t c = 0; c < 3; ++c) {
    CHECK(single.valence->per_class[c].support == result.metrics.valence->per_class[c].support);
    support_a += single.valence->per_class[c].support;
    support_b += result.metrics.valence->per_class[c].support;
  }
  CHECK(support_a == support_b);

  const TrainedModel back = model_from_checkpoint(model_checkpoint(result.model, two, 1));
  CHECK(evaluate_regime(back, vocab, split.test, two, 1).to_json() == result.metrics.to_json());
  CHECK_THROWS_AS(evaluate_regime(back, vocab, {}, two, 1), RegimeError);
}
