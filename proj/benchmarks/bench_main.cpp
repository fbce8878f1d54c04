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

#include <benchmark/benchmark.h>

#include <vector>

#include "mtlaffect/corpus.hpp"
#include "mtlaffect/discriminative.hpp"
#include "mtlaffect/generative.hpp"
#include "mtlaffect/metrics.hpp"

namespace {

using namespace mtlaffect;

struct Setup {
  std::vector<FunctionalUnit> units;
  Vocabulary vocab;

  Setup() {
    units = flatten_units(generate_corpus(GeneratorSpec::strongly_dependent(64, 1)));
    vocab = Vocabulary::build(units);
  }
  TransformerConfig config() const {
    TransformerConfig c;
    c.vocab_size = vocab.size();
    return c;
  }
};

const Setup& setup() {
  static const Setup s;
  return s;
}

void BM_EncoderForward(benchmark::State& state) {
  const auto& s = setup();
  const DiscriminativeModel model(s.config());
  std::vector<DiscriminativeExample> batch;
  for (std::size_t i = 0; i < static_cast<std::size_t>(state.range(0)); ++i) {
    batch.push_back(encode_discriminative(s.units[i], s.vocab));
  }
  for (auto _ : state) {
    ag::Tape tape(false);
    benchmark::DoNotOptimize(forward_single(tape, model, batch, Task::kValence, false).valence_probs);
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_EncoderForward)->Arg(1)->Arg(32);

void BM_LmLossBackward(benchmark::State& state) {
  const auto& s = setup();
  Decoder decoder = init_decoder(s.config());
  std::vector<PromptSequence> prompts;
  for (std::size_t i = 0; i < 32; ++i) {
    const auto& u = s.units[i];
    prompts.push_back(u.candidates.empty() ? render_prompt_valence(u, s.vocab)
                                           : render_prompt_two_step(u, s.vocab, TaskOrder::kEcFirst));
  }
  for (auto _ : state) {
    ag::Tape tape;
    tape.backward(lm_loss(tape, decoder, prompts));
  }
  state.SetItemsProcessed(state.iterations() * 32);
}
BENCHMARK(BM_LmLossBackward);

void BM_ConstrainedDecode(benchmark::State& state) {
  const auto& s = setup();
  const Decoder decoder = init_decoder(s.config());
  GenSetting setting{Setting::kTwoStep, Task::kValence, TaskOrder::kEcFirst, false};
  for (auto _ : state) {
    for (std::size_t i = 0; i < 16; ++i) benchmark::DoNotOptimize(predict_unit(decoder, s.vocab, s.units[i], setting));
  }
  state.SetItemsProcessed(state.iterations() * 16);
}
BENCHMARK(BM_ConstrainedDecode);

void BM_MacroF1(benchmark::State& state) {
  Rng rng(1);
  const auto n = static_cast<std::size_t>(state.range(0));
  std::vector<int> golds(n), preds(n);
  for (std::size_t i = 0; i < n; ++i) {
    golds[i] = static_cast<int>(rng.index(3));
    preds[i] = static_cast<int>(rng.index(3));
  }
  for (auto _ : state) benchmark::DoNotOptimize(macro_f1(golds, preds, valence_label_names()).macro_f1);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}
BENCHMARK(BM_MacroF1)->Arg(1000)->Arg(100000);

void BM_GenerateCorpus(benchmark::State& state) {
  for (auto _ : state) benchmark::DoNotOptimize(generate_corpus(GeneratorSpec::calibrated()));
}
BENCHMARK(BM_GenerateCorpus)->Unit(benchmark::kMillisecond);

}  // namespace

BENCHMARK_MAIN();
