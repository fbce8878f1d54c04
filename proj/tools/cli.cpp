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

#include "cli.hpp"

#include <algorithm>
#include <atomic>
#include <filesystem>
#include <fstream>
#include <map>
#include <mutex>
#include <optional>
#include <ranges>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "json.hpp"
#include "mtlaffect/checkpoint.hpp"
#include "mtlaffect/corpus.hpp"
#include "mtlaffect/encodings.hpp"
#include "mtlaffect/error.hpp"
#include "mtlaffect/grid.hpp"
#include "mtlaffect/kv_config.hpp"
#include "mtlaffect/metrics.hpp"
#include "mtlaffect/regime.hpp"

namespace mtlaffect::cli {

namespace fs = std::filesystem;

namespace {

/// Usage or configuration problem; maps to exit code 2.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw UsageError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const fs::path& path, const std::string& text) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << text;
}

std::string safe_name(std::string id) {
  std::replace(id.begin(), id.end(), ':', '_');
  return id;
}

// ---------------------------------------------------------------------------
// gen-data / stats

struct GenDataArgs {
  std::string spec;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::string preset = "calibrated";
};

GeneratorSpec load_generator_spec(const GenDataArgs& a) {
  KvConfig kv;
  if (!a.spec.empty()) kv = KvConfig::load(a.spec);
  std::string preset = kv.get_string("preset", a.preset);
  const KvConfig known = KvConfig::parse(generator_spec_to_text(GeneratorSpec{}));
  for (const auto& [key, value] : kv.values()) {
    if (key != "preset" && !known.contains(key)) throw SpecError(key, "unknown generator field");
  }
  GeneratorSpec base;
  if (preset == "calibrated") {
    base = GeneratorSpec::calibrated();
  } else if (preset == "strongly-dependent") {
    base = GeneratorSpec::strongly_dependent(kv.get_uint("total_units", 500), kv.get_uint("seed", 1));
  } else {
    throw SpecError("preset", "expected 'calibrated' or 'strongly-dependent'");
  }
  kv.apply_env_overrides(known.values() | std::views::keys);
  GeneratorSpec spec = generator_spec_from_config(kv, base);
  if (a.seed) spec.seed = *a.seed;
  validate_generator_spec(spec);
  return spec;
}

int cmd_gen_data(const GenDataArgs& a, std::ostream& out) {
  const GeneratorSpec spec = load_generator_spec(a);
  const auto corpus = generate_corpus(spec);
  save_corpus(corpus, a.out);
  out << corpus_stats(flatten_units(corpus)).to_text();
  return kExitOk;
}

struct StatsArgs {
  std::string corpus;
  bool json = false;
};

int cmd_stats(const StatsArgs& a, std::ostream& out) {
  const auto units = flatten_units(load_corpus(a.corpus));
  const StatsReport stats = corpus_stats(units);
  const IntersectionReport inter = ec_intersection_stats(units);
  if (a.json) {
    nlohmann::ordered_json j;
    j["stats"] = nlohmann::ordered_json::parse(stats.to_json());
    j["ec_intersection"] = nlohmann::ordered_json::parse(inter.to_json());
    out << j.dump(2) << '\n';
  } else {
    out << stats.to_text() << inter.to_text();
  }
  return kExitOk;
}

// ---------------------------------------------------------------------------
// train / evaluate

RegimeConfig load_regime(const std::string& id, const std::string& config_path) {
  RegimeConfig regime = RegimeConfig::parse(id);
  KvConfig kv;
  if (!config_path.empty()) kv = KvConfig::load(config_path);
  kv.apply_env_overrides(regime_config_keys());
  apply_config(regime, kv);
  return regime;
}

std::string checkpoint_metadata_with(const CheckpointFile& file, const RegimeConfig& regime, const Vocabulary& vocab) {
  auto meta = nlohmann::ordered_json::parse(file.metadata);
  meta["split_seed"] = regime.split_seed;
  meta["vocabulary"] = vocab.tokens();
  return meta.dump();
}

struct TrainArgs {
  std::string corpus;
  std::string regime;
  std::string config;
  std::string out;
  std::uint64_t seed = 0;
};

int cmd_train(const TrainArgs& a, std::ostream& out) {
  const RegimeConfig regime = load_regime(a.regime, a.config);
  const auto units = flatten_units(load_corpus(a.corpus));
  const CorpusSplit split = stratified_split(units, SplitRatios{}, regime.split_seed);
  const Vocabulary vocab = Vocabulary::build(split.train);
  RunResult result = run_single(regime, split, vocab, a.seed);

  const fs::path dir(a.out);
  fs::create_directories(dir);
  CheckpointFile ckpt = model_checkpoint(result.model, regime, a.seed);
  ckpt.metadata = checkpoint_metadata_with(ckpt, regime, vocab);
  save_checkpoint(ckpt, dir / "model.ckpt");
  nlohmann::ordered_json log = nlohmann::ordered_json::parse(result.log.to_json());
  if (result.phase1_log) log["phase1"] = nlohmann::ordered_json::parse(result.phase1_log->to_json());
  write_file(dir / "train_log.json", log.dump(2) + "\n");
  write_file(dir / "predictions.jsonl", prediction_dump(split.test, result.predictions));
  write_file(dir / "metrics.json", result.metrics.to_json() + "\n");
  write_file(dir / "config.txt", regime_config_to_text(regime));
  out << result.metrics.to_json() << '\n';
  return kExitOk;
}

struct EvaluateArgs {
  std::string corpus;
  std::string checkpoint;
  std::string regime;
  std::string split = "test";
  std::string predictions;
};

int cmd_evaluate(const EvaluateArgs& a, std::ostream& out) {
  const CheckpointFile ckpt = load_checkpoint(a.checkpoint);
  const auto meta = nlohmann::json::parse(ckpt.metadata);
  if (!meta.contains("vocabulary") || !meta.contains("regime")) {
    throw UsageError("checkpoint lacks the vocabulary or regime written by 'train'");
  }
  const Vocabulary vocab = Vocabulary::from_tokens(meta["vocabulary"].get<std::vector<std::string>>());
  RegimeConfig regime = RegimeConfig::parse(a.regime.empty() ? meta["regime"].get<std::string>() : a.regime);
  regime.split_seed = meta.value("split_seed", std::uint64_t{0});
  const TrainedModel model = model_from_checkpoint(ckpt);
  const bool family_ok = (regime.family == ModelFamily::kDiscriminative) ==
                         std::holds_alternative<DiscriminativeModel>(model);
  if (!family_ok) throw RegimeError("regime " + regime.id() + " does not match the checkpoint's model family");

  const auto units = flatten_units(load_corpus(a.corpus));
  std::vector<FunctionalUnit> chosen;
  if (a.split == "all") {
    chosen = units;
  } else {
    const CorpusSplit split = stratified_split(units, SplitRatios{}, regime.split_seed);
    if (a.split == "train") {
      chosen = split.train;
    } else if (a.split == "validation") {
      chosen = split.validation;
    } else if (a.split == "test") {
      chosen = split.test;
    } else {
      throw UsageError("--split must be train, validation, test or all");
    }
  }
  std::vector<UnitPrediction> preds;
  const RunMetrics m = evaluate_regime(model, vocab, chosen, regime, meta.value("seed", std::uint64_t{0}), &preds);
  if (!a.predictions.empty()) write_file(a.predictions, prediction_dump(chosen, preds));
  out << m.to_json() << '\n';
  return kExitOk;
}

// ---------------------------------------------------------------------------
// grid / reproduce

void write_grid(const ResultsGrid& grid, const std::string& out_prefix, const std::string& format, std::ostream& out) {
  const bool md = format == "markdown" || format == "both";
  const bool csv = format == "csv" || format == "both";
  if (!md && !csv) throw UsageError("--format must be markdown, csv or both");
  if (out_prefix.empty()) {
    if (md) out << emit_grid(grid, GridFormat::kMarkdown);
    if (csv) out << emit_grid(grid, GridFormat::kCsv);
    return;
  }
  if (md) write_file(out_prefix + ".md", emit_grid(grid, GridFormat::kMarkdown));
  if (csv) write_file(out_prefix + ".csv", emit_grid(grid, GridFormat::kCsv));
}

struct GridArgs {
  std::vector<std::string> runs;
  std::string format = "markdown";
  std::string out;
};

int cmd_grid(const GridArgs& a, std::ostream& out) {
  std::map<std::string, std::vector<RunMetrics>> by_regime;
  for (const auto& path : a.runs) {
    std::istringstream lines(read_file(path));
    std::string line;
    while (std::getline(lines, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      RunMetrics m = RunMetrics::from_json(line);
      by_regime[m.regime].push_back(std::move(m));
    }
  }
  ResultsGrid grid;
  for (auto& [id, runs] : by_regime) {
    std::sort(runs.begin(), runs.end(), [](const auto& x, const auto& y) { return x.seed < y.seed; });
    grid.add_runs(RegimeConfig::parse(id), runs);
  }
  write_grid(grid, a.out, a.format, out);
  return kExitOk;
}

struct ReproduceArgs {
  std::string corpus;
  std::size_t seeds = 3;
  std::string out;
  std::string config;
  std::size_t jobs = 1;
  std::vector<std::string> regimes;
};

int cmd_reproduce(const ReproduceArgs& a, std::ostream& out) {
  if (a.seeds == 0) throw UsageError("--seeds must be positive");
  const std::vector<std::string> ids = a.regimes.empty() ? grid_regime_ids() : a.regimes;
  std::vector<RegimeConfig> regimes;
  for (const auto& id : ids) regimes.push_back(load_regime(id, a.config));

  const auto units = flatten_units(load_corpus(a.corpus));
  // All regimes share one split: the first regime's split seed.
  const std::uint64_t split_seed = regimes.front().split_seed;
  const CorpusSplit split = stratified_split(units, SplitRatios{}, split_seed);
  const Vocabulary vocab = Vocabulary::build(split.train);
  const fs::path dir(a.out);
  fs::create_directories(dir / "runs");
  fs::create_directories(dir / "logs");

  struct Job {
    std::size_t regime;
    std::uint64_t seed;
  };
  std::vector<Job> jobs;
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    for (std::uint64_t s = 0; s < a.seeds; ++s) jobs.push_back({r, s});
  }
  std::vector<std::optional<RunMetrics>> results(jobs.size());
  std::vector<std::string> logs(jobs.size());

  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t j = next++; j < jobs.size(); j = next++) {
      const RegimeConfig& regime = regimes[jobs[j].regime];
      const std::uint64_t seed = jobs[j].seed;
      std::ostringstream log;
      log << "seed " << seed << '\n';
      try {
        RegimeConfig r = regime;
        r.split_seed = split_seed;
        RunResult result = run_single(r, split, vocab, seed);
        if (result.phase1_log) log << "phase1 " << result.phase1_log->to_json() << '\n';
        log << "train " << result.log.to_json() << '\n';
        log << "metrics " << result.metrics.to_json() << '\n';
        results[j] = std::move(result.metrics);
      } catch (const std::exception& e) {
        log << "error " << e.what() << '\n';
      }
      logs[j] = log.str();
    }
  };
  const std::size_t n_threads = std::max<std::size_t>(1, std::min(a.jobs, jobs.size()));
  std::vector<std::thread> threads;
  for (std::size_t t = 1; t < n_threads; ++t) threads.emplace_back(worker);
  worker();
  for (auto& t : threads) t.join();

  ResultsGrid grid;
  for (std::size_t r = 0; r < regimes.size(); ++r) {
    const std::string name = safe_name(regimes[r].id());
    const std::string log_ref = "logs/" + name + ".log";
    std::string log_text, runs_text;
    std::vector<RunMetrics> runs;
    bool failed = false;
    for (std::size_t j = 0; j < jobs.size(); ++j) {
      if (jobs[j].regime != r) continue;
      log_text += logs[j];
      if (results[j]) {
        runs_text += results[j]->to_json() + "\n";
        runs.push_back(*results[j]);
      } else {
        failed = true;
      }
    }
    write_file(dir / log_ref, log_text);
    write_file(dir / "runs" / (name + ".jsonl"), runs_text);
    if (failed) {
      grid.add_failure(regimes[r].id(), log_ref);
    } else {
      grid.add_runs(regimes[r], runs);
    }
  }
  write_grid(grid, (dir / "grid").string(), "both", out);
  out << emit_grid(grid, GridFormat::kMarkdown);
  return grid.failures().empty() ? kExitOk : kExitTraining;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Valence and emotion-carrier multi-task experiments", "mtlaffect"};
  app.require_subcommand(1);

  GenDataArgs gen;
  auto* gen_cmd = app.add_subcommand("gen-data", "Generate a synthetic corpus and print its statistics");
  gen_cmd->add_option("--spec", gen.spec, "Generator spec file (key=value)")->check(CLI::ExistingFile);
  gen_cmd->add_option("--out", gen.out, "Output corpus (JSONL)")->required();
  gen_cmd->add_option("--seed", gen.seed, "Generator seed (overrides the spec)");
  gen_cmd->add_option("--preset", gen.preset, "calibrated | strongly-dependent (a 'preset' key in the spec wins)");

  StatsArgs stats;
  auto* stats_cmd = app.add_subcommand("stats", "Print corpus statistics");
  stats_cmd->add_option("--corpus", stats.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  stats_cmd->add_flag("--json", stats.json, "Emit JSON");

  TrainArgs train;
  auto* train_cmd = app.add_subcommand("train", "Train and test one regime");
  train_cmd->add_option("--corpus", train.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  train_cmd->add_option("--regime", train.regime, "Regime id, e.g. disc:joint")->required();
  train_cmd->add_option("--config", train.config, "Config file (key=value)")->check(CLI::ExistingFile);
  train_cmd->add_option("--out", train.out, "Output directory")->required();
  train_cmd->add_option("--seed", train.seed, "Run seed");

  EvaluateArgs eval;
  auto* eval_cmd = app.add_subcommand("evaluate", "Evaluate a checkpoint written by 'train'");
  eval_cmd->add_option("--corpus", eval.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--checkpoint", eval.checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);
  eval_cmd->add_option("--regime", eval.regime, "Evaluate under another regime of the same family");
  eval_cmd->add_option("--split", eval.split, "train | validation | test | all");
  eval_cmd->add_option("--predictions", eval.predictions, "Write the prediction dump here");

  GridArgs grid;
  auto* grid_cmd = app.add_subcommand("grid", "Aggregate run metrics into the results grid");
  grid_cmd->add_option("--runs", grid.runs, "Metrics files (one JSON object per line)")
      ->required()
      ->check(CLI::ExistingFile);
  grid_cmd->add_option("--format", grid.format, "markdown | csv | both");
  grid_cmd->add_option("--out", grid.out, "Output path prefix (stdout when absent)");

  ReproduceArgs repro;
  auto* repro_cmd = app.add_subcommand("reproduce", "Run every regime of the results grid");
  repro_cmd->add_option("--corpus", repro.corpus, "Corpus file")->required()->check(CLI::ExistingFile);
  repro_cmd->add_option("--seeds", repro.seeds, "Seeds per regime");
  repro_cmd->add_option("--out", repro.out, "Output directory")->required();
  repro_cmd->add_option("--config", repro.config, "Config file applied to every regime")->check(CLI::ExistingFile);
  repro_cmd->add_option("--jobs", repro.jobs, "Concurrent runs");
  repro_cmd->add_option("--regimes", repro.regimes, "Subset of regime ids");

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*gen_cmd) return cmd_gen_data(gen, out);
    if (*stats_cmd) return cmd_stats(stats, out);
    if (*train_cmd) return cmd_train(train, out);
    if (*eval_cmd) return cmd_evaluate(eval, out);
    if (*grid_cmd) return cmd_grid(grid, out);
    if (*repro_cmd) return cmd_reproduce(repro, out);
  } catch (const TrainingAborted& e) {
    err << "training aborted: " << e.what() << '\n';
    return kExitTraining;
  } catch (const SpecError& e) {
    err << "configuration error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const RegimeError& e) {
    err << "regime error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ParseError& e) {
    err << "parse error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const ValidationError& e) {
    err << "invalid corpus: " << e.what() << '\n';
    return kExitUsage;
  } catch (const UsageError& e) {
    err << e.what() << '\n';
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitTraining;
  }
  return kExitUsage;
}

}  // namespace mtlaffect::cli
