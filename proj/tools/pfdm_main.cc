//
// Copyright 2026 The PFDM Authors
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
//


// Command-line front end: account, partition, run, sample, eval, print-config.

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "pfdm/data.h"
#include "pfdm/errors.h"
#include "pfdm/eval.h"
#include "pfdm/experiment.h"
#include "pfdm/image_io.h"
#include "pfdm/privacy.h"
#include "pfdm/rng.h"

namespace fs = std::filesystem;

namespace {

constexpr int kExitConfigError = 2;
constexpr int kExitStageFailure = 3;

// Thrown for failures inside a pipeline stage (as opposed to bad input).
class StageFailure : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct ConfigFlags {
  std::string path;
  std::string mode;
  std::optional<std::uint64_t> seed;
  std::string output;

  void Register(CLI::App* cmd) {
    cmd->add_option("-c,--config", path, "experiment config (YAML)");
    cmd->add_option("--mode", mode, "pfdm | non-collaborative | non-private");
    cmd->add_option("--seed", seed, "override the experiment seed");
    cmd->add_option("-o,--output", output, "override the output directory");
  }

  pfdm::ExperimentConfig Resolve() const {
    pfdm::ExperimentConfig c = path.empty()
                                   ? pfdm::DefaultExperimentConfig()
                                   : pfdm::ExperimentConfig::Load(path);
    if (!mode.empty()) c.mode = pfdm::ParseRunMode(mode);
    if (seed) c.seed = *seed;
    if (!output.empty()) c.output_dir = output;
    if (const char* root = std::getenv("PFDM_OUTPUT_ROOT");
        root && *root && c.output_dir.is_relative()) {
      c.output_dir = fs::path(root) / c.output_dir;
    }
    return c;
  }
};

struct AccountFlags {
  std::string config;
  int t0 = 100;
  double bound = 1.0;
  std::string mode = "per_coordinate";
  double delta = 1e-5;
  int group = 1;
  int T = 1000;
  double beta_start = 1e-4;
  double beta_end = 0.02;
  std::string sweep;
  std::optional<double> target;
};

int RunAccount(const AccountFlags& f, CLI::App* cmd) {
  pfdm::PrivacyQuery q;
  q.t0 = f.t0;
  q.bound = f.bound;
  q.mode = pfdm::ParseBoundMode(f.mode);
  q.delta = f.delta;
  q.group_size = f.group;
  pfdm::NoiseSchedule schedule = pfdm::MakeLinearSchedule(f.T, f.beta_start, f.beta_end);
  if (!f.config.empty()) {
    const auto c = pfdm::ExperimentConfig::Load(f.config);
    schedule = c.schedule();
    if (cmd->count("--t0") == 0) q.t0 = c.t0;
    if (cmd->count("--delta") == 0) q.delta = c.delta;
    if (cmd->count("--mode") == 0) q.mode = c.bound_mode;
  }
  if (q.group_size > 1 && q.mode == pfdm::BoundMode::kPerSample) {
    throw pfdm::InvalidArgument(
        "--group requires --mode per_coordinate (group privacy is defined "
        "over coordinates)");
  }
  if (f.target) {
    const auto s = pfdm::MinT0ForEpsilon(*f.target, q.bound, q.delta, schedule);
    if (s.outcome == pfdm::T0Search::Outcome::kUnreachable) {
      std::cout << "target epsilon " << *f.target
                << " unreachable: epsilon at t0=T is " << s.epsilon << '\n';
      return kExitStageFailure;
    }
    std::cout << "min_t0: " << s.t0 << "\nepsilon_at_min_t0: " << s.epsilon
              << '\n';
    return 0;
  }
  pfdm::WriteReport(pfdm::Account(q, schedule), std::cout);
  if (!f.sweep.empty()) {
    std::ofstream out(f.sweep);
    if (!out) throw pfdm::InvalidArgument("cannot write " + f.sweep);
    pfdm::WriteBudgetCsv(pfdm::BudgetSweep(schedule, q.bound, q.delta, q.mode),
                         out);
    std::cout << "sweep: " << f.sweep << " (" << schedule.T() << " rows)\n";
  }
  return 0;
}

int RunPartition(const ConfigFlags& flags, const std::string& manifest) {
  const auto config = flags.Resolve();
  config.Validate();
  const auto data = pfdm::PrepareData(config);
  fs::path out = manifest.empty() ? config.output_dir / "partition.csv"
                                  : fs::path(manifest);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  std::ofstream file(out);
  if (!file) throw pfdm::InvalidArgument("cannot write " + out.string());
  pfdm::WritePartitionManifest(data.partition, file);
  for (std::size_t i = 0; i < data.partition.clients.size(); ++i) {
    std::cout << "client " << i << ": "
              << data.partition.clients[i].count() << " samples\n";
  }
  std::cout << "manifest: " << out.string() << '\n';
  return 0;
}

int RunRun(const ConfigFlags& flags, bool no_eval) {
  const auto config = flags.Resolve();
  config.Validate();
  pfdm::RunSummary s;
  try {
    s = pfdm::RunExperiment(config, !no_eval);
  } catch (const pfdm::InvalidArgument&) {
    throw;
  } catch (const std::exception& e) {
    throw StageFailure(e.what());
  }
  std::cout << "output: " << s.output_dir.string() << '\n'
            << "config_hash: " << config.Hash() << '\n'
            << "checkpoints: " << s.checkpoints.size() << '\n'
            << "epsilon: " << s.privacy.epsilon << '\n';
  if (s.evaluation) {
    std::cout << "agreement: " << s.evaluation->agreement.aggregate << '\n'
              << "downstream_accuracy: " << s.evaluation->downstream.aggregate
              << " +- " << s.evaluation->downstream.aggregate_std << '\n'
              << "minority_mmd2: " << s.evaluation->minority_mmd << '\n';
  }
  return 0;
}

struct SampleFlags {
  std::uint32_t client = 0;
  pfdm::Index per_class = 10;
  std::optional<int> t0;
  std::string out;
  std::string png;
};

int RunSample(const ConfigFlags& flags, const SampleFlags& f) {
  const auto config = flags.Resolve();
  config.Validate(false);
  const auto models = pfdm::LoadModels(config, config.output_dir / "checkpoints");
  int num_classes = config.data.source == "blobs" ? config.data.blob_classes : 0;
  for (const auto& c : config.data.clusters) {
    for (int y : c) num_classes = std::max(num_classes, y + 1);
  }
  const auto labels = pfdm::BalancedLabels(num_classes, f.per_class);
  const auto batch = pfdm::GenerateForClient(
      config, models, f.client, labels,
      pfdm::DeriveSeed(config.seed, "sample/cli/client" + std::to_string(f.client)),
      f.t0);
  const fs::path out = f.out.empty()
                           ? config.output_dir / "samples" /
                                 ("sampled-client" + std::to_string(f.client) + ".pfss")
                           : fs::path(f.out);
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  pfdm::SaveSampleSet(out, batch);
  std::cout << "samples: " << out.string() << " (" << batch.count() << ")\n";
  if (!f.png.empty()) {
    std::vector<pfdm::SampleBatch> rows;
    for (int c = 0; c < num_classes; ++c) rows.push_back(pfdm::FilterLabels(batch, {c}));
    pfdm::WritePngGrid(f.png, rows, static_cast<int>(std::min<pfdm::Index>(f.per_class, 16)),
                       config.data.range == pfdm::PixelRange::kUnit ? 0.0 : -1.0, 1.0);
    std::cout << "grid: " << f.png << '\n';
  }
  return 0;
}

int RunEval(const ConfigFlags& flags, const std::string& samples_path,
            const std::string& against) {
  const auto samples = pfdm::LoadSampleSet(samples_path);
  if (!against.empty()) {
    const auto other = pfdm::LoadSampleSet(against);
    const auto r = pfdm::KernelMmd(samples.data(), other.data());
    std::cout << "mmd2: " << r.mmd2 << "\nbandwidth: " << r.bandwidth << '\n';
    return 0;
  }
  const auto config = flags.Resolve();
  config.Validate();
  const auto data = pfdm::PrepareData(config);
  const auto reference = pfdm::TrainReferenceClassifier(config, data);
  const auto ev = pfdm::EvaluateClient(config, data, reference, samples);
  ev.agreement.WriteSummary(std::cout);
  ev.agreement.WriteCsv(std::cout);
  ev.downstream.WriteSummary(std::cout);
  std::cout << "minority_mmd2: " << ev.minority_mmd
            << "\nmajority_mmd2: " << ev.majority_mmd << '\n';
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Personalized federated diffusion models"};
  app.require_subcommand(1);

  AccountFlags acc;
  CLI::App* account = app.add_subcommand("account", "privacy accountant");
  account->add_option("-c,--config", acc.config, "take schedule, t0, delta from a config");
  account->add_option("--t0", acc.t0, "release step");
  account->add_option("--bound", acc.bound, "norm bound C (per_sample) or c (per_coordinate)");
  account->add_option("--mode", acc.mode, "per_sample | per_coordinate");
  account->add_option("--delta", acc.delta, "delta");
  account->add_option("-k,--group", acc.group, "group size (per_coordinate only)");
  account->add_option("--T", acc.T, "diffusion steps");
  account->add_option("--beta-start", acc.beta_start, "first beta");
  account->add_option("--beta-end", acc.beta_end, "last beta");
  account->add_option("--sweep", acc.sweep, "write the per-t0 budget table as CSV");
  account->add_option("--target-epsilon", acc.target, "solve for the smallest t0 meeting epsilon");

  ConfigFlags partition_flags;
  std::string manifest;
  CLI::App* partition = app.add_subcommand("partition", "write the client partition manifest");
  partition_flags.Register(partition);
  partition->add_option("--manifest", manifest, "manifest CSV path");

  ConfigFlags run_flags;
  bool no_eval = false;
  CLI::App* run = app.add_subcommand("run", "train, sample and evaluate");
  run_flags.Register(run);
  run->add_flag("--no-eval", no_eval, "skip evaluation");

  ConfigFlags sample_flags;
  SampleFlags sf;
  CLI::App* sample = app.add_subcommand("sample", "sample from trained checkpoints");
  sample_flags.Register(sample);
  sample->add_option("--client", sf.client, "client id");
  sample->add_option("--per-class", sf.per_class, "samples per class");
  sample->add_option("--t0", sf.t0, "split step override (0 = global model only)");
  sample->add_option("--out", sf.out, "sample-set output path");
  sample->add_option("--png", sf.png, "optional PNG grid path");

  ConfigFlags eval_flags;
  std::string samples_path, against;
  CLI::App* eval = app.add_subcommand("eval", "evaluate a sample set");
  eval_flags.Register(eval);
  eval->add_option("--samples", samples_path, "sample-set file")->required();
  eval->add_option("--against", against, "second sample set (MMD only)");

  ConfigFlags print_flags;
  CLI::App* print = app.add_subcommand("print-config", "print the effective config");
  print_flags.Register(print);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitConfigError;
  }

  try {
    if (*account) return RunAccount(acc, account);
    if (*partition) return RunPartition(partition_flags, manifest);
    if (*run) return RunRun(run_flags, no_eval);
    if (*sample) return RunSample(sample_flags, sf);
    if (*eval) return RunEval(eval_flags, samples_path, against);
    if (*print) {
      std::cout << print_flags.Resolve().ToYaml();
      return 0;
    }
  } catch (const pfdm::InvalidArgument& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfigError;
  } catch (const StageFailure& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return kExitStageFailure;
  } catch (const std::exception& e) {
    std::cerr << "stage failed: " << e.what() << '\n';
    return kExitStageFailure;
  }
  return 0;
}
