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


#include "pfdm/experiment.h"

#include <filesystem>
#include <fstream>
#include <sstream>

#include "gtest/gtest.h"
#include "pfdm/errors.h"
#include "pfdm/image_io.h"

namespace pfdm {
namespace {

namespace fs = std::filesystem;

ExperimentConfig BlobConfig(const fs::path& out) {
  ExperimentConfig c = ExperimentConfig::FromYaml(R"(
schedule: {T: 100}
t0: 20
data:
  source: blobs
  blob_dim: 8
  blob_classes: 4
  blob_per_class: 120
  holdout_per_class: 20
  clusters: [[0, 1], [2, 3]]
  majority_count: 90
  minority_count: 8
local_training: {steps: 60, hidden_widths: [16, 16], optimizer: adam, label_conditioning: true}
global_training: {steps: 60, hidden_widths: [16, 16], optimizer: adam, label_conditioning: true}
eval:
  samples_per_class: 10
  mmd_max_samples: 30
  downstream_seeds: [0]
  reference_classifier: {epochs: 1, conv1_channels: 2, conv2_channels: 2, hidden: 8}
  downstream_classifier: {epochs: 1, conv1_channels: 2, conv2_channels: 2, hidden: 8}
)");
  c.output_dir = out;
  return c;
}

fs::path Scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / ("pfdm_exp_" + name);
  fs::remove_all(p);
  return p;
}

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TEST(ExperimentConfigTest, YamlRoundTrip) {
  const ExperimentConfig a = DefaultExperimentConfig();
  const ExperimentConfig b = ExperimentConfig::FromYaml(a.ToYaml());
  EXPECT_EQ(a.ToYaml(), b.ToYaml());
  EXPECT_EQ(a.Hash(), b.Hash());
  EXPECT_EQ(a.Hash().size(), 16u);
}

TEST(ExperimentConfigTest, HashIgnoresOutputDirOnly) {
  ExperimentConfig a = DefaultExperimentConfig();
  ExperimentConfig b = a;
  b.output_dir = "elsewhere";
  EXPECT_EQ(a.Hash(), b.Hash());
  b.seed = 1;
  EXPECT_NE(a.Hash(), b.Hash());
}

TEST(ExperimentConfigTest, RejectsUnknownKeysAndBadValues) {
  EXPECT_THROW(ExperimentConfig::FromYaml("t0: 5\nbogus: 1\n"), InvalidArgument);
  EXPECT_THROW(ExperimentConfig::FromYaml("local_training: {stpes: 3}\n"),
               InvalidArgument);
  ExperimentConfig c = BlobConfig("x");
  c.t0 = 101;
  EXPECT_THROW(c.Validate(false), InvalidArgument);
  c = BlobConfig("x");
  c.delta = 1.0;
  EXPECT_THROW(c.Validate(false), InvalidArgument);
  c = BlobConfig("x");
  c.data.blob_dim = 6;
  EXPECT_THROW(c.Validate(false), InvalidArgument);
  c = BlobConfig("x");
  c.global_training.label_conditioning = false;
  EXPECT_THROW(c.Validate(false), InvalidArgument);
  c = DefaultExperimentConfig();
  c.data.images = "/nonexistent/images.gz";
  EXPECT_THROW(c.Validate(true), InvalidArgument);
}

TEST(ExperimentTest, PfdmRunWritesStampedArtifacts) {
  const fs::path out = Scratch("pfdm");
  const auto cfg = BlobConfig(out);
  const RunSummary s = RunExperiment(cfg, true);
  EXPECT_EQ(s.checkpoints.size(), 3u);
  EXPECT_EQ(s.sample_files.size(), 2u);
  ASSERT_TRUE(s.evaluation.has_value());
  for (const char* f : {"config.yaml", "partition.csv", "privacy.txt",
                        "manifest.txt", "metrics/classifier_agreement.csv",
                        "metrics/downstream_accuracy.csv", "metrics/summary.txt"}) {
    ASSERT_TRUE(fs::exists(out / f)) << f;
    EXPECT_EQ(Slurp(out / f).rfind("# config_hash=", 0), 0u) << f;
    EXPECT_NE(Slurp(out / f).find("config_hash=" + cfg.Hash()), std::string::npos) << f;
  }
  const SampleBatch samples = LoadSampleSet(s.sample_files[0]);
  EXPECT_EQ(samples.count(), 40);
  EXPECT_TRUE(samples.has_labels());
  fs::remove_all(out);
}

TEST(ExperimentTest, BaselineModesTrainTheirModels) {
  for (RunMode mode : {RunMode::kNonCollaborative, RunMode::kNonPrivate}) {
    const fs::path out = Scratch(ToString(mode));
    auto cfg = BlobConfig(out);
    cfg.mode = mode;
    const RunSummary s = RunExperiment(cfg, false);
    EXPECT_EQ(s.checkpoints.size(), mode == RunMode::kNonPrivate ? 1u : 2u);
    EXPECT_EQ(s.sample_files.size(), 2u);
    fs::remove_all(out);
  }
}

TEST(ExperimentTest, RerunIsByteIdenticalAndResumes) {
  const fs::path a = Scratch("rerun_a"), b = Scratch("rerun_b");
  RunExperiment(BlobConfig(a), false);
  RunExperiment(BlobConfig(b), false);
  for (const char* f : {"checkpoints/global.ckpt", "checkpoints/local-client0.ckpt",
                        "samples/client0.pfss", "samples/client1.pfss"}) {
    EXPECT_EQ(Slurp(a / f), Slurp(b / f)) << f;
  }
  // Second run in the same directory reloads instead of retraining.
  const auto before = fs::last_write_time(a / "checkpoints/global.ckpt");
  RunExperiment(BlobConfig(a), false);
  EXPECT_EQ(fs::last_write_time(a / "checkpoints/global.ckpt"), before);
  EXPECT_EQ(Slurp(a / "samples/client0.pfss"), Slurp(b / "samples/client0.pfss"));
  fs::remove_all(a);
  fs::remove_all(b);
}

TEST(ExperimentTest, LoadModelsNamesTheMissingStage) {
  const fs::path out = Scratch("missing");
  fs::create_directories(out);
  try {
    LoadModels(BlobConfig(out), out / "checkpoints");
    FAIL() << "expected an error";
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("'run' stage"), std::string::npos);
  }
  fs::remove_all(out);
}

TEST(ExperimentTest, GlobalOnlyGenerationAndLabels) {
  const auto cfg = BlobConfig(Scratch("gen"));
  const PreparedData data = PrepareData(cfg);
  EXPECT_EQ(data.num_classes, 4);
  EXPECT_EQ(data.partition.clients[0].count(), 98);
  const TrainedModels models = TrainModels(cfg, data);
  const auto labels = BalancedLabels(4, 3);
  EXPECT_EQ(labels, (std::vector<int>{0, 0, 0, 1, 1, 1, 2, 2, 2, 3, 3, 3}));
  const SampleBatch g0 = GenerateForClient(cfg, models, 0, labels, 5, 0);
  const SampleBatch g1 = GenerateForClient(cfg, models, 1, labels, 5, 0);
  EXPECT_TRUE(g0.data().isApprox(g1.data(), 0.0));
  const SampleBatch p0 = GenerateForClient(cfg, models, 0, labels, 5);
  EXPECT_FALSE(p0.data().isApprox(g0.data(), 0.0));
  EXPECT_EQ(*p0.labels(), labels);
}

}  // namespace
}  // namespace pfdm
