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

#include <yaml-cpp/yaml.h>

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>

#include "pfdm/checkpoint.h"
#include "pfdm/errors.h"
#include "pfdm/federation.h"
#include "pfdm/image_io.h"
#include "pfdm/mlp_denoiser.h"
#include "pfdm/rng.h"
#include "pfdm/transport.h"

namespace pfdm {
namespace {

namespace fs = std::filesystem;

constexpr int kClients = 2;

std::string ShortestDouble(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

YAML::Node Scalar(double v) { return YAML::Node(ShortestDouble(v)); }

void CheckKeys(const YAML::Node& node, const std::string& where,
               std::initializer_list<const char*> allowed) {
  if (!node || node.IsNull()) return;
  if (!node.IsMap()) throw InvalidArgument(where + ": expected a mapping");
  for (const auto& kv : node) {
    const auto key = kv.first.as<std::string>();
    if (std::none_of(allowed.begin(), allowed.end(),
                     [&](const char* a) { return key == a; })) {
      throw InvalidArgument(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
void Read(const YAML::Node& node, const char* key, T& field) {
  if (node && node[key]) field = node[key].template as<T>();
}

void ReadPath(const YAML::Node& node, const char* key, fs::path& field) {
  if (node && node[key]) field = node[key].as<std::string>();
}

YAML::Node TrainingToYaml(const TrainingConfig& c) {
  YAML::Node n;
  n["learning_rate"] = Scalar(c.learning_rate);
  n["batch_size"] = c.batch_size;
  n["steps"] = c.steps;
  n["seed"] = c.seed;
  n["optimizer"] = ToString(c.optimizer);
  n["momentum"] = Scalar(c.momentum);
  n["adam_beta1"] = Scalar(c.adam_beta1);
  n["adam_beta2"] = Scalar(c.adam_beta2);
  n["adam_epsilon"] = Scalar(c.adam_epsilon);
  n["grad_clip_norm"] = Scalar(c.grad_clip_norm);
  n["label_conditioning"] = c.label_conditioning;
  n["time_embedding"] = ToString(c.time_embedding);
  n["time_embedding_dim"] = c.time_embedding_dim;
  YAML::Node widths(YAML::NodeType::Sequence);
  for (int w : c.hidden_widths) widths.push_back(w);
  widths.SetStyle(YAML::EmitterStyle::Flow);
  n["hidden_widths"] = widths;
  return n;
}

TrainingConfig TrainingFromYaml(const YAML::Node& n, const std::string& where,
                                TrainingConfig c) {
  CheckKeys(n, where,
            {"learning_rate", "batch_size", "steps", "seed", "optimizer",
             "momentum", "adam_beta1", "adam_beta2", "adam_epsilon",
             "grad_clip_norm", "label_conditioning", "time_embedding",
             "time_embedding_dim", "hidden_widths"});
  if (!n) return c;
  Read(n, "learning_rate", c.learning_rate);
  Read(n, "batch_size", c.batch_size);
  Read(n, "steps", c.steps);
  Read(n, "seed", c.seed);
  if (n["optimizer"]) c.optimizer = ParseOptimizerKind(n["optimizer"].as<std::string>());
  Read(n, "momentum", c.momentum);
  Read(n, "adam_beta1", c.adam_beta1);
  Read(n, "adam_beta2", c.adam_beta2);
  Read(n, "adam_epsilon", c.adam_epsilon);
  Read(n, "grad_clip_norm", c.grad_clip_norm);
  Read(n, "label_conditioning", c.label_conditioning);
  if (n["time_embedding"]) {
    c.time_embedding = ParseTimeEmbedding(n["time_embedding"].as<std::string>());
  }
  Read(n, "time_embedding_dim", c.time_embedding_dim);
  Read(n, "hidden_widths", c.hidden_widths);
  return c;
}

YAML::Node ClassifierToYaml(const ClassifierConfig& c) {
  YAML::Node n;
  n["num_classes"] = c.num_classes;
  n["conv1_channels"] = c.conv1_channels;
  n["conv2_channels"] = c.conv2_channels;
  n["hidden"] = c.hidden;
  n["epochs"] = c.epochs;
  n["batch_size"] = c.batch_size;
  n["learning_rate"] = Scalar(c.learning_rate);
  n["optimizer"] = ToString(c.optimizer);
  n["seed"] = c.seed;
  return n;
}

ClassifierConfig ClassifierFromYaml(const YAML::Node& n,
                                    const std::string& where,
                                    ClassifierConfig c) {
  CheckKeys(n, where,
            {"num_classes", "conv1_channels", "conv2_channels", "hidden",
             "epochs", "batch_size", "learning_rate", "optimizer", "seed"});
  if (!n) return c;
  Read(n, "num_classes", c.num_classes);
  Read(n, "conv1_channels", c.conv1_channels);
  Read(n, "conv2_channels", c.conv2_channels);
  Read(n, "hidden", c.hidden);
  Read(n, "epochs", c.epochs);
  Read(n, "batch_size", c.batch_size);
  Read(n, "learning_rate", c.learning_rate);
  if (n["optimizer"]) c.optimizer = ParseOptimizerKind(n["optimizer"].as<std::string>());
  Read(n, "seed", c.seed);
  return c;
}

std::string ToString(PixelRange r) {
  return r == PixelRange::kUnit ? "unit" : "signed";
}
PixelRange ParsePixelRange(const std::string& s) {
  if (s == "unit") return PixelRange::kUnit;
  if (s == "signed") return PixelRange::kSigned;
  throw InvalidArgument("unknown pixel range '" + s + "'");
}

std::string ToString(NormPolicy::Mode m) {
  return m == NormPolicy::Mode::kReport ? "report" : "clip";
}
NormPolicy::Mode ParseNormMode(const std::string& s) {
  if (s == "report") return NormPolicy::Mode::kReport;
  if (s == "clip") return NormPolicy::Mode::kClip;
  throw InvalidArgument("unknown norm policy mode '" + s + "'");
}

void RequireFile(const fs::path& p, const std::string& what) {
  if (p.empty()) throw InvalidArgument(what + " is not set");
  if (!fs::exists(p)) {
    throw InvalidArgument(what + " does not exist: " + p.string());
  }
}

SampleBatch MakeBlobs(const DataConfig& d, std::uint64_t seed) {
  RngStream rng(seed, "data/blobs");
  const Matrix means = 2.0 * rng.NormalMatrix(d.blob_classes, d.blob_dim);
  const Index n = d.blob_classes * d.blob_per_class;
  Matrix x(n, d.blob_dim);
  std::vector<int> y(static_cast<std::size_t>(n));
  for (Index i = 0; i < n; ++i) {
    const int c = static_cast<int>(i / d.blob_per_class);
    x.row(i) = means.row(c) + 0.5 * rng.NormalMatrix(1, d.blob_dim);
    y[static_cast<std::size_t>(i)] = c;
  }
  return SampleBatch(std::move(x), {1, 2, d.blob_dim / 2}, std::move(y));
}

SampleBatch Preprocess(SampleBatch batch, const DataConfig& d) {
  if (d.resize > 0) batch = ResizeArea(batch, d.resize, d.resize);
  return ToPixelRange(batch, d.range);
}

std::string ClientName(std::uint32_t id) {
  return "client" + std::to_string(id);
}

struct ModelFile {
  std::string stage;
  std::optional<std::uint32_t> client;
  fs::path name;
};

std::vector<ModelFile> ExpectedModels(RunMode mode) {
  std::vector<ModelFile> out;
  switch (mode) {
    case RunMode::kPfdm:
      for (std::uint32_t i = 0; i < kClients; ++i) {
        out.push_back({"local", i, "local-" + ClientName(i) + ".ckpt"});
      }
      out.push_back({"global", std::nullopt, "global.ckpt"});
      break;
    case RunMode::kNonCollaborative:
      for (std::uint32_t i = 0; i < kClients; ++i) {
        out.push_back({"independent", i, "independent-" + ClientName(i) + ".ckpt"});
      }
      break;
    case RunMode::kNonPrivate:
      out.push_back({"pooled", std::nullopt, "pooled.ckpt"});
      break;
  }
  return out;
}

// Stores the model (when `dir` is set) and returns the f32-rounded copy, so
// freshly trained and reloaded runs sample identically.
std::shared_ptr<Denoiser> Persist(const ExperimentConfig& config,
                                  const Denoiser& model, const ModelFile& file,
                                  const fs::path& dir,
                                  std::vector<fs::path>& written) {
  const auto* mlp = dynamic_cast<const MlpDenoiser*>(&model);
  if (!mlp) throw InvalidArgument("only mlp denoisers can be checkpointed");
  Checkpoint ckpt = mlp->ToCheckpoint();
  ckpt.attributes["config_hash"] = config.Hash();
  ckpt.attributes["seed"] = std::to_string(config.seed);
  ckpt.attributes["stage"] = file.stage;
  ckpt.attributes["mode"] = ToString(config.mode);
  if (file.client) ckpt.attributes["client"] = std::to_string(*file.client);
  if (!dir.empty()) {
    fs::create_directories(dir);
    ckpt.Save(dir / file.name);
    written.push_back(dir / file.name);
  }
  return MlpDenoiser::FromCheckpoint(Checkpoint::Decode(ckpt.Encode()));
}

bool CheckpointsUsable(const ExperimentConfig& config, const fs::path& dir) {
  if (dir.empty()) return false;
  const std::string hash = config.Hash();
  for (const auto& f : ExpectedModels(config.mode)) {
    if (!fs::exists(dir / f.name)) return false;
    try {
      if (Checkpoint::Load(dir / f.name).Attribute("config_hash") != hash) {
        return false;
      }
    } catch (const std::exception&) {
      return false;
    }
  }
  return true;
}

void WriteStamped(const fs::path& path, const std::string& stamp,
                  const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw InvalidArgument("cannot write " + path.string());
  out << "# " << stamp << '\n' << body;
}

}  // namespace

std::string ToString(RunMode mode) {
  switch (mode) {
    case RunMode::kPfdm:
      return "pfdm";
    case RunMode::kNonCollaborative:
      return "non-collaborative";
    case RunMode::kNonPrivate:
      return "non-private";
  }
  return "?";
}

RunMode ParseRunMode(const std::string& text) {
  if (text == "pfdm") return RunMode::kPfdm;
  if (text == "non-collaborative") return RunMode::kNonCollaborative;
  if (text == "non-private") return RunMode::kNonPrivate;
  throw InvalidArgument("unknown run mode '" + text +
                        "' (expected pfdm, non-collaborative or non-private)");
}

NoiseSchedule ExperimentConfig::schedule() const {
  return MakeLinearSchedule(T, beta_start, beta_end, sigma_mode);
}

void ExperimentConfig::Validate(bool check_paths) const {
  if (T < 1) throw InvalidArgument("T must be >= 1");
  if (!(beta_start > 0.0) || !(beta_end >= beta_start) || !(beta_end < 1.0)) {
    throw InvalidArgument("beta range must satisfy 0 < start <= end < 1");
  }
  if (t0 < 1 || t0 > T) throw InvalidArgument("t0 must lie in [1, T]");
  if (!(delta > 0.0 && delta < 1.0)) throw InvalidArgument("delta must lie in (0, 1)");
  local_training.Validate();
  global_training.Validate();
  if (local_training.label_conditioning != global_training.label_conditioning) {
    throw InvalidArgument(
        "local and global training must agree on label_conditioning");
  }
  if (transport != "in-process" && transport != "file") {
    throw InvalidArgument("transport must be 'in-process' or 'file'");
  }
  if (data.clusters.size() != kClients) {
    throw InvalidArgument("exactly two label clusters are supported");
  }
  if (data.majority_count < 0 || data.minority_count < 0 ||
      data.majority_count + data.minority_count == 0) {
    throw InvalidArgument("client counts must be non-negative and not both 0");
  }
  if (data.resize < 0) throw InvalidArgument("resize must be >= 0");
  if (data.holdout_per_class < 1) {
    throw InvalidArgument("holdout_per_class must be >= 1");
  }
  if (norm_policy.mode == NormPolicy::Mode::kClip) {
    const double b = bound_mode == BoundMode::kPerSample
                         ? norm_policy.sample_bound
                         : norm_policy.coordinate_bound;
    if (!(b > 0.0)) {
      throw InvalidArgument("clip policy needs a positive bound for " +
                            ToString(bound_mode));
    }
  }
  if (eval.samples_per_class < 1) {
    throw InvalidArgument("samples_per_class must be >= 1");
  }
  if (eval.client >= kClients) throw InvalidArgument("eval client out of range");
  if (eval.mmd_max_samples < 2) throw InvalidArgument("mmd_max_samples must be >= 2");
  if (eval.downstream_seeds.empty()) {
    throw InvalidArgument("downstream_seeds must not be empty");
  }
  if (data.source == "mnist_idx") {
    if (check_paths) {
      RequireFile(data.images, "data.images");
      RequireFile(data.labels, "data.labels");
      if (!data.test_images.empty()) {
        RequireFile(data.test_images, "data.test_images");
        RequireFile(data.test_labels, "data.test_labels");
      }
    }
  } else if (data.source == "cifar10_bin") {
    if (data.cifar_batches.empty()) {
      throw InvalidArgument("data.cifar_batches is empty");
    }
    if (check_paths) {
      for (const auto& p : data.cifar_batches) RequireFile(p, "cifar batch");
      if (!data.test_images.empty()) RequireFile(data.test_images, "data.test_images");
    }
  } else if (data.source == "blobs") {
    if (data.blob_dim < 4 || data.blob_dim % 4 != 0) {
      throw InvalidArgument("blob_dim must be a positive multiple of 4");
    }
    if (data.blob_classes < 2 || data.blob_per_class < 2) {
      throw InvalidArgument("blobs need >= 2 classes and >= 2 per class");
    }
    if (data.resize != 0) throw InvalidArgument("blobs cannot be resized");
  } else {
    throw InvalidArgument("unknown data source '" + data.source + "'");
  }
}

std::string ExperimentConfig::ToYaml() const {
  YAML::Node root;
  YAML::Node sched;
  sched["T"] = T;
  sched["beta_start"] = Scalar(beta_start);
  sched["beta_end"] = Scalar(beta_end);
  sched["sigma_mode"] = ToString(sigma_mode);
  root["schedule"] = sched;
  root["t0"] = t0;
  root["mode"] = ToString(mode);
  root["seed"] = seed;
  root["transport"] = transport;
  root["output_dir"] = output_dir.string();

  YAML::Node priv;
  priv["delta"] = Scalar(delta);
  priv["bound_mode"] = ToString(bound_mode);
  YAML::Node norm;
  norm["mode"] = ToString(norm_policy.mode);
  norm["sample_bound"] = Scalar(norm_policy.sample_bound);
  norm["coordinate_bound"] = Scalar(norm_policy.coordinate_bound);
  priv["norm_policy"] = norm;
  root["privacy"] = priv;

  YAML::Node d;
  d["source"] = data.source;
  d["images"] = data.images.string();
  d["labels"] = data.labels.string();
  YAML::Node batches(YAML::NodeType::Sequence);
  for (const auto& p : data.cifar_batches) batches.push_back(p.string());
  d["cifar_batches"] = batches;
  d["test_images"] = data.test_images.string();
  d["test_labels"] = data.test_labels.string();
  d["holdout_per_class"] = data.holdout_per_class;
  d["resize"] = data.resize;
  d["range"] = ToString(data.range);
  YAML::Node clusters(YAML::NodeType::Sequence);
  for (const auto& c : data.clusters) {
    YAML::Node labels(YAML::NodeType::Sequence);
    for (int y : c) labels.push_back(y);
    labels.SetStyle(YAML::EmitterStyle::Flow);
    clusters.push_back(labels);
  }
  d["clusters"] = clusters;
  d["majority_count"] = data.majority_count;
  d["minority_count"] = data.minority_count;
  d["blob_dim"] = data.blob_dim;
  d["blob_classes"] = data.blob_classes;
  d["blob_per_class"] = data.blob_per_class;
  root["data"] = d;

  root["local_training"] = TrainingToYaml(local_training);
  root["global_training"] = TrainingToYaml(global_training);

  YAML::Node e;
  e["samples_per_class"] = eval.samples_per_class;
  e["client"] = eval.client;
  e["mmd_max_samples"] = eval.mmd_max_samples;
  YAML::Node seeds(YAML::NodeType::Sequence);
  for (auto s : eval.downstream_seeds) seeds.push_back(s);
  seeds.SetStyle(YAML::EmitterStyle::Flow);
  e["downstream_seeds"] = seeds;
  e["reference_classifier"] = ClassifierToYaml(eval.reference_classifier);
  e["downstream_classifier"] = ClassifierToYaml(eval.downstream_classifier);
  root["eval"] = e;

  YAML::Emitter out;
  out << root;
  return std::string(out.c_str()) + "\n";
}

ExperimentConfig ExperimentConfig::FromYaml(const std::string& text) {
  ExperimentConfig c = DefaultExperimentConfig();
  try {
    const YAML::Node root = YAML::Load(text);
    if (!root || root.IsNull()) return c;
    CheckKeys(root, "config",
              {"schedule", "t0", "mode", "seed", "transport", "output_dir",
               "privacy", "data", "local_training", "global_training", "eval"});
    const YAML::Node sched = root["schedule"];
    CheckKeys(sched, "schedule", {"T", "beta_start", "beta_end", "sigma_mode"});
    Read(sched, "T", c.T);
    Read(sched, "beta_start", c.beta_start);
    Read(sched, "beta_end", c.beta_end);
    if (sched && sched["sigma_mode"]) {
      c.sigma_mode = ParseSigmaMode(sched["sigma_mode"].as<std::string>());
    }
    Read(root, "t0", c.t0);
    if (root["mode"]) c.mode = ParseRunMode(root["mode"].as<std::string>());
    Read(root, "seed", c.seed);
    Read(root, "transport", c.transport);
    ReadPath(root, "output_dir", c.output_dir);

    const YAML::Node priv = root["privacy"];
    CheckKeys(priv, "privacy", {"delta", "bound_mode", "norm_policy"});
    Read(priv, "delta", c.delta);
    if (priv && priv["bound_mode"]) {
      c.bound_mode = ParseBoundMode(priv["bound_mode"].as<std::string>());
    }
    const YAML::Node norm = priv ? priv["norm_policy"] : YAML::Node();
    CheckKeys(norm, "privacy.norm_policy",
              {"mode", "sample_bound", "coordinate_bound"});
    if (norm && norm["mode"]) {
      c.norm_policy.mode = ParseNormMode(norm["mode"].as<std::string>());
    }
    Read(norm, "sample_bound", c.norm_policy.sample_bound);
    Read(norm, "coordinate_bound", c.norm_policy.coordinate_bound);

    const YAML::Node d = root["data"];
    CheckKeys(d, "data",
              {"source", "images", "labels", "cifar_batches", "test_images",
               "test_labels", "holdout_per_class", "resize", "range",
               "clusters", "majority_count", "minority_count", "blob_dim",
               "blob_classes", "blob_per_class"});
    Read(d, "source", c.data.source);
    ReadPath(d, "images", c.data.images);
    ReadPath(d, "labels", c.data.labels);
    if (d && d["cifar_batches"]) {
      c.data.cifar_batches.clear();
      for (const auto& p : d["cifar_batches"]) {
        c.data.cifar_batches.emplace_back(p.as<std::string>());
      }
    }
    ReadPath(d, "test_images", c.data.test_images);
    ReadPath(d, "test_labels", c.data.test_labels);
    Read(d, "holdout_per_class", c.data.holdout_per_class);
    Read(d, "resize", c.data.resize);
    if (d && d["range"]) c.data.range = ParsePixelRange(d["range"].as<std::string>());
    if (d && d["clusters"]) {
      c.data.clusters.clear();
      for (const auto& cl : d["clusters"]) {
        const auto labels = cl.as<std::vector<int>>();
        c.data.clusters.emplace_back(labels.begin(), labels.end());
      }
    }
    Read(d, "majority_count", c.data.majority_count);
    Read(d, "minority_count", c.data.minority_count);
    Read(d, "blob_dim", c.data.blob_dim);
    Read(d, "blob_classes", c.data.blob_classes);
    Read(d, "blob_per_class", c.data.blob_per_class);

    c.local_training = TrainingFromYaml(root["local_training"], "local_training",
                                        c.local_training);
    c.global_training = TrainingFromYaml(root["global_training"],
                                         "global_training", c.global_training);

    const YAML::Node e = root["eval"];
    CheckKeys(e, "eval",
              {"samples_per_class", "client", "mmd_max_samples",
               "downstream_seeds", "reference_classifier",
               "downstream_classifier"});
    Read(e, "samples_per_class", c.eval.samples_per_class);
    Read(e, "client", c.eval.client);
    Read(e, "mmd_max_samples", c.eval.mmd_max_samples);
    Read(e, "downstream_seeds", c.eval.downstream_seeds);
    if (e) {
      c.eval.reference_classifier = ClassifierFromYaml(
          e["reference_classifier"], "eval.reference_classifier",
          c.eval.reference_classifier);
      c.eval.downstream_classifier = ClassifierFromYaml(
          e["downstream_classifier"], "eval.downstream_classifier",
          c.eval.downstream_classifier);
    }
  } catch (const YAML::Exception& ex) {
    throw InvalidArgument(std::string("config: ") + ex.what());
  }
  return c;
}

ExperimentConfig ExperimentConfig::Load(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidArgument("cannot read config " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  ExperimentConfig c = FromYaml(ss.str());
  // Relative data paths are taken relative to the config file.
  const fs::path base = fs::absolute(path).parent_path();
  auto rebase = [&base](fs::path& p) {
    if (!p.empty() && p.is_relative()) p = (base / p).lexically_normal();
  };
  rebase(c.data.images);
  rebase(c.data.labels);
  rebase(c.data.test_images);
  rebase(c.data.test_labels);
  for (auto& p : c.data.cifar_batches) rebase(p);
  return c;
}

std::string ExperimentConfig::Hash() const {
  // The output location does not change any result.
  ExperimentConfig copy = *this;
  copy.output_dir.clear();
  const std::string yaml = copy.ToYaml();
  return Sha256Hex(Bytes(yaml.begin(), yaml.end())).substr(0, 16);
}

ExperimentConfig DefaultExperimentConfig() {
  ExperimentConfig c;
  for (TrainingConfig* t : {&c.local_training, &c.global_training}) {
    t->optimizer = OptimizerKind::kAdam;
    t->label_conditioning = true;
    t->hidden_widths = {256, 256};
    t->steps = 10000;
  }
  return c;
}

PreparedData PrepareData(const ExperimentConfig& config) {
  const DataConfig& d = config.data;
  SampleBatch all;
  std::optional<SampleBatch> test;
  if (d.source == "mnist_idx") {
    all = LoadMnistIdx(d.images, d.labels);
    if (!d.test_images.empty()) test = LoadMnistIdx(d.test_images, d.test_labels);
  } else if (d.source == "cifar10_bin") {
    all = LoadCifar10Bin(d.cifar_batches);
    if (!d.test_images.empty()) test = LoadCifar10Bin({d.test_images});
  } else if (d.source == "blobs") {
    all = MakeBlobs(d, config.seed);
  } else {
    throw InvalidArgument("unknown data source '" + d.source + "'");
  }
  PreparedData out;
  if (test) {
    out.pool = Preprocess(std::move(all), d);
    out.test = Preprocess(std::move(*test), d);
  } else {
    HoldoutSplit split =
        StratifiedHoldout(all, d.holdout_per_class, config.seed);
    out.pool = Preprocess(std::move(split.train), d);
    out.test = Preprocess(std::move(split.held_out), d);
  }
  NormResult normed = ApplyNormPolicy(out.pool, config.norm_policy);
  out.pool = std::move(normed.batch);
  out.norm = normed.report;
  if (config.norm_policy.mode == NormPolicy::Mode::kClip) {
    out.test = ApplyNormPolicy(out.test, config.norm_policy).batch;
  }
  const auto& labels = *out.pool.labels();
  out.num_classes = 1 + *std::max_element(labels.begin(), labels.end());
  out.partition = PartitionDataset(
      out.pool, PartitionSpec::MajorityMinority(d.clusters, d.majority_count,
                                                d.minority_count, config.seed));
  return out;
}

TrainedModels TrainModels(const ExperimentConfig& config,
                          const PreparedData& data,
                          const fs::path& checkpoint_dir) {
  if (CheckpointsUsable(config, checkpoint_dir)) {
    return LoadModels(config, checkpoint_dir);
  }
  const NoiseSchedule schedule = config.schedule();
  const int labels_local =
      config.local_training.label_conditioning ? data.num_classes : 0;
  const int labels_global =
      config.global_training.label_conditioning ? data.num_classes : 0;
  const auto files = ExpectedModels(config.mode);
  TrainedModels models;
  models.mode = config.mode;
  models.shape = data.pool.shape();

  switch (config.mode) {
    case RunMode::kPfdm: {
      FederationConfig fc;
      fc.schedule = schedule;
      fc.t0 = config.t0;
      fc.shape = data.pool.shape();
      for (std::uint32_t i = 0; i < kClients; ++i) {
        ClientConfig cc;
        cc.client_id = i;
        cc.dataset = data.partition.clients[i];
        cc.seed = DeriveSeed(config.seed, ClientName(i));
        cc.local = DenoiserPlan::Trainable(config.local_training, labels_local);
        fc.clients.push_back(std::move(cc));
      }
      TrainingConfig global = config.global_training;
      global.seed = DeriveSeed(config.seed, "server/global-train");
      fc.global = DenoiserPlan::Trainable(global, labels_global);

      std::unique_ptr<Transport> transport;
      if (config.transport == "file") {
        transport = std::make_unique<FileTransport>(config.output_dir / "exchange");
      } else {
        transport = std::make_unique<InProcessTransport>();
      }
      auto result = RunFederation(fc, *transport);
      if (!result->complete()) {
        std::string msg = "federation failed:";
        for (const auto& f : result->failures) {
          msg += " client " + std::to_string(f.client_id) + ": " + f.message + ";";
        }
        throw std::runtime_error(msg);
      }
      for (std::uint32_t i = 0; i < kClients; ++i) {
        models.personal[i] =
            Persist(config, *result->client(i).local_denoiser, files[i],
                    checkpoint_dir, models.checkpoints);
      }
      models.shared = Persist(config, *result->server->global_denoiser,
                              files.back(), checkpoint_dir, models.checkpoints);
      models.audit_messages = result->audit.size();
      break;
    }
    case RunMode::kNonCollaborative: {
      for (std::uint32_t i = 0; i < kClients; ++i) {
        TrainingConfig tc = config.global_training;
        tc.seed = DeriveSeed(config.seed, "independent/" + ClientName(i));
        auto fitted = FitDenoiser(DenoiserPlan::Trainable(tc, labels_global),
                                  data.partition.clients[i], schedule.T(),
                                  schedule);
        models.personal[i] = Persist(config, *fitted.denoiser, files[i],
                                     checkpoint_dir, models.checkpoints);
      }
      break;
    }
    case RunMode::kNonPrivate: {
      const SampleBatch pooled =
          SampleBatch::Concatenate(data.partition.clients);
      TrainingConfig tc = config.global_training;
      tc.seed = DeriveSeed(config.seed, "pooled");
      auto fitted = FitDenoiser(DenoiserPlan::Trainable(tc, labels_global),
                                pooled, schedule.T(), schedule);
      models.shared = Persist(config, *fitted.denoiser, files.front(),
                              checkpoint_dir, models.checkpoints);
      break;
    }
  }
  return models;
}

TrainedModels LoadModels(const ExperimentConfig& config,
                         const fs::path& checkpoint_dir) {
  TrainedModels models;
  models.mode = config.mode;
  const std::string hash = config.Hash();
  for (const auto& f : ExpectedModels(config.mode)) {
    const fs::path path = checkpoint_dir / f.name;
    if (!fs::exists(path)) {
      throw InvalidArgument("missing checkpoint " + path.string() +
                            " (produced by the 'run' stage, mode " +
                            ToString(config.mode) + ")");
    }
    const Checkpoint ckpt = Checkpoint::Load(path);
    if (ckpt.Attribute("config_hash") != hash) {
      throw InvalidArgument("checkpoint " + path.string() +
                            " was written for config " +
                            ckpt.Attribute("config_hash") + ", not " + hash);
    }
    std::shared_ptr<MlpDenoiser> net = MlpDenoiser::FromCheckpoint(ckpt);
    models.shape = net->architecture().shape;
    if (f.client) {
      models.personal[*f.client] = net;
    } else {
      models.shared = net;
    }
    models.checkpoints.push_back(path);
  }
  return models;
}

SampleBatch GenerateForClient(const ExperimentConfig& config,
                              const TrainedModels& models,
                              std::uint32_t client_id,
                              const std::vector<int>& labels,
                              std::uint64_t seed,
                              std::optional<int> t0_override) {
  const NoiseSchedule schedule = config.schedule();
  const Index count = static_cast<Index>(labels.size());
  auto personal = [&]() -> const Denoiser& {
    auto it = models.personal.find(client_id);
    if (it == models.personal.end() || !it->second) {
      throw InvalidArgument("no model for client " + std::to_string(client_id));
    }
    return *it->second;
  };
  SampleBatch out;
  switch (models.mode) {
    case RunMode::kPfdm: {
      const int t0 = t0_override.value_or(config.t0);
      const Denoiser* local = t0 > 0 ? &personal() : nullptr;
      out = PfdmSample(*models.shared, local, schedule, t0, count, models.shape,
                       labels, seed);
      break;
    }
    case RunMode::kNonCollaborative:
      out = SampleDdpm(personal(), schedule, schedule.T(), count, models.shape,
                       labels, seed);
      break;
    case RunMode::kNonPrivate:
      out = SampleDdpm(*models.shared, schedule, schedule.T(), count,
                       models.shape, labels, seed);
      break;
  }
  SampleBatch labeled(out.data(), out.shape(), labels, client_id);
  return labeled;
}

std::vector<int> BalancedLabels(int num_classes, Index per_class) {
  std::vector<int> out;
  out.reserve(static_cast<std::size_t>(num_classes * per_class));
  for (int c = 0; c < num_classes; ++c) out.insert(out.end(), per_class, c);
  return out;
}

ConvClassifier TrainReferenceClassifier(const ExperimentConfig& config,
                                        const PreparedData& data) {
  ClassifierConfig cc = config.eval.reference_classifier;
  cc.num_classes = data.num_classes;
  cc.seed = DeriveSeed(config.seed, "eval/reference");
  ConvClassifier clf(data.pool.shape(), cc);
  clf.Fit(data.pool);
  return clf;
}

ClientEvaluation EvaluateClient(const ExperimentConfig& config,
                                const PreparedData& data,
                                const ConvClassifier& reference,
                                const SampleBatch& samples) {
  const std::uint32_t client = config.eval.client;
  const SampleBatch& own = data.partition.clients.at(client);
  // The minority cluster is the one the client holds fewer samples of.
  std::vector<Index> held(data.partition.clients.size(), 0);
  for (int y : *own.labels()) {
    for (std::size_t c = 0; c < config.data.clusters.size(); ++c) {
      if (config.data.clusters[c].contains(y)) ++held[c];
    }
  }
  const std::size_t minority = held[0] <= held[1] ? 0 : 1;
  ClientEvaluation ev;
  ev.minority_classes = config.data.clusters[minority];
  const std::string hash = config.Hash();

  ev.agreement = PerClassReport(samples, reference);
  ev.agreement.seed = config.seed;
  ev.agreement.config_hash = hash;

  DownstreamConfig dc;
  dc.classifier = config.eval.downstream_classifier;
  dc.classifier.num_classes = data.num_classes;
  dc.seeds.clear();
  for (auto s : config.eval.downstream_seeds) {
    dc.seeds.push_back(DeriveSeed(config.seed, "eval/downstream/" + std::to_string(s)));
  }
  ev.downstream = DownstreamAccuracy(samples, data.test, dc);
  ev.downstream.seed = config.seed;
  ev.downstream.config_hash = hash;

  RngStream rng(config.seed, "eval/mmd");
  auto cap = [&](const SampleBatch& b) {
    const Index n = std::min(b.count(), config.eval.mmd_max_samples);
    auto rows = rng.SampleWithoutReplacement(b.count(), n);
    std::sort(rows.begin(), rows.end());
    return b.Select(rows).data();
  };
  auto mmd = [&](const std::set<int>& classes) {
    const Matrix real = cap(FilterLabels(data.test, classes));
    const Matrix fake = cap(FilterLabels(samples, classes));
    // Bandwidth fixed by the real data so methods share one kernel.
    const double h = MedianPairwiseDistance(real);
    return KernelMmd(fake, real, {BandwidthPolicy::Kind::kFixed, h}).mmd2;
  };
  ev.minority_mmd = mmd(ev.minority_classes);
  ev.majority_mmd = mmd(config.data.clusters[1 - minority]);
  return ev;
}

std::string ArtifactStamp(const ExperimentConfig& config,
                          const std::string& stage) {
  return "config_hash=" + config.Hash() + " seed=" + std::to_string(config.seed) +
         " stage=" + stage;
}

RunSummary RunExperiment(const ExperimentConfig& config, bool evaluate) {
  config.Validate();
  RunSummary summary;
  summary.output_dir = config.output_dir;
  fs::create_directories(config.output_dir);
  std::ostringstream manifest;
  auto record = [&](const fs::path& p, const std::string& stage) {
    manifest << fs::relative(p, config.output_dir).string() << ' '
             << ArtifactStamp(config, stage) << '\n';
  };

  WriteStamped(config.output_dir / "config.yaml", ArtifactStamp(config, "config"),
               config.ToYaml());
  record(config.output_dir / "config.yaml", "config");

  const PreparedData data = PrepareData(config);
  {
    std::ostringstream csv;
    WritePartitionManifest(data.partition, csv);
    WriteStamped(config.output_dir / "partition.csv",
                 ArtifactStamp(config, "partition"), csv.str());
    record(config.output_dir / "partition.csv", "partition");
  }

  PrivacyQuery query;
  query.t0 = config.t0;
  query.mode = config.bound_mode;
  query.delta = config.delta;
  const bool per_sample = config.bound_mode == BoundMode::kPerSample;
  if (config.norm_policy.mode == NormPolicy::Mode::kClip) {
    query.bound = per_sample ? config.norm_policy.sample_bound
                             : config.norm_policy.coordinate_bound;
  } else {
    query.bound = per_sample ? data.norm.max_l2 : data.norm.max_abs;
  }
  summary.privacy = Account(query, config.schedule());
  {
    std::ostringstream report;
    if (!data.norm.warning.empty()) report << "warning: " << data.norm.warning << '\n';
    if (config.mode == RunMode::kNonPrivate ||
        config.mode == RunMode::kNonCollaborative) {
      report << "note: mode " << ToString(config.mode)
             << " does not release noisified data; the report describes the "
                "pfdm release at this t0\n";
    }
    WriteReport(summary.privacy, report);
    WriteStamped(config.output_dir / "privacy.txt", ArtifactStamp(config, "account"),
                 report.str());
    record(config.output_dir / "privacy.txt", "account");
  }

  const fs::path ckpt_dir = config.output_dir / "checkpoints";
  const TrainedModels models = TrainModels(config, data, ckpt_dir);
  summary.checkpoints = models.checkpoints;
  for (const auto& p : models.checkpoints) record(p, "run");

  const fs::path sample_dir = config.output_dir / "samples";
  fs::create_directories(sample_dir);
  const auto labels = BalancedLabels(data.num_classes, config.eval.samples_per_class);
  std::optional<SampleBatch> evaluated;
  for (std::uint32_t i = 0; i < kClients; ++i) {
    const SampleBatch samples = GenerateForClient(
        config, models, i, labels, DeriveSeed(config.seed, "sample/" + ClientName(i)));
    const fs::path set = sample_dir / (ClientName(i) + ".pfss");
    SaveSampleSet(set, samples);
    record(set, "sample");
    if (samples.shape().size() == 3 &&
        (samples.shape()[0] == 1 || samples.shape()[0] == 3)) {
      std::vector<SampleBatch> rows;
      for (int c = 0; c < data.num_classes; ++c) {
        rows.push_back(FilterLabels(samples, {c}));
      }
      const fs::path png = sample_dir / (ClientName(i) + ".png");
      const double lo = config.data.range == PixelRange::kUnit ? 0.0 : -1.0;
      WritePngGrid(png, rows, 10, lo, 1.0);
      record(png, "sample");
    }
    summary.sample_files.push_back(set);
    if (i == config.eval.client) evaluated = samples;
  }

  if (evaluate) {
    const ConvClassifier reference = TrainReferenceClassifier(config, data);
    ClientEvaluation ev = EvaluateClient(config, data, reference, *evaluated);
    const fs::path metric_dir = config.output_dir / "metrics";
    fs::create_directories(metric_dir);
    for (const MetricReport* r : {&ev.agreement, &ev.downstream}) {
      std::ostringstream csv;
      r->WriteCsv(csv);
      const fs::path p = metric_dir / (r->metric + ".csv");
      WriteStamped(p, ArtifactStamp(config, "eval"), csv.str());
      record(p, "eval");
    }
    std::ostringstream text;
    ev.agreement.WriteSummary(text);
    text << '\n';
    ev.downstream.WriteSummary(text);
    text << "\nminority_mmd2: " << ev.minority_mmd
         << "\nmajority_mmd2: " << ev.majority_mmd << '\n';
    const fs::path p = metric_dir / "summary.txt";
    WriteStamped(p, ArtifactStamp(config, "eval"), text.str());
    record(p, "eval");
    summary.evaluation = std::move(ev);
  }
  WriteStamped(config.output_dir / "manifest.txt", ArtifactStamp(config, "manifest"),
               manifest.str());
  return summary;
}

}  // namespace pfdm
