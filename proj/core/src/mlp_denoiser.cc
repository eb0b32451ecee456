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


#include "pfdm/mlp_denoiser.h"

#include <cmath>
#include <numbers>
#include <sstream>

#include "pfdm/errors.h"
#include "pfdm/rng.h"

namespace pfdm {
namespace {

using MatMap = Eigen::Map<Matrix>;
using ConstMatMap = Eigen::Map<const Matrix>;
using VecMap = Eigen::Map<RowVector>;
using ConstVecMap = Eigen::Map<const RowVector>;

// Highest sinusoid frequency applied to t / T.
constexpr double kMaxFrequency = 1000.0;

Matrix Sigmoid(const Matrix& x) {
  return (1.0 / (1.0 + (-x.array()).exp())).matrix();
}

std::string JoinInts(const std::vector<int>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

std::vector<int> SplitInts(const std::string& text) {
  std::vector<int> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(std::stoi(item));
  }
  return out;
}

}  // namespace

struct MlpDenoiser::Layout {
  struct Block {
    Index weight = 0;  // out x in
    Index time = 0;    // out x E (hidden layers only)
    Index bias = 0;
    int in = 0;
    int out = 0;
  };
  int embed_dim = 0;
  std::vector<double> base_freq;  // embed_dim / 2 entries
  Index omega = -1;  // learned time embedding only
  Index phi = -1;
  Index label_embedding = -1;
  std::vector<Block> hidden;
  Block output;
  Index total = 0;
};

struct MlpDenoiser::Cache {
  Matrix temb;
  Matrix phase;  // learned time embedding only
  std::vector<Matrix> pre;
  std::vector<Matrix> act;
  Matrix out;
};

MlpDenoiser::MlpDenoiser(MlpArchitecture arch, std::uint64_t seed)
    : arch_(std::move(arch)) {
  BuildLayout();
  params_.assign(static_cast<std::size_t>(layout_->total), 0.0);
  RngStream rng(seed, "mlp/init");
  const auto& L = *layout_;
  auto fill = [&](Index offset, Index n, double stddev) {
    for (Index i = 0; i < n; ++i) params_[offset + i] = stddev * rng.Normal();
  };
  if (L.omega >= 0) {
    for (int j = 0; j < L.embed_dim; ++j) {
      params_[L.omega + j] = L.base_freq[static_cast<std::size_t>(j / 2)];
      params_[L.phi + j] = (j % 2 == 0) ? 0.0 : std::numbers::pi / 2.0;
    }
  }
  if (L.label_embedding >= 0) {
    fill(L.label_embedding,
         static_cast<Index>(arch_.num_labels) * L.hidden.front().out, 1.0);
  }
  for (const auto& b : L.hidden) {
    fill(b.weight, static_cast<Index>(b.out) * b.in, 1.0 / std::sqrt(b.in));
    fill(b.time, static_cast<Index>(b.out) * L.embed_dim,
         1.0 / std::sqrt(L.embed_dim));
  }
  fill(L.output.weight, static_cast<Index>(L.output.out) * L.output.in,
       1.0 / std::sqrt(L.output.in));
}

MlpDenoiser::MlpDenoiser(MlpArchitecture arch, std::vector<double> params)
    : arch_(std::move(arch)), params_(std::move(params)) {
  BuildLayout();
  if (static_cast<Index>(params_.size()) != layout_->total) {
    throw FormatError("mlp: parameter count does not match architecture");
  }
}

void MlpDenoiser::BuildLayout() {
  if (arch_.input_dim < 1) throw InvalidArgument("mlp: input_dim must be >= 1");
  if (arch_.hidden_widths.empty()) {
    throw InvalidArgument("mlp: need at least one hidden layer");
  }
  if (arch_.time_embedding_dim < 2 || arch_.time_embedding_dim % 2 != 0) {
    throw InvalidArgument("mlp: time embedding dim must be even and >= 2");
  }
  if (arch_.num_steps < 1 || arch_.num_labels < 0) {
    throw InvalidArgument("mlp: invalid step or label count");
  }
  if (!arch_.shape.empty() && FlatSize(arch_.shape) != arch_.input_dim) {
    throw InvalidArgument("mlp: shape does not match input_dim");
  }
  auto layout = std::make_shared<Layout>();
  Layout& L = *layout;
  L.embed_dim = arch_.time_embedding_dim;
  const int half = L.embed_dim / 2;
  for (int i = 0; i < half; ++i) {
    const double frac = half == 1 ? 0.0 : static_cast<double>(i) / (half - 1);
    L.base_freq.push_back(std::exp(frac * std::log(kMaxFrequency)));
  }
  Index offset = 0;
  if (arch_.time_embedding == TimeEmbedding::kLearned) {
    L.omega = offset;
    offset += L.embed_dim;
    L.phi = offset;
    offset += L.embed_dim;
  }
  if (arch_.num_labels > 0) {
    L.label_embedding = offset;
    offset += static_cast<Index>(arch_.num_labels) * arch_.hidden_widths.front();
  }
  int in = static_cast<int>(arch_.input_dim);
  for (int width : arch_.hidden_widths) {
    if (width < 1) throw InvalidArgument("mlp: hidden widths must be >= 1");
    Layout::Block b;
    b.in = in;
    b.out = width;
    b.weight = offset;
    offset += static_cast<Index>(width) * in;
    b.time = offset;
    offset += static_cast<Index>(width) * L.embed_dim;
    b.bias = offset;
    offset += width;
    L.hidden.push_back(b);
    in = width;
  }
  L.output.in = in;
  L.output.out = static_cast<int>(arch_.input_dim);
  L.output.weight = offset;
  offset += static_cast<Index>(L.output.out) * in;
  L.output.bias = offset;
  offset += L.output.out;
  L.total = offset;
  layout_ = std::move(layout);
}

Matrix MlpDenoiser::TimeFeatures(std::span<const int> steps) const {
  const auto& L = *layout_;
  const Index rows = static_cast<Index>(steps.size());
  Matrix temb(rows, L.embed_dim);
  for (Index i = 0; i < rows; ++i) {
    const double s = static_cast<double>(steps[i]) / arch_.num_steps;
    for (int j = 0; j < L.embed_dim; ++j) {
      if (L.omega >= 0) {
        temb(i, j) = std::sin(params_[L.omega + j] * s + params_[L.phi + j]);
      } else {
        const double arg = L.base_freq[static_cast<std::size_t>(j / 2)] * s;
        temb(i, j) = (j % 2 == 0) ? std::sin(arg) : std::cos(arg);
      }
    }
  }
  return temb;
}

void MlpDenoiser::Forward(const Matrix& x, std::span<const int> steps,
                          std::span<const int> labels, Cache& cache) const {
  const auto& L = *layout_;
  if (x.cols() != arch_.input_dim) {
    throw InvalidArgument("mlp: input width " + std::to_string(x.cols()) +
                          " != " + std::to_string(arch_.input_dim));
  }
  if (static_cast<Index>(steps.size()) != x.rows()) {
    throw InvalidArgument("mlp: need one step per row");
  }
  for (int t : steps) {
    if (t < 1 || t > arch_.num_steps) {
      throw InvalidArgument("mlp: step outside [1, T]");
    }
  }
  const bool use_labels = arch_.num_labels > 0 && !labels.empty();
  if (use_labels) {
    if (static_cast<Index>(labels.size()) != x.rows()) {
      throw InvalidArgument("mlp: need one label per row");
    }
    for (int y : labels) {
      if (y < 0 || y >= arch_.num_labels) {
        throw InvalidArgument("mlp: label " + std::to_string(y) +
                              " outside [0, " +
                              std::to_string(arch_.num_labels) + ")");
      }
    }
  }
  cache.temb = TimeFeatures(steps);
  if (L.omega >= 0) {
    cache.phase.resize(x.rows(), L.embed_dim);
    for (Index i = 0; i < x.rows(); ++i) {
      const double s = static_cast<double>(steps[i]) / arch_.num_steps;
      for (int j = 0; j < L.embed_dim; ++j) {
        cache.phase(i, j) = params_[L.omega + j] * s + params_[L.phi + j];
      }
    }
  }
  cache.pre.resize(L.hidden.size());
  cache.act.resize(L.hidden.size());
  const double* p = params_.data();
  for (std::size_t k = 0; k < L.hidden.size(); ++k) {
    const auto& b = L.hidden[k];
    const Matrix& in = k == 0 ? x : cache.act[k - 1];
    ConstMatMap w(p + b.weight, b.out, b.in);
    ConstMatMap u(p + b.time, b.out, L.embed_dim);
    ConstVecMap bias(p + b.bias, b.out);
    Matrix pre = in * w.transpose();
    pre.noalias() += cache.temb * u.transpose();
    pre.rowwise() += bias;
    if (k == 0 && use_labels) {
      ConstMatMap emb(p + L.label_embedding, arch_.num_labels, b.out);
      for (Index i = 0; i < x.rows(); ++i) pre.row(i) += emb.row(labels[i]);
    }
    cache.act[k] = (pre.array() * Sigmoid(pre).array()).matrix();
    cache.pre[k] = std::move(pre);
  }
  ConstMatMap wo(p + L.output.weight, L.output.out, L.output.in);
  ConstVecMap bo(p + L.output.bias, L.output.out);
  cache.out = cache.act.back() * wo.transpose();
  cache.out.rowwise() += bo;
}

Matrix MlpDenoiser::Predict(const Matrix& x_t, std::span<const int> steps,
                            std::span<const int> labels) const {
  Cache cache;
  Forward(x_t, steps, labels, cache);
  return std::move(cache.out);
}

double MlpDenoiser::LossAndGradient(const Matrix& x_t,
                                    std::span<const int> steps,
                                    std::span<const int> labels,
                                    const Matrix& target,
                                    std::span<double> grad) const {
  const auto& L = *layout_;
  if (static_cast<Index>(grad.size()) != L.total) {
    throw InvalidArgument("mlp: gradient buffer has wrong size");
  }
  if (target.rows() != x_t.rows() || target.cols() != x_t.cols()) {
    throw InvalidArgument("mlp: target shape mismatch");
  }
  Cache cache;
  Forward(x_t, steps, labels, cache);
  const double rows = static_cast<double>(x_t.rows());
  const Matrix diff = cache.out - target;
  const double loss = diff.rowwise().squaredNorm().sum() / rows;

  std::fill(grad.begin(), grad.end(), 0.0);
  double* g = grad.data();
  const double* p = params_.data();

  Matrix d_out = (2.0 / rows) * diff;
  MatMap(g + L.output.weight, L.output.out, L.output.in).noalias() =
      d_out.transpose() * cache.act.back();
  VecMap(g + L.output.bias, L.output.out) = d_out.colwise().sum();
  Matrix d_act =
      d_out * ConstMatMap(p + L.output.weight, L.output.out, L.output.in);

  Matrix d_temb = Matrix::Zero(x_t.rows(), L.embed_dim);
  const bool use_labels = arch_.num_labels > 0 && !labels.empty();
  for (std::size_t kk = L.hidden.size(); kk-- > 0;) {
    const auto& b = L.hidden[kk];
    const Matrix& pre = cache.pre[kk];
    const Matrix sig = Sigmoid(pre);
    // silu'(x) = s(x) (1 + x (1 - s(x)))
    const Matrix d_pre =
        (d_act.array() * sig.array() *
         (1.0 + pre.array() * (1.0 - sig.array())))
            .matrix();
    const Matrix& in = kk == 0 ? x_t : cache.act[kk - 1];
    MatMap(g + b.weight, b.out, b.in).noalias() = d_pre.transpose() * in;
    MatMap(g + b.time, b.out, L.embed_dim).noalias() =
        d_pre.transpose() * cache.temb;
    VecMap(g + b.bias, b.out) = d_pre.colwise().sum();
    d_temb.noalias() += d_pre * ConstMatMap(p + b.time, b.out, L.embed_dim);
    if (kk == 0) {
      if (use_labels) {
        MatMap emb(g + L.label_embedding, arch_.num_labels, b.out);
        for (Index i = 0; i < x_t.rows(); ++i) emb.row(labels[i]) += d_pre.row(i);
      }
    } else {
      d_act = d_pre * ConstMatMap(p + b.weight, b.out, b.in);
    }
  }
  if (L.omega >= 0) {
    const Matrix d_phase =
        (d_temb.array() * cache.phase.array().cos()).matrix();
    for (Index i = 0; i < x_t.rows(); ++i) {
      const double s = static_cast<double>(steps[i]) / arch_.num_steps;
      for (int j = 0; j < L.embed_dim; ++j) {
        g[L.omega + j] += d_phase(i, j) * s;
        g[L.phi + j] += d_phase(i, j);
      }
    }
  }
  return loss;
}

std::unique_ptr<TrainableDenoiser> MlpDenoiser::Clone() const {
  return std::unique_ptr<MlpDenoiser>(new MlpDenoiser(arch_, params_));
}

Checkpoint MlpDenoiser::ToCheckpoint() const {
  const auto& L = *layout_;
  Checkpoint ckpt;
  ckpt.attributes["kind"] = kind();
  ckpt.attributes["input_dim"] = std::to_string(arch_.input_dim);
  std::vector<int> shape(arch_.shape.begin(), arch_.shape.end());
  ckpt.attributes["shape"] = JoinInts(shape);
  ckpt.attributes["num_labels"] = std::to_string(arch_.num_labels);
  ckpt.attributes["num_steps"] = std::to_string(arch_.num_steps);
  ckpt.attributes["time_embedding"] = ToString(arch_.time_embedding);
  ckpt.attributes["time_embedding_dim"] =
      std::to_string(arch_.time_embedding_dim);
  ckpt.attributes["hidden_widths"] = JoinInts(arch_.hidden_widths);

  auto add = [&](const std::string& name, Index offset,
                 std::vector<std::uint32_t> dims) {
    TensorRecord rec;
    rec.name = name;
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    rec.dims = std::move(dims);
    rec.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) {
      rec.values[i] = static_cast<float>(params_[offset + i]);
    }
    ckpt.tensors.push_back(std::move(rec));
  };
  const auto E = static_cast<std::uint32_t>(L.embed_dim);
  if (L.omega >= 0) {
    add("time.omega", L.omega, {E});
    add("time.phi", L.phi, {E});
  }
  if (L.label_embedding >= 0) {
    add("label.embedding", L.label_embedding,
        {static_cast<std::uint32_t>(arch_.num_labels),
         static_cast<std::uint32_t>(L.hidden.front().out)});
  }
  for (std::size_t k = 0; k < L.hidden.size(); ++k) {
    const auto& b = L.hidden[k];
    const std::string prefix = "layer" + std::to_string(k);
    const auto out = static_cast<std::uint32_t>(b.out);
    add(prefix + ".weight", b.weight, {out, static_cast<std::uint32_t>(b.in)});
    add(prefix + ".time", b.time, {out, E});
    add(prefix + ".bias", b.bias, {out});
  }
  add("out.weight", L.output.weight,
      {static_cast<std::uint32_t>(L.output.out),
       static_cast<std::uint32_t>(L.output.in)});
  add("out.bias", L.output.bias, {static_cast<std::uint32_t>(L.output.out)});
  return ckpt;
}

std::unique_ptr<MlpDenoiser> MlpDenoiser::FromCheckpoint(const Checkpoint& ckpt) {
  if (ckpt.Attribute("kind") != "mlp") {
    throw FormatError("checkpoint does not hold an mlp denoiser");
  }
  MlpArchitecture arch;
  arch.input_dim = std::stoll(ckpt.Attribute("input_dim"));
  for (int d : SplitInts(ckpt.Attribute("shape"))) arch.shape.push_back(d);
  arch.num_labels = std::stoi(ckpt.Attribute("num_labels"));
  arch.num_steps = std::stoi(ckpt.Attribute("num_steps"));
  arch.time_embedding = ParseTimeEmbedding(ckpt.Attribute("time_embedding"));
  arch.time_embedding_dim = std::stoi(ckpt.Attribute("time_embedding_dim"));
  arch.hidden_widths = SplitInts(ckpt.Attribute("hidden_widths"));

  // Build once to get the layout, then fill from the named tensors.
  MlpDenoiser shell(arch, std::uint64_t{0});
  const auto& L = *shell.layout_;
  std::vector<double> params(static_cast<std::size_t>(L.total), 0.0);
  auto take = [&](const std::string& name, Index offset, std::size_t expected) {
    const TensorRecord& rec = ckpt.Tensor(name);
    if (rec.values.size() != expected) {
      throw FormatError("checkpoint tensor '" + name + "' has wrong size");
    }
    for (std::size_t i = 0; i < expected; ++i) params[offset + i] = rec.values[i];
  };
  const auto E = static_cast<std::size_t>(L.embed_dim);
  if (L.omega >= 0) {
    take("time.omega", L.omega, E);
    take("time.phi", L.phi, E);
  }
  if (L.label_embedding >= 0) {
    take("label.embedding", L.label_embedding,
         static_cast<std::size_t>(arch.num_labels) * L.hidden.front().out);
  }
  for (std::size_t k = 0; k < L.hidden.size(); ++k) {
    const auto& b = L.hidden[k];
    const std::string prefix = "layer" + std::to_string(k);
    take(prefix + ".weight", b.weight, static_cast<std::size_t>(b.out) * b.in);
    take(prefix + ".time", b.time, static_cast<std::size_t>(b.out) * E);
    take(prefix + ".bias", b.bias, static_cast<std::size_t>(b.out));
  }
  take("out.weight", L.output.weight,
       static_cast<std::size_t>(L.output.out) * L.output.in);
  take("out.bias", L.output.bias, static_cast<std::size_t>(L.output.out));
  return std::unique_ptr<MlpDenoiser>(
      new MlpDenoiser(std::move(arch), std::move(params)));
}

std::unique_ptr<MlpDenoiser> BuildTrainableDenoiser(const TrainingConfig& config,
                                                    const SampleShape& shape,
                                                    int num_labels,
                                                    int num_steps) {
  config.Validate();
  if (shape.empty() || FlatSize(shape) < 1) {
    throw InvalidArgument("denoiser: sample shape must be non-empty");
  }
  if (config.label_conditioning && num_labels < 1) {
    throw InvalidArgument(
        "denoiser: label conditioning requested without any labels");
  }
  MlpArchitecture arch;
  arch.input_dim = FlatSize(shape);
  arch.shape = shape;
  arch.num_labels = config.label_conditioning ? num_labels : 0;
  arch.num_steps = num_steps;
  arch.time_embedding = config.time_embedding;
  arch.time_embedding_dim = config.time_embedding_dim;
  arch.hidden_widths = config.hidden_widths;
  return std::make_unique<MlpDenoiser>(std::move(arch), config.seed);
}

}  // namespace pfdm
