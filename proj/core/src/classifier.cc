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


#include "pfdm/classifier.h"

#include <algorithm>
#include <cmath>
#include <limits>

#include "pfdm/errors.h"
#include "pfdm/optimizer.h"
#include "pfdm/rng.h"

namespace pfdm {

struct ConvClassifier::Geometry {
  Index channels, height, width;
  Index c1, c2, hidden, classes;
  Index pooled_h, pooled_w, flat;
  // Offsets into the flat parameter vector.
  Index w1, b1, w2, b2, w3, b3, w4, b4, total;
};

struct ConvClassifier::Cache {
  Matrix cols1;   // (B*HW) x 9C
  Matrix a1;      // (B*HW) x c1, post-ReLU, HWC per sample
  Matrix cols2;   // (B*HW) x 9c1
  Matrix a2;      // (B*HW) x c2, post-ReLU
  Matrix pooled;  // B x flat
  std::vector<Index> argmax;  // source row in a2 for every pooled entry
  Matrix h;       // B x hidden, post-ReLU
  Matrix logits;  // B x classes
};

namespace {

using ConstMap = Eigen::Map<const Matrix>;
using MutMap = Eigen::Map<Matrix>;

// 3x3, stride 1, zero padding 1. Column order is (ky, kx, channel).
void Im2Col(const double* base, Index sample_stride, Index batch, Index h,
            Index w, Index c, Index stride_c, Index stride_y, Index stride_x,
            Matrix& cols) {
  cols.setZero(batch * h * w, 9 * c);
  for (Index b = 0; b < batch; ++b) {
    const double* in = base + b * sample_stride;
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        double* row = cols.row(b * h * w + y * w + x).data();
        for (Index ky = 0; ky < 3; ++ky) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (Index kx = 0; kx < 3; ++kx) {
            const Index sx = x + kx - 1;
            if (sx < 0 || sx >= w) continue;
            double* dst = row + (ky * 3 + kx) * c;
            const double* src = in + sy * stride_y + sx * stride_x;
            for (Index ch = 0; ch < c; ++ch) dst[ch] = src[ch * stride_c];
          }
        }
      }
    }
  }
}

// Adjoint of Im2Col for HWC activations laid out as (B*HW) x c.
void Col2ImHwc(const Matrix& cols, Index batch, Index h, Index w, Index c,
               Matrix& out) {
  out.setZero(batch * h * w, c);
  for (Index b = 0; b < batch; ++b) {
    for (Index y = 0; y < h; ++y) {
      for (Index x = 0; x < w; ++x) {
        const double* row = cols.row(b * h * w + y * w + x).data();
        for (Index ky = 0; ky < 3; ++ky) {
          const Index sy = y + ky - 1;
          if (sy < 0 || sy >= h) continue;
          for (Index kx = 0; kx < 3; ++kx) {
            const Index sx = x + kx - 1;
            if (sx < 0 || sx >= w) continue;
            out.row(b * h * w + sy * w + sx) +=
                Eigen::Map<const RowVector>(row + (ky * 3 + kx) * c, c);
          }
        }
      }
    }
  }
}

}  // namespace

ConvClassifier::ConvClassifier(const SampleShape& shape,
                               const ClassifierConfig& config)
    : config_(config) {
  if (shape.size() != 3) {
    throw InvalidArgument("classifier expects C x H x W inputs, got " +
                          ShapeToString(shape));
  }
  if (shape[1] % 2 != 0 || shape[2] % 2 != 0) {
    throw InvalidArgument("classifier expects even spatial dimensions");
  }
  if (config.num_classes < 2 || config.conv1_channels < 1 ||
      config.conv2_channels < 1 || config.hidden < 1 || config.epochs < 0 ||
      config.batch_size < 1 || !(config.learning_rate > 0)) {
    throw InvalidArgument("invalid classifier config");
  }
  auto geo = std::make_shared<Geometry>();
  geo->channels = shape[0];
  geo->height = shape[1];
  geo->width = shape[2];
  geo->c1 = config.conv1_channels;
  geo->c2 = config.conv2_channels;
  geo->hidden = config.hidden;
  geo->classes = config.num_classes;
  geo->pooled_h = geo->height / 2;
  geo->pooled_w = geo->width / 2;
  geo->flat = geo->pooled_h * geo->pooled_w * geo->c2;
  Index at = 0;
  auto take = [&at](Index n) {
    const Index o = at;
    at += n;
    return o;
  };
  geo->w1 = take(9 * geo->channels * geo->c1);
  geo->b1 = take(geo->c1);
  geo->w2 = take(9 * geo->c1 * geo->c2);
  geo->b2 = take(geo->c2);
  geo->w3 = take(geo->flat * geo->hidden);
  geo->b3 = take(geo->hidden);
  geo->w4 = take(geo->hidden * geo->classes);
  geo->b4 = take(geo->classes);
  geo->total = at;
  geo_ = geo;

  params_.assign(static_cast<std::size_t>(geo->total), 0.0);
  RngStream rng(config.seed, "classifier/init");
  auto he = [&](Index offset, Index fan_in, Index count) {
    const double s = std::sqrt(2.0 / static_cast<double>(fan_in));
    for (Index i = 0; i < count; ++i) {
      params_[static_cast<std::size_t>(offset + i)] = s * rng.Normal();
    }
  };
  he(geo->w1, 9 * geo->channels, 9 * geo->channels * geo->c1);
  he(geo->w2, 9 * geo->c1, 9 * geo->c1 * geo->c2);
  he(geo->w3, geo->flat, geo->flat * geo->hidden);
  he(geo->w4, geo->hidden, geo->hidden * geo->classes);
}

void ConvClassifier::Forward(const Matrix& x, Cache& cache) const {
  const Geometry& g = *geo_;
  if (x.cols() != g.channels * g.height * g.width) {
    throw InvalidArgument("classifier input has wrong dimension");
  }
  const Index batch = x.rows();
  const Index hw = g.height * g.width;
  const double* p = params_.data();
  ConstMap w1(p + g.w1, 9 * g.channels, g.c1);
  Eigen::Map<const RowVector> b1(p + g.b1, g.c1);
  ConstMap w2(p + g.w2, 9 * g.c1, g.c2);
  Eigen::Map<const RowVector> b2(p + g.b2, g.c2);
  ConstMap w3(p + g.w3, g.flat, g.hidden);
  Eigen::Map<const RowVector> b3(p + g.b3, g.hidden);
  ConstMap w4(p + g.w4, g.hidden, g.classes);
  Eigen::Map<const RowVector> b4(p + g.b4, g.classes);

  // Input rows are CHW.
  Im2Col(x.data(), x.cols(), batch, g.height, g.width, g.channels, hw, g.width,
         1, cache.cols1);
  cache.a1.noalias() = cache.cols1 * w1;
  cache.a1.rowwise() += b1;
  cache.a1 = cache.a1.cwiseMax(0.0);

  Im2Col(cache.a1.data(), hw * g.c1, batch, g.height, g.width, g.c1, 1,
         g.width * g.c1, g.c1, cache.cols2);
  cache.a2.noalias() = cache.cols2 * w2;
  cache.a2.rowwise() += b2;
  cache.a2 = cache.a2.cwiseMax(0.0);

  cache.pooled.resize(batch, g.flat);
  cache.argmax.resize(static_cast<std::size_t>(batch * g.flat));
  for (Index b = 0; b < batch; ++b) {
    for (Index py = 0; py < g.pooled_h; ++py) {
      for (Index px = 0; px < g.pooled_w; ++px) {
        for (Index ch = 0; ch < g.c2; ++ch) {
          double best = -std::numeric_limits<double>::infinity();
          Index best_row = 0;
          for (Index dy = 0; dy < 2; ++dy) {
            for (Index dx = 0; dx < 2; ++dx) {
              const Index r =
                  b * hw + (2 * py + dy) * g.width + (2 * px + dx);
              if (cache.a2(r, ch) > best) {
                best = cache.a2(r, ch);
                best_row = r;
              }
            }
          }
          const Index col = (py * g.pooled_w + px) * g.c2 + ch;
          cache.pooled(b, col) = best;
          cache.argmax[static_cast<std::size_t>(b * g.flat + col)] = best_row;
        }
      }
    }
  }
  cache.h.noalias() = cache.pooled * w3;
  cache.h.rowwise() += b3;
  cache.h = cache.h.cwiseMax(0.0);
  cache.logits.noalias() = cache.h * w4;
  cache.logits.rowwise() += b4;
}

double ConvClassifier::LossAndGradient(const Matrix& x,
                                       std::span<const int> labels,
                                       std::span<double> grad) const {
  const Geometry& g = *geo_;
  if (static_cast<Index>(labels.size()) != x.rows()) {
    throw InvalidArgument("classifier: label count does not match batch");
  }
  if (static_cast<Index>(grad.size()) != g.total) {
    throw InvalidArgument("classifier: gradient buffer has wrong size");
  }
  Cache cache;
  Forward(x, cache);
  const Index batch = x.rows();
  const Index hw = g.height * g.width;

  // Softmax cross-entropy.
  Matrix dlogits = cache.logits;
  double loss = 0.0;
  for (Index i = 0; i < batch; ++i) {
    const int y = labels[static_cast<std::size_t>(i)];
    if (y < 0 || y >= g.classes) {
      throw InvalidArgument("classifier: label out of range");
    }
    const double m = dlogits.row(i).maxCoeff();
    dlogits.row(i) = (dlogits.row(i).array() - m).exp().matrix();
    const double z = dlogits.row(i).sum();
    loss += -(cache.logits(i, y) - m - std::log(z));
    dlogits.row(i) /= z;
    dlogits(i, y) -= 1.0;
  }
  loss /= static_cast<double>(batch);
  dlogits /= static_cast<double>(batch);

  std::fill(grad.begin(), grad.end(), 0.0);
  const double* p = params_.data();
  double* q = grad.data();
  ConstMap w2(p + g.w2, 9 * g.c1, g.c2);
  ConstMap w3(p + g.w3, g.flat, g.hidden);
  ConstMap w4(p + g.w4, g.hidden, g.classes);

  MutMap(q + g.w4, g.hidden, g.classes).noalias() =
      cache.h.transpose() * dlogits;
  Eigen::Map<RowVector>(q + g.b4, g.classes) = dlogits.colwise().sum();
  Matrix dh = dlogits * w4.transpose();
  dh = dh.cwiseProduct((cache.h.array() > 0.0).cast<double>().matrix());

  MutMap(q + g.w3, g.flat, g.hidden).noalias() =
      cache.pooled.transpose() * dh;
  Eigen::Map<RowVector>(q + g.b3, g.hidden) = dh.colwise().sum();
  const Matrix dpooled = dh * w3.transpose();

  Matrix da2 = Matrix::Zero(batch * hw, g.c2);
  for (Index b = 0; b < batch; ++b) {
    for (Index col = 0; col < g.flat; ++col) {
      const Index ch = col % g.c2;
      da2(cache.argmax[static_cast<std::size_t>(b * g.flat + col)], ch) +=
          dpooled(b, col);
    }
  }
  da2 = da2.cwiseProduct((cache.a2.array() > 0.0).cast<double>().matrix());
  MutMap(q + g.w2, 9 * g.c1, g.c2).noalias() = cache.cols2.transpose() * da2;
  Eigen::Map<RowVector>(q + g.b2, g.c2) = da2.colwise().sum();

  const Matrix dcols2 = da2 * w2.transpose();
  Matrix da1;
  Col2ImHwc(dcols2, batch, g.height, g.width, g.c1, da1);
  da1 = da1.cwiseProduct((cache.a1.array() > 0.0).cast<double>().matrix());
  MutMap(q + g.w1, 9 * g.channels, g.c1).noalias() =
      cache.cols1.transpose() * da1;
  Eigen::Map<RowVector>(q + g.b1, g.c1) = da1.colwise().sum();
  return loss;
}

Matrix ConvClassifier::Logits(const Matrix& x) const {
  // Chunked to bound im2col memory on large inputs.
  constexpr Index kChunk = 256;
  Matrix out(x.rows(), geo_->classes);
  Cache cache;
  for (Index start = 0; start < x.rows(); start += kChunk) {
    const Index n = std::min(kChunk, x.rows() - start);
    Forward(x.middleRows(start, n), cache);
    out.middleRows(start, n) = cache.logits;
  }
  return out;
}

std::vector<int> ConvClassifier::Predict(const Matrix& x) const {
  const Matrix logits = Logits(x);
  std::vector<int> out(static_cast<std::size_t>(x.rows()));
  for (Index i = 0; i < x.rows(); ++i) {
    Index arg;
    logits.row(i).maxCoeff(&arg);
    out[static_cast<std::size_t>(i)] = static_cast<int>(arg);
  }
  return out;
}

void ConvClassifier::Fit(const SampleBatch& train) {
  if (!train.has_labels()) throw InvalidArgument("classifier: labels required");
  if (train.count() == 0) throw InvalidArgument("classifier: empty training set");
  TrainingConfig opt;
  opt.learning_rate = config_.learning_rate;
  opt.optimizer = config_.optimizer;
  auto optimizer = MakeOptimizer(opt);
  RngStream order(config_.seed, "classifier/order");
  const Index n = train.count();
  const Index batch = std::min<Index>(config_.batch_size, n);
  std::vector<double> grad(params_.size());
  const auto& labels = *train.labels();
  Matrix xb(batch, train.dim());
  std::vector<int> yb(static_cast<std::size_t>(batch));
  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    const auto perm = order.SampleWithoutReplacement(n, n);
    for (Index start = 0; start + batch <= n; start += batch) {
      for (Index i = 0; i < batch; ++i) {
        const Index r = perm[static_cast<std::size_t>(start + i)];
        xb.row(i) = train.data().row(r);
        yb[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(r)];
      }
      const double loss = LossAndGradient(xb, yb, grad);
      if (!std::isfinite(loss)) {
        throw TrainingDiverged("classifier loss became non-finite");
      }
      optimizer->Step(params_, grad);
    }
  }
}

double Accuracy(const ConvClassifier& classifier, const SampleBatch& test) {
  if (!test.has_labels() || test.count() == 0) {
    throw InvalidArgument("Accuracy: labeled, non-empty test set required");
  }
  const auto pred = classifier.Predict(test.data());
  Index correct = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (pred[i] == (*test.labels())[i]) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(pred.size());
}

}  // namespace pfdm
