// Copyright 2026 The TERELU Workbench Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "terelu/activations.hpp"
#include "terelu/data.hpp"
#include "terelu/layers.hpp"
#include "terelu/numerics.hpp"

namespace terelu {

/// Raised when the training loss stops being finite.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(std::size_t epoch, std::size_t batch, double loss)
      : std::runtime_error("non-finite loss " + std::to_string(loss) + " at epoch " +
                           std::to_string(epoch) + ", batch " + std::to_string(batch)),
        epoch_(epoch),
        batch_(batch) {}

  std::size_t epoch() const noexcept { return epoch_; }
  std::size_t batch() const noexcept { return batch_; }

 private:
  std::size_t epoch_;
  std::size_t batch_;
};

struct TrainConfig {
  double learning_rate = 0.01;
  double momentum = 0.9;
  std::size_t batch_size = 64;
  std::size_t epochs = 1;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(learning_rate >= 0.0)) throw std::invalid_argument("learning_rate must be >= 0");
    if (!(momentum >= 0.0 && momentum < 1.0)) throw std::invalid_argument("momentum must be in [0, 1)");
    if (batch_size < 2) throw std::invalid_argument("batch_size must be >= 2");
    if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  }
};

/// One epoch of recorded metrics.
struct MetricsRow {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double train_acc = 0.0;
  double val_loss = 0.0;
  double val_acc = 0.0;
  std::vector<double> beta_values;
};

struct LossResult {
  double loss = 0.0;
  Matrix grad;
};

/// Mean softmax cross-entropy over the batch and its gradient with respect to
/// the logits, (softmax - onehot) / batch.
inline LossResult softmax_xent(const Matrix& logits, std::span<const std::size_t> labels) {
  if (labels.size() != logits.rows())
    throw ShapeError("softmax_xent: " + std::to_string(labels.size()) + " labels for logits " +
                     logits.shape_string());
  const std::size_t m = logits.rows(), c = logits.cols();
  LossResult r{0.0, Matrix(m, c)};
  const double inv_m = 1.0 / static_cast<double>(m);
  for (std::size_t i = 0; i < m; ++i) {
    if (labels[i] >= c)
      throw std::out_of_range("softmax_xent: label " + std::to_string(labels[i]) + " at row " +
                              std::to_string(i) + " outside [0, " + std::to_string(c) + ")");
    auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (double v : z) sum += std::exp(v - zmax);
    const double log_norm = zmax + std::log(sum);
    r.loss += log_norm - z[labels[i]];
    auto g = r.grad.row(i);
    for (std::size_t j = 0; j < c; ++j) g[j] = std::exp(z[j] - log_norm) * inv_m;
    g[labels[i]] -= inv_m;
  }
  r.loss *= inv_m;
  return r;
}

inline std::size_t count_correct(const Matrix& logits, std::span<const std::size_t> labels) {
  const auto pred = argmax_rows(logits);
  std::size_t hits = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) hits += pred[i] == labels[i];
  return hits;
}

/// Ordered layer stack ending in class logits. Also carries the SGD momentum
/// buffers, one per parameter tensor in layer_params order.
class Model {
 public:
  Model(std::vector<Layer> layers, std::size_t input_dim, std::uint64_t seed)
      : layers_(std::move(layers)), input_dim_(input_dim), seed_(seed) {
    output_dim_ = validate_shapes();
  }

  std::size_t input_dim() const noexcept { return input_dim_; }
  std::size_t output_dim() const noexcept { return output_dim_; }
  std::uint64_t seed() const noexcept { return seed_; }
  std::vector<Layer>& layers() noexcept { return layers_; }
  const std::vector<Layer>& layers() const noexcept { return layers_; }

  Matrix forward(const Matrix& x, bool training) {
    if (x.cols() != input_dim_)
      throw ShapeError("Model: input " + x.shape_string() + " but model expects " +
                       std::to_string(input_dim_) + " features");
    Matrix h = x;
    for (auto& layer : layers_) h = layer_forward(layer, h, training);
    return h;
  }

  /// Backpropagates d(loss)/d(logits); returns d(loss)/d(input).
  Matrix backward(const Matrix& grad_logits) {
    Matrix g = grad_logits;
    for (auto it = layers_.rbegin(); it != layers_.rend(); ++it) g = layer_backward(*it, g);
    return g;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t i = 0; i < layers_.size(); ++i)
      for (auto& p : layer_params(layers_[i])) {
        p.name = std::to_string(i) + "." + p.name;
        out.push_back(std::move(p));
      }
    return out;
  }

  /// Current beta of each TERELU layer, in layer order.
  std::vector<double> terelu_betas() const {
    std::vector<double> out;
    for (const auto& layer : layers_)
      if (const auto* act = std::get_if<ActivationLayer>(&layer))
        if (auto b = act->beta()) out.push_back(*b);
    return out;
  }

  /// Classical momentum: v <- momentum * v - lr * g;  p <- p + v.
  void sgd_step(double learning_rate, double momentum) {
    auto ps = params();
    if (velocity_.size() != ps.size()) {
      velocity_.clear();
      for (const auto& p : ps) velocity_.emplace_back(p.value.size(), 0.0);
    }
    for (std::size_t k = 0; k < ps.size(); ++k) {
      auto& v = velocity_[k];
      auto value = ps[k].value;
      auto grad = ps[k].grad;
      for (std::size_t i = 0; i < value.size(); ++i) {
        v[i] = momentum * v[i] - learning_rate * grad[i];
        value[i] += v[i];
      }
    }
  }

 private:
  std::size_t validate_shapes() const {
    std::size_t width = input_dim_;
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      const auto mismatch = [&](std::size_t expected) {
        throw ShapeError("Model: layer " + std::to_string(i) + " (" + layer_name(layers_[i]) +
                         ") expects width " + std::to_string(expected) + " but receives " +
                         std::to_string(width));
      };
      std::visit(
          [&](const auto& l) {
            using L = std::decay_t<decltype(l)>;
            if constexpr (std::is_same_v<L, DenseLayer> || std::is_same_v<L, MaxoutLayer>) {
              if (l.in_dim() != width) mismatch(l.in_dim());
              width = l.out_dim();
            } else if constexpr (std::is_same_v<L, BatchNormLayer>) {
              if (l.features() != width) mismatch(l.features());
            }
          },
          layers_[i]);
    }
    return width;
  }

  std::vector<Layer> layers_;
  std::size_t input_dim_;
  std::size_t output_dim_ = 0;
  std::uint64_t seed_;
  std::vector<std::vector<double>> velocity_;
};

/// Init stddev for weights feeding the given activation: sqrt(1/fan_in) for
/// tanh, sqrt(2/fan_in) for the rectifier family.
inline double init_stddev(ActivationKind kind, std::size_t fan_in) {
  const double gain = kind == ActivationKind::Tanh ? 1.0 : 2.0;
  return std::sqrt(gain / static_cast<double>(fan_in));
}

/// depth_hidden blocks of Dense(width) -> [BatchNorm] -> Activation, then a
/// Dense(classes) producing logits.
inline Model build_fcnn(std::size_t depth_hidden, std::size_t width, std::size_t input_dim,
                        std::size_t classes, const ActivationSpec& activation, bool use_bn,
                        std::uint64_t seed) {
  if (depth_hidden < 1 || width < 1 || input_dim < 1 || classes < 1)
    throw std::invalid_argument("build_fcnn: depth, width, input and class counts must be >= 1");
  Rng rng(seed);
  std::vector<Layer> layers;
  std::size_t fan_in = input_dim;
  for (std::size_t d = 0; d < depth_hidden; ++d) {
    layers.emplace_back(
        DenseLayer::random(fan_in, width, init_stddev(activation.kind(), fan_in), rng));
    if (use_bn) layers.emplace_back(BatchNormLayer(width));
    layers.emplace_back(ActivationLayer(activation));
    fan_in = width;
  }
  layers.emplace_back(
      DenseLayer::random(fan_in, classes, std::sqrt(1.0 / static_cast<double>(fan_in)), rng));
  return Model(std::move(layers), input_dim, seed);
}

/// depth_hidden Maxout(width, pieces) blocks, each optionally followed by
/// BatchNorm, then a Dense(classes) producing logits.
inline Model build_maxout_net(std::size_t depth_hidden, std::size_t width, std::size_t pieces,
                              std::size_t input_dim, std::size_t classes, bool use_bn,
                              std::uint64_t seed) {
  if (depth_hidden < 1 || width < 1 || input_dim < 1 || classes < 1)
    throw std::invalid_argument(
        "build_maxout_net: depth, width, input and class counts must be >= 1");
  Rng rng(seed);
  std::vector<Layer> layers;
  std::size_t fan_in = input_dim;
  for (std::size_t d = 0; d < depth_hidden; ++d) {
    layers.emplace_back(MaxoutLayer::random(fan_in, width, pieces,
                                            std::sqrt(1.0 / static_cast<double>(fan_in)), rng));
    if (use_bn) layers.emplace_back(BatchNormLayer(width));
    fan_in = width;
  }
  layers.emplace_back(
      DenseLayer::random(fan_in, classes, std::sqrt(1.0 / static_cast<double>(fan_in)), rng));
  return Model(std::move(layers), input_dim, seed);
}

inline Matrix model_forward(Model& model, const Matrix& x, bool training) {
  return model.forward(x, training);
}

struct EpochResult {
  double loss = 0.0;
  double accuracy = 0.0;
};

/// One pass over seeded-shuffled mini-batches with an SGD-momentum update per
/// batch. `epoch` only labels divergence diagnostics.
inline EpochResult train_epoch(Model& model, const Dataset& ds, const TrainConfig& config, Rng& rng,
                               std::size_t epoch = 0) {
  if (ds.size() == 0) throw std::invalid_argument("train_epoch: empty dataset");
  config.validate();
  const auto parts = batches(ds, config.batch_size, rng.next_u64());
  double loss_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t b = 0; b < parts.size(); ++b) {
    const auto& batch = parts[b];
    const Matrix logits = model.forward(batch.features, /*training=*/true);
    auto [loss, grad] = softmax_xent(logits, batch.labels);
    if (!std::isfinite(loss)) throw DivergenceError(epoch, b, loss);
    model.backward(grad);
    model.sgd_step(config.learning_rate, config.momentum);
    loss_sum += loss * static_cast<double>(batch.labels.size());
    hits += count_correct(logits, batch.labels);
  }
  const double n = static_cast<double>(ds.size());
  return {loss_sum / n, static_cast<double>(hits) / n};
}

/// Evaluation-mode loss and accuracy. Parameters are not touched.
inline EpochResult evaluate(Model& model, const Dataset& ds, std::size_t chunk = 1000) {
  if (ds.size() == 0) throw std::invalid_argument("evaluate: empty dataset");
  double loss_sum = 0.0;
  std::size_t hits = 0;
  for (std::size_t lo = 0; lo < ds.size(); lo += chunk) {
    const std::size_t hi = std::min(ds.size(), lo + chunk);
    std::vector<std::size_t> idx(hi - lo);
    for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = lo + i;
    const Dataset part = select(ds, idx, "");
    const Matrix logits = model.forward(part.features, /*training=*/false);
    loss_sum += softmax_xent(logits, part.labels).loss * static_cast<double>(idx.size());
    hits += count_correct(logits, part.labels);
  }
  const double n = static_cast<double>(ds.size());
  return {loss_sum / n, static_cast<double>(hits) / n};
}

}  // namespace terelu
