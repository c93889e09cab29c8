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
#include <iostream>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <type_traits>
#include <utility>
#include <variant>
#include <vector>

#include "terelu/activations.hpp"
#include "terelu/numerics.hpp"

namespace terelu {

/// Raised when backward is called without a matching forward.
class StateError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A trainable tensor and its gradient, viewed in place. Views are invalidated
/// if the owning layer is moved or resized.
struct ParamRef {
  std::string name;
  std::span<double> value;
  std::span<double> grad;
};

namespace detail {

// Overwrites dst's storage in place so outstanding ParamRef spans stay valid.
inline void copy_into(Matrix& dst, const Matrix& src) {
  std::copy(src.values().begin(), src.values().end(), dst.values().begin());
}

}  // namespace detail

/// Fully connected layer: x * W + b.
class DenseLayer {
 public:
  DenseLayer(std::size_t in, std::size_t out) : DenseLayer(Matrix(in, out), Matrix(1, out)) {}

  DenseLayer(Matrix weights, Matrix bias)
      : W_(std::move(weights)),
        b_(std::move(bias)),
        grad_W_(W_.rows(), W_.cols()),
        grad_b_(1, W_.cols()) {
    if (b_.rows() != 1 || b_.cols() != W_.cols())
      throw ShapeError("DenseLayer: bias " + b_.shape_string() + " does not match weights " +
                       W_.shape_string());
  }

  /// Zero-mean normal weights with the given standard deviation, zero bias.
  static DenseLayer random(std::size_t in, std::size_t out, double stddev, Rng& rng) {
    return DenseLayer(rng_normal(rng, in, out, stddev), Matrix(1, out));
  }

  std::size_t in_dim() const noexcept { return W_.rows(); }
  std::size_t out_dim() const noexcept { return W_.cols(); }

  Matrix forward(const Matrix& x) {
    if (x.cols() != in_dim())
      throw ShapeError("DenseLayer: input " + x.shape_string() + " does not match weights " +
                       W_.shape_string());
    cache_input_ = x;
    has_cache_ = true;
    return add_row_broadcast(matmul(x, W_), b_);
  }

  Matrix backward(const Matrix& upstream) {
    if (!has_cache_) throw StateError("DenseLayer: backward called before forward");
    if (upstream.rows() != cache_input_.rows() || upstream.cols() != out_dim())
      throw ShapeError("DenseLayer: upstream " + upstream.shape_string() +
                       " does not match forward output");
    detail::copy_into(grad_W_, matmul_tn(cache_input_, upstream));
    detail::copy_into(grad_b_, column_sums(upstream));
    return matmul_nt(upstream, W_);
  }

  std::vector<ParamRef> params() {
    return {{"W", W_.values(), grad_W_.values()}, {"b", b_.values(), grad_b_.values()}};
  }

  const Matrix& weights() const noexcept { return W_; }
  const Matrix& bias() const noexcept { return b_; }
  const Matrix& grad_weights() const noexcept { return grad_W_; }
  const Matrix& grad_bias() const noexcept { return grad_b_; }

 private:
  Matrix W_;
  Matrix b_;
  Matrix grad_W_;
  Matrix grad_b_;
  Matrix cache_input_;
  bool has_cache_ = false;
};

/// Per-feature batch normalization with learnable scale (gamma) and shift
/// (delta). Training mode normalizes by batch statistics and folds them into
/// running averages; evaluation mode uses the running averages.
class BatchNormLayer {
 public:
  static constexpr double kDefaultEps = 1e-5;
  static constexpr double kDefaultMomentum = 0.9;

  explicit BatchNormLayer(std::size_t features, double eps = kDefaultEps,
                          double momentum = kDefaultMomentum)
      : gamma_(1, features, 1.0),
        delta_(1, features, 0.0),
        grad_gamma_(1, features),
        grad_delta_(1, features),
        running_mean_(1, features, 0.0),
        running_var_(1, features, 1.0),
        eps_(eps),
        momentum_(momentum) {
    if (!(eps > 0.0)) throw std::invalid_argument("BatchNormLayer: eps must be positive");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw std::invalid_argument("BatchNormLayer: momentum must be in [0, 1)");
  }

  std::size_t features() const noexcept { return gamma_.cols(); }

  Matrix forward(const Matrix& x, bool training) {
    if (x.cols() != features())
      throw ShapeError("BatchNormLayer: input " + x.shape_string() + " has wrong width, expected " +
                       std::to_string(features()));
    const std::size_t n = features();
    Matrix out(x.rows(), n);
    if (!training) {
      has_cache_ = false;
      for (std::size_t j = 0; j < n; ++j) {
        const double scale = gamma_(0, j) / std::sqrt(running_var_(0, j) + eps_);
        for (std::size_t i = 0; i < x.rows(); ++i)
          out(i, j) = (x(i, j) - running_mean_(0, j)) * scale + delta_(0, j);
      }
      return out;
    }
    if (x.rows() < 2)
      throw std::invalid_argument("BatchNormLayer: training batch needs at least 2 rows, got " +
                                  std::to_string(x.rows()));
    auto stats = column_mean_var(x);
    inv_std_ = Matrix(1, n);
    for (std::size_t j = 0; j < n; ++j) inv_std_(0, j) = 1.0 / std::sqrt(stats.var(0, j) + eps_);
    x_hat_ = Matrix(x.rows(), n);
    for (std::size_t i = 0; i < x.rows(); ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double h = (x(i, j) - stats.mean(0, j)) * inv_std_(0, j);
        x_hat_(i, j) = h;
        out(i, j) = gamma_(0, j) * h + delta_(0, j);
      }
    }
    for (std::size_t j = 0; j < n; ++j) {
      running_mean_(0, j) = momentum_ * running_mean_(0, j) + (1.0 - momentum_) * stats.mean(0, j);
      running_var_(0, j) = momentum_ * running_var_(0, j) + (1.0 - momentum_) * stats.var(0, j);
    }
    has_cache_ = true;
    return out;
  }

  Matrix backward(const Matrix& upstream) {
    if (!has_cache_)
      throw StateError("BatchNormLayer: backward requires a preceding training-mode forward");
    if (upstream.rows() != x_hat_.rows() || upstream.cols() != features())
      throw ShapeError("BatchNormLayer: upstream " + upstream.shape_string() +
                       " does not match forward output");
    const std::size_t m = upstream.rows(), n = features();
    const double inv_m = 1.0 / static_cast<double>(m);
    grad_gamma_.fill(0.0);
    grad_delta_.fill(0.0);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        grad_delta_(0, j) += upstream(i, j);
        grad_gamma_(0, j) += upstream(i, j) * x_hat_(i, j);
      }
    }
    // dx = gamma * inv_std / m * (m * dy - sum(dy) - x_hat * sum(dy * x_hat))
    Matrix dx(m, n);
    for (std::size_t i = 0; i < m; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        const double k = gamma_(0, j) * inv_std_(0, j) * inv_m;
        dx(i, j) = k * (static_cast<double>(m) * upstream(i, j) - grad_delta_(0, j) -
                        x_hat_(i, j) * grad_gamma_(0, j));
      }
    }
    return dx;
  }

  std::vector<ParamRef> params() {
    return {{"gamma", gamma_.values(), grad_gamma_.values()},
            {"delta", delta_.values(), grad_delta_.values()}};
  }

  const Matrix& gamma() const noexcept { return gamma_; }
  const Matrix& delta() const noexcept { return delta_; }
  const Matrix& running_mean() const noexcept { return running_mean_; }
  const Matrix& running_var() const noexcept { return running_var_; }
  double eps() const noexcept { return eps_; }

 private:
  Matrix gamma_;
  Matrix delta_;
  Matrix grad_gamma_;
  Matrix grad_delta_;
  Matrix running_mean_;
  Matrix running_var_;
  double eps_;
  double momentum_;
  Matrix x_hat_;
  Matrix inv_std_;
  bool has_cache_ = false;
};

/// Elementwise activation. For TERELU the layer owns a single trainable beta.
class ActivationLayer {
 public:
  explicit ActivationLayer(ActivationSpec spec) : spec_(std::move(spec)) {}

  const ActivationSpec& spec() const noexcept { return spec_; }
  double grad_beta() const noexcept { return grad_beta_; }

  /// Current beta, if this is a TERELU layer.
  std::optional<double> beta() const {
    if (const auto* p = spec_.get_if<TereluParams>()) return p->beta;
    return std::nullopt;
  }

  Matrix forward(const Matrix& x, bool /*training*/) {
    if (const auto* p = spec_.get_if<TereluParams>(); p && p->beta <= 0.0 && !warned_) {
      std::cerr << "warning: TERELU beta = " << p->beta
                << " is not positive; the activation is no longer monotone\n";
      warned_ = true;
    }
    cache_input_ = x;
    has_cache_ = true;
    Matrix out(x.rows(), x.cols());
    std::visit(
        [&](const auto& p) {
          auto src = x.values();
          auto dst = out.values();
          for (std::size_t i = 0; i < src.size(); ++i) dst[i] = detail::value(p, src[i]);
        },
        spec_.params());
    return out;
  }

  Matrix backward(const Matrix& upstream) {
    if (!has_cache_) throw StateError("ActivationLayer: backward called before forward");
    if (upstream.rows() != cache_input_.rows() || upstream.cols() != cache_input_.cols())
      throw ShapeError("ActivationLayer: upstream " + upstream.shape_string() +
                       " does not match cached input " + cache_input_.shape_string());
    Matrix dx(upstream.rows(), upstream.cols());
    grad_beta_ = 0.0;
    std::visit(
        [&](const auto& p) {
          auto x = cache_input_.values();
          auto up = upstream.values();
          auto dst = dx.values();
          for (std::size_t i = 0; i < x.size(); ++i) dst[i] = up[i] * detail::slope(p, x[i]);
          if constexpr (std::is_same_v<std::decay_t<decltype(p)>, TereluParams>) {
            double g = 0.0;
            for (std::size_t i = 0; i < x.size(); ++i) g += up[i] * act_dbeta(p, x[i]);
            grad_beta_ = g;
          }
        },
        spec_.params());
    return dx;
  }

  std::vector<ParamRef> params() {
    if (double* beta = spec_.terelu_beta())
      return {{"beta", std::span<double>(beta, 1), std::span<double>(&grad_beta_, 1)}};
    return {};
  }

 private:
  ActivationSpec spec_;
  double grad_beta_ = 0.0;
  Matrix cache_input_;
  bool has_cache_ = false;
  bool warned_ = false;
};

/// Maxout layer: each output unit is the maximum over k affine pieces,
/// h_j(x) = max_p (x * W_p + b_p)_j.
class MaxoutLayer {
 public:
  MaxoutLayer(std::vector<Matrix> weights, std::vector<Matrix> biases)
      : W_(std::move(weights)), b_(std::move(biases)) {
    if (W_.size() < 2) throw std::invalid_argument("MaxoutLayer: need at least 2 pieces");
    if (b_.size() != W_.size())
      throw std::invalid_argument("MaxoutLayer: piece count of weights and biases differ");
    for (std::size_t p = 0; p < W_.size(); ++p) {
      if (W_[p].rows() != W_[0].rows() || W_[p].cols() != W_[0].cols())
        throw ShapeError("MaxoutLayer: piece " + std::to_string(p) + " weight shape " +
                         W_[p].shape_string() + " differs from " + W_[0].shape_string());
      if (b_[p].rows() != 1 || b_[p].cols() != W_[0].cols())
        throw ShapeError("MaxoutLayer: piece " + std::to_string(p) + " bias shape " +
                         b_[p].shape_string() + " is not [1x" + std::to_string(W_[0].cols()) + "]");
      grad_W_.emplace_back(W_[p].rows(), W_[p].cols());
      grad_b_.emplace_back(1, W_[p].cols());
    }
  }

  static MaxoutLayer random(std::size_t in, std::size_t out, std::size_t pieces, double stddev,
                            Rng& rng) {
    std::vector<Matrix> w, b;
    for (std::size_t p = 0; p < pieces; ++p) {
      w.push_back(rng_normal(rng, in, out, stddev));
      b.emplace_back(1, out);
    }
    return MaxoutLayer(std::move(w), std::move(b));
  }

  std::size_t pieces() const noexcept { return W_.size(); }
  std::size_t in_dim() const noexcept { return W_[0].rows(); }
  std::size_t out_dim() const noexcept { return W_[0].cols(); }

  /// Winning piece per (example, unit) from the last forward.
  const std::vector<std::uint32_t>& winners() const noexcept { return argmax_; }

  Matrix forward(const Matrix& x) {
    if (x.cols() != in_dim())
      throw ShapeError("MaxoutLayer: input " + x.shape_string() + " does not match weights " +
                       W_[0].shape_string());
    Matrix out = add_row_broadcast(matmul(x, W_[0]), b_[0]);
    argmax_.assign(out.size(), 0);
    for (std::size_t p = 1; p < W_.size(); ++p) {
      const Matrix z = add_row_broadcast(matmul(x, W_[p]), b_[p]);
      for (std::size_t i = 0; i < z.size(); ++i) {
        // Strict comparison keeps the lowest piece index on ties.
        if (z.values()[i] > out.values()[i]) {
          out.values()[i] = z.values()[i];
          argmax_[i] = static_cast<std::uint32_t>(p);
        }
      }
    }
    cache_input_ = x;
    has_cache_ = true;
    return out;
  }

  Matrix backward(const Matrix& upstream) {
    if (!has_cache_) throw StateError("MaxoutLayer: backward called before forward");
    if (upstream.rows() != cache_input_.rows() || upstream.cols() != out_dim())
      throw ShapeError("MaxoutLayer: upstream " + upstream.shape_string() +
                       " does not match forward output");
    Matrix dx(upstream.rows(), in_dim());
    for (std::size_t p = 0; p < W_.size(); ++p) {
      Matrix routed(upstream.rows(), upstream.cols());
      for (std::size_t i = 0; i < routed.size(); ++i)
        if (argmax_[i] == p) routed.values()[i] = upstream.values()[i];
      detail::copy_into(grad_W_[p], matmul_tn(cache_input_, routed));
      detail::copy_into(grad_b_[p], column_sums(routed));
      const Matrix part = matmul_nt(routed, W_[p]);
      for (std::size_t i = 0; i < dx.size(); ++i) dx.values()[i] += part.values()[i];
    }
    return dx;
  }

  std::vector<ParamRef> params() {
    std::vector<ParamRef> out;
    for (std::size_t p = 0; p < W_.size(); ++p) {
      out.push_back({"W" + std::to_string(p), W_[p].values(), grad_W_[p].values()});
      out.push_back({"b" + std::to_string(p), b_[p].values(), grad_b_[p].values()});
    }
    return out;
  }

  const Matrix& weights(std::size_t piece) const { return W_.at(piece); }
  const Matrix& bias(std::size_t piece) const { return b_.at(piece); }
  const Matrix& grad_weights(std::size_t piece) const { return grad_W_.at(piece); }
  const Matrix& grad_bias(std::size_t piece) const { return grad_b_.at(piece); }

 private:
  std::vector<Matrix> W_;
  std::vector<Matrix> b_;
  std::vector<Matrix> grad_W_;
  std::vector<Matrix> grad_b_;
  Matrix cache_input_;
  std::vector<std::uint32_t> argmax_;
  bool has_cache_ = false;
};

using Layer = std::variant<DenseLayer, BatchNormLayer, ActivationLayer, MaxoutLayer>;

inline Matrix layer_forward(Layer& layer, const Matrix& x, bool training) {
  return std::visit(
      [&](auto& l) -> Matrix {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, BatchNormLayer> || std::is_same_v<L, ActivationLayer>)
          return l.forward(x, training);
        else
          return l.forward(x);
      },
      layer);
}

inline Matrix layer_backward(Layer& layer, const Matrix& upstream) {
  return std::visit([&](auto& l) { return l.backward(upstream); }, layer);
}

/// Every trainable value of the layer, each exactly once, in a fixed order.
inline std::vector<ParamRef> layer_params(Layer& layer) {
  return std::visit([](auto& l) { return l.params(); }, layer);
}

inline std::string layer_name(const Layer& layer) {
  return std::visit(
      [](const auto& l) -> std::string {
        using L = std::decay_t<decltype(l)>;
        if constexpr (std::is_same_v<L, DenseLayer>)
          return "dense(" + std::to_string(l.in_dim()) + "->" + std::to_string(l.out_dim()) + ")";
        else if constexpr (std::is_same_v<L, BatchNormLayer>)
          return "batchnorm(" + std::to_string(l.features()) + ")";
        else if constexpr (std::is_same_v<L, ActivationLayer>)
          return std::string(activation_name(l.spec().kind()));
        else
          return "maxout(" + std::to_string(l.in_dim()) + "->" + std::to_string(l.out_dim()) +
                 ", k=" + std::to_string(l.pieces()) + ")";
      },
      layer);
}

}  // namespace terelu
