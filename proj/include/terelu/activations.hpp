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
#include <array>
#include <cmath>
#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <string_view>
#include <type_traits>
#include <variant>
#include <vector>

namespace terelu {

struct ReluParams {};
struct TanhParams {};

/// Leaky rectifier; alpha is the slope for x <= 0.
struct LreluParams {
  double alpha = 0.01;
};

/// Exponential linear unit; alpha scales the negative branch.
struct EluParams {
  double alpha = 1.0;
};

/// S-shaped rectifier. The four parameters are fixed per layer, not learned.
struct SreluParams {
  double t_r = 1.0;
  double a_r = 0.5;
  double t_l = -1.0;
  double a_l = 0.1;
};

/// Adaptive piecewise linear unit: max(0, x) + sum_s a[s] * max(0, b[s] - x).
/// Hinge slopes and locations are fixed per layer.
struct AplParams {
  std::vector<double> a{0.5};
  std::vector<double> b{1.0};
};

/// alpha * log(1 + exp(beta * x)).
struct SoftplusParams {
  double alpha = 1.0;
  double beta = 1.0;
};

/// Thresholded exponential rectifier.
///
///   x <= 0      : alpha * (exp(x) - 1)
///   0 < x < mu  : x
///   x >= mu     : beta * (mu - (exp(mu - x) - 1))
///
/// alpha and mu are hyperparameters and must be positive. beta is the one
/// trainable scalar. The output approaches beta * (mu + 1) as x grows, and the
/// slope there shrinks as beta * exp(mu - x). With beta != 1 the function jumps
/// at x = mu: the left limit is mu while the value at mu is beta * mu.
struct TereluParams {
  double alpha = 1.0;
  double beta = 1.0;
  double mu = 1.0;
};

enum class ActivationKind { Relu, Lrelu, Elu, Srelu, Apl, ParametricSoftplus, Tanh, Terelu };

inline constexpr std::array<ActivationKind, 8> kAllActivationKinds{
    ActivationKind::Relu,  ActivationKind::Lrelu, ActivationKind::Elu,
    ActivationKind::Srelu, ActivationKind::Apl,   ActivationKind::ParametricSoftplus,
    ActivationKind::Tanh,  ActivationKind::Terelu};

/// Activation kind together with its parameter block. The variant index is the
/// kind, so the two can never disagree.
class ActivationSpec {
 public:
  using Params = std::variant<ReluParams, LreluParams, EluParams, SreluParams, AplParams,
                              SoftplusParams, TanhParams, TereluParams>;

  ActivationSpec() : params_(ReluParams{}) {}

  template <typename P>
    requires std::is_constructible_v<Params, P>
  ActivationSpec(P params) : params_(std::move(params)) {  // NOLINT(google-explicit-constructor)
    validate();
  }

  /// Default parameter block for a kind.
  static ActivationSpec defaults(ActivationKind kind) {
    switch (kind) {
      case ActivationKind::Relu: return ReluParams{};
      case ActivationKind::Lrelu: return LreluParams{};
      case ActivationKind::Elu: return EluParams{};
      case ActivationKind::Srelu: return SreluParams{};
      case ActivationKind::Apl: return AplParams{};
      case ActivationKind::ParametricSoftplus: return SoftplusParams{};
      case ActivationKind::Tanh: return TanhParams{};
      case ActivationKind::Terelu: return TereluParams{};
    }
    throw std::invalid_argument("unknown activation kind");
  }

  ActivationKind kind() const noexcept { return static_cast<ActivationKind>(params_.index()); }
  const Params& params() const noexcept { return params_; }

  template <typename P>
  const P* get_if() const noexcept {
    return std::get_if<P>(&params_);
  }

  /// Mutable access to the trainable beta, or nullptr for non-TERELU kinds.
  double* terelu_beta() noexcept {
    auto* p = std::get_if<TereluParams>(&params_);
    return p ? &p->beta : nullptr;
  }

 private:
  void validate() const {
    std::visit(
        [](const auto& p) {
          using P = std::decay_t<decltype(p)>;
          if constexpr (std::is_same_v<P, LreluParams> || std::is_same_v<P, EluParams>) {
            if (!(p.alpha >= 0.0)) throw std::invalid_argument("alpha must be >= 0");
          } else if constexpr (std::is_same_v<P, SreluParams>) {
            if (!(p.t_l <= p.t_r)) throw std::invalid_argument("SRELU requires t_l <= t_r");
          } else if constexpr (std::is_same_v<P, AplParams>) {
            if (p.a.empty()) throw std::invalid_argument("APL requires at least one hinge");
            if (p.a.size() != p.b.size())
              throw std::invalid_argument("APL hinge slope and location counts differ");
          } else if constexpr (std::is_same_v<P, SoftplusParams>) {
            if (p.beta == 0.0) throw std::invalid_argument("softplus beta must be nonzero");
          } else if constexpr (std::is_same_v<P, TereluParams>) {
            if (!(p.alpha > 0.0)) throw std::invalid_argument("TERELU alpha must be > 0");
            if (!(p.mu > 0.0)) throw std::invalid_argument("TERELU mu must be > 0");
          }
        },
        params_);
  }

  Params params_;
};

inline std::string_view activation_name(ActivationKind kind) {
  switch (kind) {
    case ActivationKind::Relu: return "relu";
    case ActivationKind::Lrelu: return "lrelu";
    case ActivationKind::Elu: return "elu";
    case ActivationKind::Srelu: return "srelu";
    case ActivationKind::Apl: return "apl";
    case ActivationKind::ParametricSoftplus: return "softplus";
    case ActivationKind::Tanh: return "tanh";
    case ActivationKind::Terelu: return "terelu";
  }
  return "unknown";
}

inline std::optional<ActivationKind> parse_activation_kind(std::string_view name) {
  for (auto k : kAllActivationKinds)
    if (activation_name(k) == name) return k;
  return std::nullopt;
}

namespace detail {

inline double softplus_unit(double z) {
  // log(1 + e^z) without overflow.
  return std::max(z, 0.0) + std::log1p(std::exp(-std::abs(z)));
}

inline double logistic(double z) {
  if (z >= 0.0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double terelu_forward(const TereluParams& p, double x) {
  if (x <= 0.0) return p.alpha * std::expm1(x);
  if (x < p.mu) return x;
  return p.beta * (p.mu - std::expm1(p.mu - x));
}

inline double value(const ReluParams&, double x) { return x > 0.0 ? x : 0.0; }
inline double slope(const ReluParams&, double x) { return x > 0.0 ? 1.0 : 0.0; }

inline double value(const LreluParams& p, double x) { return x > 0.0 ? x : p.alpha * x; }
inline double slope(const LreluParams& p, double x) { return x > 0.0 ? 1.0 : p.alpha; }

inline double value(const EluParams& p, double x) { return x > 0.0 ? x : p.alpha * std::expm1(x); }
inline double slope(const EluParams& p, double x) {
  return x > 0.0 ? 1.0 : p.alpha * std::expm1(x) + p.alpha;
}

inline double value(const SreluParams& p, double x) {
  if (x >= p.t_r) return p.t_r + p.a_r * (x - p.t_r);
  if (x <= p.t_l) return p.t_l + p.a_l * (x - p.t_l);
  return x;
}
inline double slope(const SreluParams& p, double x) {
  if (x >= p.t_r) return p.a_r;
  if (x <= p.t_l) return p.a_l;
  return 1.0;
}

inline double value(const AplParams& p, double x) {
  double y = std::max(0.0, x);
  for (std::size_t s = 0; s < p.a.size(); ++s) y += p.a[s] * std::max(0.0, -x + p.b[s]);
  return y;
}
inline double slope(const AplParams& p, double x) {
  double d = x > 0.0 ? 1.0 : 0.0;
  for (std::size_t s = 0; s < p.a.size(); ++s)
    if (x < p.b[s]) d -= p.a[s];
  return d;
}

inline double value(const SoftplusParams& p, double x) {
  return p.alpha * softplus_unit(p.beta * x);
}
inline double slope(const SoftplusParams& p, double x) {
  return p.alpha * p.beta * logistic(p.beta * x);
}

inline double value(const TanhParams&, double x) { return std::tanh(x); }
inline double slope(const TanhParams&, double x) {
  const double t = std::tanh(x);
  return 1.0 - t * t;
}

inline double value(const TereluParams& p, double x) { return terelu_forward(p, x); }
// Written in terms of the forward value, branch for branch.
inline double slope(const TereluParams& p, double x) {
  if (x <= 0.0) return terelu_forward(p, x) + p.alpha;
  if (x < p.mu) return 1.0;
  return -terelu_forward(p, x) + p.beta * p.mu + p.beta;
}

}  // namespace detail

/// Forward value of the activation at x.
inline double act_forward(const ActivationSpec& spec, double x) {
  return std::visit([x](const auto& p) { return detail::value(p, x); }, spec.params());
}

/// Derivative with respect to x. At kinks the branch chosen by act_forward's
/// boundary convention supplies the slope.
inline double act_dx(const ActivationSpec& spec, double x) {
  return std::visit([x](const auto& p) { return detail::slope(p, x); }, spec.params());
}

/// Derivative of the TERELU output with respect to beta; equals f(x) / beta
/// on the saturating branch and zero elsewhere.
inline double act_dbeta(const TereluParams& p, double x) {
  if (x < p.mu) return 0.0;
  return p.mu - std::expm1(p.mu - x);
}

/// Limit of TERELU as x -> infinity.
inline double terelu_saturation(const TereluParams& p) { return p.beta * (p.mu + 1.0); }

/// Points where the activation or its derivative is not smooth. Finite
/// difference checks stay clear of these.
inline std::vector<double> branch_boundaries(const ActivationSpec& spec) {
  return std::visit(
      [](const auto& p) -> std::vector<double> {
        using P = std::decay_t<decltype(p)>;
        if constexpr (std::is_same_v<P, ReluParams> || std::is_same_v<P, LreluParams> ||
                      std::is_same_v<P, EluParams>) {
          return {0.0};
        } else if constexpr (std::is_same_v<P, SreluParams>) {
          return {p.t_l, p.t_r};
        } else if constexpr (std::is_same_v<P, AplParams>) {
          std::vector<double> out{0.0};
          out.insert(out.end(), p.b.begin(), p.b.end());
          return out;
        } else if constexpr (std::is_same_v<P, TereluParams>) {
          return {0.0, p.mu};
        } else {
          return {};
        }
      },
      spec.params());
}

}  // namespace terelu
