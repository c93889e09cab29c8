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
#include <cstdio>
#include <functional>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "terelu/activations.hpp"
#include "terelu/gradcheck.hpp"
#include "terelu/layers.hpp"
#include "terelu/network.hpp"
#include "terelu/numerics.hpp"

namespace terelu::gradcheck {

inline constexpr double kBoundaryExclusion = 1e-3;
inline constexpr double kActivationTol = 1e-6;
inline constexpr double kDenseTol = 1e-6;
inline constexpr double kBatchNormTol = 1e-5;
inline constexpr double kMaxoutTol = 1e-6;
inline constexpr double kModelTol = 1e-4;
inline constexpr double kModelBatchNormTol = 1e-3;

using DerivativeFn = std::function<double(const ActivationSpec&, double)>;

struct NamedReport {
  std::string name;
  GradReport report;
};

inline bool near_boundary(const ActivationSpec& spec, double x, double radius) {
  for (double b : branch_boundaries(spec))
    if (std::abs(x - b) < radius) return true;
  return false;
}

/// Uniform samples in [lo, hi] that avoid every branch boundary of spec.
inline std::vector<double> sample_points(const ActivationSpec& spec, std::size_t count, Rng& rng,
                                         double lo = -6.0, double hi = 6.0,
                                         double radius = kBoundaryExclusion) {
  std::vector<double> xs;
  while (xs.size() < count) {
    const double x = rng.uniform(lo, hi);
    if (!near_boundary(spec, x, radius)) xs.push_back(x);
  }
  return xs;
}

/// act_dx (or an injected replacement) against central differences of act_forward.
inline GradReport check_activation_dx(const ActivationSpec& spec, std::span<const double> xs,
                                      const DerivativeFn& dx = act_dx,
                                      double tol = kActivationTol) {
  std::vector<double> analytic, numeric;
  for (double x : xs) {
    analytic.push_back(dx(spec, x));
    const double pt[1] = {x};
    numeric.push_back(
        central_diff([&spec](std::span<const double> v) { return act_forward(spec, v[0]); }, pt)[0]);
  }
  return compare(analytic, numeric, tol);
}

/// act_dbeta against central differences over beta at each fixed x.
inline GradReport check_terelu_dbeta(const TereluParams& params, std::span<const double> xs,
                                     double tol = kActivationTol) {
  std::vector<double> analytic, numeric;
  for (double x : xs) {
    analytic.push_back(act_dbeta(params, x));
    const double pt[1] = {params.beta};
    numeric.push_back(central_diff(
        [&](std::span<const double> v) {
          TereluParams p = params;
          p.beta = v[0];
          return terelu::detail::terelu_forward(p, x);
        },
        pt)[0]);
  }
  return compare(analytic, numeric, tol);
}

namespace detail {

inline std::vector<double> flatten(const std::vector<ParamRef>& ps, bool grads) {
  std::vector<double> out;
  for (const auto& p : ps) {
    auto s = grads ? p.grad : p.value;
    out.insert(out.end(), s.begin(), s.end());
  }
  return out;
}

inline void assign(const std::vector<ParamRef>& ps, std::span<const double> v) {
  std::size_t k = 0;
  for (const auto& p : ps)
    for (double& x : p.value) x = v[k++];
}

inline double weighted_sum(const Matrix& out, const Matrix& weights) {
  double s = 0.0;
  for (std::size_t i = 0; i < out.size(); ++i) s += out.values()[i] * weights.values()[i];
  return s;
}

}  // namespace detail

/// Checks a layer's backward pass against central differences of
/// L(x, theta) = sum(C .* forward(x)) for a fixed random C, both with respect
/// to the input and to every parameter returned by layer_params.
inline GradReport check_layer(Layer& layer, const Matrix& x, const Matrix& probe, double tol,
                              bool training = true) {
  const Matrix out = layer_forward(layer, x, training);
  if (out.rows() != probe.rows() || out.cols() != probe.cols())
    throw ShapeError("check_layer: probe " + probe.shape_string() + " does not match output " +
                     out.shape_string());
  const Matrix dx = layer_backward(layer, probe);
  const auto params = layer_params(layer);
  const auto analytic_params = detail::flatten(params, /*grads=*/true);

  const auto input_fn = [&](std::span<const double> v) {
    Matrix xin(x.rows(), x.cols());
    std::copy(v.begin(), v.end(), xin.values().begin());
    return detail::weighted_sum(layer_forward(layer, xin, training), probe);
  };
  GradReport input_report = check_gradient(input_fn, dx.values(), x.values(), tol);

  if (params.empty()) return input_report;
  const auto original = detail::flatten(params, /*grads=*/false);
  const auto param_fn = [&](std::span<const double> v) {
    detail::assign(params, v);
    const double r = detail::weighted_sum(layer_forward(layer, x, training), probe);
    detail::assign(params, original);
    return r;
  };
  GradReport param_report = check_gradient(param_fn, analytic_params, original, tol);
  return worst_of(input_report, param_report);
}

/// End-to-end check of every model parameter against the scalar batch loss.
inline GradReport check_model(Model& model, const Matrix& x, std::span<const std::size_t> labels,
                              double tol) {
  const Matrix logits = model.forward(x, /*training=*/true);
  model.backward(softmax_xent(logits, labels).grad);
  const auto params = model.params();
  const auto analytic = detail::flatten(params, /*grads=*/true);
  const auto original = detail::flatten(params, /*grads=*/false);
  const auto loss_fn = [&](std::span<const double> v) {
    detail::assign(params, v);
    const double loss = softmax_xent(model.forward(x, /*training=*/true), labels).loss;
    detail::assign(params, original);
    return loss;
  };
  return check_gradient(loss_fn, analytic, original, tol);
}

struct SuiteOptions {
  std::size_t points = 200;
  std::uint64_t seed = 2024;
  std::optional<ActivationKind> only_kind;
  /// Replacement for act_dx, used to confirm the suite catches a wrong derivative.
  DerivativeFn dx = act_dx;
};

/// Random activation-layer input whose entries avoid branch boundaries.
inline Matrix activation_input(const ActivationSpec& spec, std::size_t rows, std::size_t cols,
                               Rng& rng) {
  Matrix x(rows, cols);
  const auto xs = sample_points(spec, x.size(), rng, -3.0, 3.0, 1e-2);
  std::copy(xs.begin(), xs.end(), x.values().begin());
  return x;
}

/// True when every unit of the maxout layer has a winning piece ahead of the
/// runner-up by at least margin on input x.
inline bool maxout_has_margin(const MaxoutLayer& layer, const Matrix& x, double margin) {
  std::vector<Matrix> z;
  for (std::size_t p = 0; p < layer.pieces(); ++p)
    z.push_back(add_row_broadcast(matmul(x, layer.weights(p)), layer.bias(p)));
  for (std::size_t i = 0; i < z[0].size(); ++i) {
    std::vector<double> v;
    for (const auto& m : z) v.push_back(m.values()[i]);
    std::sort(v.rbegin(), v.rend());
    if (v[0] - v[1] < margin) return false;
  }
  return true;
}

inline std::string format_bound(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

/// Runs the full suite: every activation kind (plus the TERELU beta gradient),
/// every layer type, and end-to-end 2-3-2 models with and without batch norm.
inline std::vector<NamedReport> run_suite(const SuiteOptions& opt) {
  std::vector<NamedReport> out;
  Rng rng(opt.seed);
  for (auto kind : kAllActivationKinds) {
    if (opt.only_kind && *opt.only_kind != kind) continue;
    const auto spec = ActivationSpec::defaults(kind);
    const auto xs = sample_points(spec, opt.points, rng);
    out.push_back({"act_dx/" + std::string(activation_name(kind)),
                   check_activation_dx(spec, xs, opt.dx)});
    if (kind == ActivationKind::Terelu)
      out.push_back({"act_dbeta/terelu", check_terelu_dbeta(TereluParams{}, xs)});
  }
  if (opt.only_kind) return out;

  {
    Layer dense = DenseLayer::random(3, 2, 1.0, rng);
    const Matrix x = rng_normal(rng, 4, 3, 1.0);
    out.push_back({"layer/dense", check_layer(dense, x, rng_normal(rng, 4, 2, 1.0), kDenseTol)});
  }
  {
    Layer bn = BatchNormLayer(3);
    auto& l = std::get<BatchNormLayer>(bn);
    auto ps = l.params();
    for (double& g : ps[0].value) g = rng.uniform(0.5, 1.5);
    for (double& d : ps[1].value) d = rng.uniform(-0.5, 0.5);
    const Matrix x = rng_normal(rng, 4, 3, 1.0);
    out.push_back(
        {"layer/batchnorm", check_layer(bn, x, rng_normal(rng, 4, 3, 1.0), kBatchNormTol)});
  }
  for (auto kind : kAllActivationKinds) {
    Layer act = ActivationLayer(ActivationSpec::defaults(kind));
    const auto spec = ActivationSpec::defaults(kind);
    const Matrix x = activation_input(spec, 4, 3, rng);
    out.push_back({"layer/activation/" + std::string(activation_name(kind)),
                   check_layer(act, x, rng_normal(rng, 4, 3, 1.0), kActivationTol)});
  }
  {
    Layer mo = MaxoutLayer::random(3, 2, 3, 1.0, rng);
    Matrix x = rng_normal(rng, 4, 3, 1.0);
    while (!maxout_has_margin(std::get<MaxoutLayer>(mo), x, 1e-3)) x = rng_normal(rng, 4, 3, 1.0);
    out.push_back({"layer/maxout", check_layer(mo, x, rng_normal(rng, 4, 2, 1.0), kMaxoutTol)});
  }

  const Matrix x8 = rng_normal(rng, 8, 2, 1.0);
  std::vector<std::size_t> y8(8);
  for (auto& y : y8) y = rng.below(2);
  for (auto kind : kAllActivationKinds) {
    auto spec = ActivationSpec::defaults(kind);
    for (bool bn : {false, true}) {
      Model m = build_fcnn(1, 3, 2, 2, spec, bn, opt.seed + 17);
      out.push_back({"model/" + std::string(activation_name(kind)) + (bn ? "+bn" : ""),
                     check_model(m, x8, y8, bn ? kModelBatchNormTol : kModelTol)});
    }
  }
  for (bool bn : {false, true}) {
    Model m = build_maxout_net(1, 3, 2, 2, 2, bn, opt.seed + 19);
    out.push_back({std::string("model/maxout") + (bn ? "+bn" : ""),
                   check_model(m, x8, y8, bn ? kModelBatchNormTol : kModelTol)});
  }
  return out;
}

/// Per-branch error breakdown for one activation kind.
inline void print_branch_breakdown(std::ostream& os, const ActivationSpec& spec,
                                   std::span<const double> xs, const DerivativeFn& dx = act_dx) {
  auto bounds = branch_boundaries(spec);
  std::sort(bounds.begin(), bounds.end());
  bounds.erase(std::unique(bounds.begin(), bounds.end()), bounds.end());
  std::vector<std::vector<double>> regions(bounds.size() + 1);
  for (double x : xs) {
    std::size_t r = 0;
    while (r < bounds.size() && x > bounds[r]) ++r;
    regions[r].push_back(x);
  }
  for (std::size_t r = 0; r < regions.size(); ++r) {
    std::string lo = r == 0 ? "-inf" : format_bound(bounds[r - 1]);
    std::string hi = r == bounds.size() ? "+inf" : format_bound(bounds[r]);
    char line[160];
    if (regions[r].empty()) {
      std::snprintf(line, sizeof line, "  branch (%s, %s): no samples\n", lo.c_str(), hi.c_str());
    } else {
      const auto rep = check_activation_dx(spec, regions[r], dx);
      std::snprintf(line, sizeof line, "  branch (%s, %s): n=%zu max_rel_err=%.3e\n", lo.c_str(),
                    hi.c_str(), regions[r].size(), rep.max_rel_err);
    }
    os << line;
  }
}

}  // namespace terelu::gradcheck
