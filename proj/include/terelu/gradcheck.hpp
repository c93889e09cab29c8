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

// Central finite differences, used as the independent oracle for every
// analytic gradient in the library.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace terelu::gradcheck {

using ScalarFn = std::function<double(std::span<const double>)>;

inline constexpr double kDefaultStep = 1e-6;

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct GradReport {
  double max_rel_err = 0.0;
  std::size_t worst_index = 0;
  double analytic = 0.0;
  double numeric = 0.0;
  double tolerance = 0.0;
  bool passed = true;
};

/// Gradient of f at point by central differences with step h.
inline std::vector<double> central_diff(const ScalarFn& f, std::span<const double> point,
                                        double h = kDefaultStep) {
  if (!(h > 0.0)) throw std::invalid_argument("central_diff: step must be positive");
  std::vector<double> x(point.begin(), point.end());
  std::vector<double> grad(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x[i];
    x[i] = orig + h;
    const double plus = f(x);
    x[i] = orig - h;
    const double minus = f(x);
    x[i] = orig;
    if (!std::isfinite(plus) || !std::isfinite(minus))
      throw NonFiniteError("central_diff: non-finite function value at component " +
                           std::to_string(i));
    grad[i] = (plus - minus) / (2.0 * h);
  }
  return grad;
}

/// |a - n| / max(1, |a|, |n|)
inline double relative_error(double analytic, double numeric) {
  return std::abs(analytic - numeric) /
         std::max({1.0, std::abs(analytic), std::abs(numeric)});
}

/// Compares two gradients component by component and reports the worst one.
inline GradReport compare(std::span<const double> analytic, std::span<const double> numeric,
                          double tol) {
  if (analytic.size() != numeric.size())
    throw std::invalid_argument("gradcheck: analytic and numeric sizes differ");
  GradReport r;
  r.tolerance = tol;
  for (std::size_t i = 0; i < analytic.size(); ++i) {
    const double e = relative_error(analytic[i], numeric[i]);
    if (i == 0 || e > r.max_rel_err) {
      r.max_rel_err = e;
      r.worst_index = i;
      r.analytic = analytic[i];
      r.numeric = numeric[i];
    }
  }
  r.passed = r.max_rel_err < tol;
  return r;
}

inline GradReport check_gradient(const ScalarFn& f, std::span<const double> analytic_grad,
                                 std::span<const double> point, double tol,
                                 double h = kDefaultStep) {
  if (analytic_grad.size() != point.size())
    throw std::invalid_argument("check_gradient: gradient and point sizes differ");
  const auto numeric = central_diff(f, point, h);
  return compare(analytic_grad, numeric, tol);
}

/// Merges reports, keeping the worst component.
inline GradReport worst_of(const GradReport& a, const GradReport& b) {
  GradReport r = a.max_rel_err >= b.max_rel_err ? a : b;
  r.tolerance = std::min(a.tolerance, b.tolerance);
  r.passed = a.passed && b.passed;
  return r;
}

}  // namespace terelu::gradcheck
