// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <span>
#include <vector>

#include "dvclip/tensor.hpp"

namespace dvclip {

using ScalarFunction = std::function<Tensor(const Tensor&)>;

namespace detail {

inline double checked_value(const ScalarFunction& f, const Tensor& params) {
  const double v = f(params).item();
  if (!std::isfinite(v)) throw DomainError("finite_difference_check: function value is not finite");
  return v;
}

}  // namespace detail

/// Central-difference gradient of `f` at `params`.
inline std::vector<double> numeric_gradient(const ScalarFunction& f, const Tensor& params, double eps) {
  if (!(eps > 0.0)) throw DomainError("finite_difference_check: eps must be positive");
  std::vector<double> base(params.values().begin(), params.values().end());
  std::vector<double> out(base.size());
  for (std::size_t i = 0; i < base.size(); ++i) {
    auto plus = base;
    auto minus = base;
    plus[i] += eps;
    minus[i] -= eps;
    const double fp = detail::checked_value(f, Tensor(params.shape(), std::move(plus)));
    const double fm = detail::checked_value(f, Tensor(params.shape(), std::move(minus)));
    out[i] = (fp - fm) / (2.0 * eps);
  }
  return out;
}

/// max_i |a_i - n_i| / max(1e-12, |a_i| + |n_i|) against central differences.
inline double relative_gradient_error(const ScalarFunction& f, const Tensor& params,
                                      std::span<const double> analytic, double eps) {
  if (analytic.size() != params.numel()) throw ShapeError("analytic gradient size mismatch");
  const auto numeric = numeric_gradient(f, params, eps);
  double worst = 0.0;
  for (std::size_t i = 0; i < numeric.size(); ++i) {
    const double denom = std::max(1e-12, std::abs(analytic[i]) + std::abs(numeric[i]));
    worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
  }
  return worst;
}

/// Compares backward() through `f` with central differences at `params`.
inline double finite_difference_check(const ScalarFunction& f, const Tensor& params, double eps = 1e-5) {
  if (!(eps > 0.0)) throw DomainError("finite_difference_check: eps must be positive");
  Tensor leaf = params.clone();
  leaf.set_requires_grad(true);
  Tensor loss = f(leaf);
  if (!std::isfinite(loss.item())) throw DomainError("finite_difference_check: function value is not finite");
  backward(loss);
  std::vector<double> analytic(leaf.numel(), 0.0);
  if (leaf.has_grad()) std::copy(leaf.grad().begin(), leaf.grad().end(), analytic.begin());
  return relative_gradient_error(f, params, analytic, eps);
}

}  // namespace dvclip
