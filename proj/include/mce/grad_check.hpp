/* Copyright 2026 The MCE-NMT Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#ifndef MCE_GRAD_CHECK_HPP_
#define MCE_GRAD_CHECK_HPP_

#include <algorithm>
#include <cmath>
#include <string>
#include <type_traits>
#include <utility>
#include <vector>

#include "mce/tensor.hpp"

namespace mce {

struct GradCheckResult {
  double max_rel_error = 0;
  std::string worst_tensor;
  std::size_t worst_index = 0;
  double analytic_at_worst = 0;
  double numeric_at_worst = 0;
  std::size_t entries_checked = 0;
};

inline double relative_error(double analytic, double numeric) {
  const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-8});
  return std::abs(analytic - numeric) / denom;
}

/// Compares analytic gradients against central differences
/// (f(p + eps) - f(p - eps)) / 2 eps for every entry of every tensor in
/// `params`. `fn(params, grads)` returns the scalar value and, when `grads`
/// is non-null, accumulates the analytic gradient into it (zeroed first).
template <typename P, typename Fn>
GradCheckResult grad_check(Fn&& fn, P& params, double epsilon = 1e-5) {
  P grads = zeros_like_params(params);
  const double base = static_cast<double>(fn(static_cast<const P&>(params), &grads));
  if (!std::isfinite(base)) throw NonFiniteError("grad_check: objective is non-finite");

  std::vector<std::pair<std::string, const Tensor<double>*>> analytic;
  grads.visit([&](std::string_view name, const auto& t) { analytic.emplace_back(std::string(name), &t); });

  GradCheckResult result;
  std::size_t tensor_index = 0;
  params.visit([&](std::string_view name, auto& t) {
    const auto& g = *analytic.at(tensor_index++).second;
    for (std::size_t i = 0; i < t.size(); ++i) {
      const auto saved = t[i];
      t[i] = saved + epsilon;
      const double plus = static_cast<double>(fn(static_cast<const P&>(params), nullptr));
      t[i] = saved - epsilon;
      const double minus = static_cast<double>(fn(static_cast<const P&>(params), nullptr));
      t[i] = saved;
      if (!std::isfinite(plus) || !std::isfinite(minus)) {
        throw NonFiniteError("grad_check: objective is non-finite near '" + std::string(name) + "'");
      }
      const double numeric = (plus - minus) / (2 * epsilon);
      const double err = relative_error(g[i], numeric);
      ++result.entries_checked;
      if (err > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = err;
        result.worst_tensor = std::string(name);
        result.worst_index = i;
        result.analytic_at_worst = g[i];
        result.numeric_at_worst = numeric;
      }
    }
  });
  return result;
}

/// Same comparison, but the finite differences are taken on an
/// extended-precision copy of the problem. `make<S>()` builds the parameter
/// set at scalar type S (identical values for every S) and `fn<S>(params,
/// grads)` evaluates it. The analytic gradient is always computed at 64-bit;
/// only the oracle runs wider, which pushes the difference-quotient roundoff
/// floor far below gradients of order 1e-8.
template <typename Make, typename Fn>
GradCheckResult grad_check_extended(Make&& make, Fn&& fn, double epsilon = 1e-5) {
  using Wide = long double;
  auto params = make.template operator()<double>();
  auto wide = make.template operator()<Wide>();
  auto grads = zeros_like_params(params);
  const double base = static_cast<double>(fn(std::as_const(params), &grads));
  if (!std::isfinite(base)) throw NonFiniteError("grad_check: objective is non-finite");

  std::vector<std::pair<std::string, const Tensor<double>*>> analytic;
  grads.visit([&](std::string_view name, const auto& t) { analytic.emplace_back(std::string(name), &t); });
  std::vector<Tensor<Wide>*> targets;
  wide.visit([&](std::string_view, auto& t) { targets.push_back(&t); });
  if (targets.size() != analytic.size()) throw Error("grad_check: parameter sets differ in layout");

  using WideParams = std::decay_t<decltype(wide)>;
  GradCheckResult result;
  const Wide step = static_cast<Wide>(epsilon);
  for (std::size_t k = 0; k < targets.size(); ++k) {
    auto& t = *targets[k];
    const auto& g = *analytic[k].second;
    if (t.size() != g.size()) throw Error("grad_check: tensor size mismatch at " + analytic[k].first);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const Wide saved = t[i];
      t[i] = saved + step;
      const Wide plus = fn(static_cast<const WideParams&>(wide), static_cast<WideParams*>(nullptr));
      t[i] = saved - step;
      const Wide minus = fn(static_cast<const WideParams&>(wide), static_cast<WideParams*>(nullptr));
      t[i] = saved;
      const double numeric = static_cast<double>((plus - minus) / (2 * step));
      if (!std::isfinite(numeric)) {
        throw NonFiniteError("grad_check: objective is non-finite near '" + analytic[k].first + "'");
      }
      const double err = relative_error(g[i], numeric);
      ++result.entries_checked;
      if (err > result.max_rel_error || result.entries_checked == 1) {
        result.max_rel_error = err;
        result.worst_tensor = analytic[k].first;
        result.worst_index = i;
        result.analytic_at_worst = g[i];
        result.numeric_at_worst = numeric;
      }
    }
  }
  return result;
}

}  // namespace mce

#endif  // MCE_GRAD_CHECK_HPP_
