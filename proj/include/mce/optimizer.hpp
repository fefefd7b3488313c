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

#ifndef MCE_OPTIMIZER_HPP_
#define MCE_OPTIMIZER_HPP_

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <type_traits>
#include <vector>

#include "mce/tensor.hpp"

namespace mce {

/// Inverse-square-root schedule with linear warmup:
///   a = step / num_gpus
///   lrate = d^-0.5 * min(a^-0.5, a * warmup^-1.5)
inline double lrate(std::uint64_t step, double d, double warmup = 6000, double num_gpus = 1) {
  if (step == 0) throw Error("lrate: step must be at least 1");
  if (!(d > 0) || !(warmup > 0) || !(num_gpus > 0)) throw Error("lrate: d, warmup and num_gpus must be positive");
  const double a = static_cast<double>(step) / num_gpus;
  return std::pow(d, -0.5) * std::min(std::pow(a, -0.5), a * std::pow(warmup, -1.5));
}

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.98;
  double epsilon = 1e-9;
  double warmup = 6000;
  double num_gpus = 1;
  double model_dim = 512;  // d in the schedule
};

/// Moments shape-match the parameter set P; `step` counts completed updates.
template <typename P>
struct AdamState {
  AdamConfig config;
  P m, v;
  std::uint64_t step = 0;

  AdamState() = default;
  AdamState(AdamConfig cfg, const P& params)
      : config(cfg), m(zeros_like_params(params)), v(zeros_like_params(params)) {}
};

/// One bias-corrected Adam update; returns the learning rate used. Throws
/// before touching anything if a gradient is non-finite.
template <typename P>
double adam_step(P& params, const P& grads, AdamState<P>& state) {
  grads.visit([](std::string_view name, const auto& g) {
    for (auto x : g.data()) {
      if (!std::isfinite(x)) throw NonFiniteError("adam_step: non-finite gradient in '" + std::string(name) + "'");
    }
  });
  const auto& c = state.config;
  const std::uint64_t t = state.step + 1;
  const double lr = lrate(t, c.model_dim, c.warmup, c.num_gpus);
  const double correct1 = 1.0 - std::pow(c.beta1, static_cast<double>(t));
  const double correct2 = 1.0 - std::pow(c.beta2, static_cast<double>(t));

  std::vector<const void*> grad_tensors;
  std::vector<void*> m_tensors, v_tensors;
  grads.visit([&](std::string_view, const auto& g) { grad_tensors.push_back(&g); });
  state.m.visit([&](std::string_view, auto& m) { m_tensors.push_back(&m); });
  state.v.visit([&](std::string_view, auto& v) { v_tensors.push_back(&v); });
  if (m_tensors.size() != grad_tensors.size() || v_tensors.size() != grad_tensors.size()) {
    throw ShapeError("adam_step: optimizer state does not match the parameters");
  }
  std::size_t k = 0;
  params.visit([&](std::string_view name, auto& p) {
    using TensorT = std::decay_t<decltype(p)>;
    using V = typename TensorT::value_type;
    const auto& g = *static_cast<const TensorT*>(grad_tensors[k]);
    auto& m = *static_cast<TensorT*>(m_tensors[k]);
    auto& v = *static_cast<TensorT*>(v_tensors[k]);
    ++k;
    if (g.size() != p.size() || m.size() != p.size() || v.size() != p.size()) {
      throw ShapeError("adam_step: shape mismatch at '" + std::string(name) + "'");
    }
    for (std::size_t i = 0; i < p.size(); ++i) {
      const double gi = static_cast<double>(g[i]);
      const double mi = c.beta1 * static_cast<double>(m[i]) + (1 - c.beta1) * gi;
      const double vi = c.beta2 * static_cast<double>(v[i]) + (1 - c.beta2) * gi * gi;
      m[i] = static_cast<V>(mi);
      v[i] = static_cast<V>(vi);
      const double update = lr * (mi / correct1) / (std::sqrt(vi / correct2) + c.epsilon);
      p[i] = static_cast<V>(static_cast<double>(p[i]) - update);
    }
  });
  state.step = t;
  return lr;
}

}  // namespace mce

#endif  // MCE_OPTIMIZER_HPP_
