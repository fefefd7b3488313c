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

#ifndef MCE_COMBINER_HPP_
#define MCE_COMBINER_HPP_

#include <string>

#include "mce/ops.hpp"

namespace mce {

/// g = sig(W_g X_i + U_g Y_i + b_g), applied per annotation row.
template <typename T>
struct GateParams {
  Tensor<T> w, u, b;

  static GateParams init(std::size_t width, Rng& rng, double range = 0.04) {
    GateParams p;
    p.w = uniform_init<T>({width, width}, rng, range);
    p.u = uniform_init<T>({width, width}, rng, range);
    p.b = uniform_init<T>({width}, rng, range);
    return p;
  }

  bool present() const { return !w.empty(); }

  template <typename F>
  void visit(F&& f, const std::string& prefix = "") {
    if (!present()) return;
    f(prefix + "W", w);
    f(prefix + "U", u);
    f(prefix + "b", b);
  }
  template <typename F>
  void visit(F&& f, const std::string& prefix = "") const {
    if (!present()) return;
    f(prefix + "W", w);
    f(prefix + "U", u);
    f(prefix + "b", b);
  }
};

template <typename T>
struct BlendCache {
  Tensor<T> gate;    // (n x D)
  Tensor<T> output;  // g * first + (1 - g) * second
};

/// Position-wise convex combination of two channel matrices.
template <typename T>
BlendCache<T> gated_blend(const GateParams<T>& p, const Tensor<T>& first, const Tensor<T>& second) {
  if (first.shape() != second.shape()) {
    throw ShapeError("gated_blend: " + shape_string(first.shape()) + " vs " +
                     shape_string(second.shape()));
  }
  if (first.cols() != p.b.size()) throw ShapeError("gated_blend: gate width mismatch");
  BlendCache<T> c;
  c.gate = Tensor<T>(first.shape());
  c.output = Tensor<T>(first.shape());
  for (std::size_t i = 0; i < first.rows(); ++i) {
    auto g = c.gate.row(i);
    add_to(p.b.data(), g);
    gemv_acc(p.w, first.row(i), g);
    gemv_acc(p.u, second.row(i), g);
    sigmoid_inplace(g);
    const auto x = first.row(i);
    const auto y = second.row(i);
    auto out = c.output.row(i);
    for (std::size_t j = 0; j < g.size(); ++j) out[j] = g[j] * x[j] + (T(1) - g[j]) * y[j];
  }
  return c;
}

template <typename T>
void gated_blend_backward(const GateParams<T>& p, const Tensor<T>& first, const Tensor<T>& second,
                          const BlendCache<T>& c, const Tensor<T>& doutput, GateParams<T>& g,
                          Tensor<T>& dfirst, Tensor<T>& dsecond) {
  const std::size_t width = first.cols();
  std::vector<T> dpre(width);
  for (std::size_t i = 0; i < first.rows(); ++i) {
    const auto gate = c.gate.row(i);
    const auto x = first.row(i);
    const auto y = second.row(i);
    const auto dout = doutput.row(i);
    auto dx = dfirst.row(i);
    auto dy = dsecond.row(i);
    for (std::size_t j = 0; j < width; ++j) {
      dx[j] += gate[j] * dout[j];
      dy[j] += (T(1) - gate[j]) * dout[j];
      dpre[j] = dout[j] * (x[j] - y[j]) * gate[j] * (T(1) - gate[j]);
    }
    const std::span<const T> dp(dpre);
    ger_acc(g.w, dp, x);
    ger_acc(g.u, dp, y);
    add_to(dp, g.b.data());
    gemv_t_acc(p.w, dp, dx);
    gemv_t_acc(p.u, dp, dy);
  }
}

}  // namespace mce

#endif  // MCE_COMBINER_HPP_
