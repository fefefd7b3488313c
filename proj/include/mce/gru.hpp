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

#ifndef MCE_GRU_HPP_
#define MCE_GRU_HPP_

#include <span>
#include <string>
#include <vector>

#include "mce/ops.hpp"

namespace mce {

/// Candidate (W, U, b), reset (Wr, Ur, br) and update (Wz, Uz, bz) weights.
template <typename T>
struct GruParams {
  Tensor<T> w, u, b;
  Tensor<T> wr, ur, br;
  Tensor<T> wz, uz, bz;

  static GruParams init(std::size_t input, std::size_t hidden, Rng& rng, double range = 0.04) {
    GruParams p;
    p.w = uniform_init<T>({hidden, input}, rng, range);
    p.u = uniform_init<T>({hidden, hidden}, rng, range);
    p.b = uniform_init<T>({hidden}, rng, range);
    p.wr = uniform_init<T>({hidden, input}, rng, range);
    p.ur = uniform_init<T>({hidden, hidden}, rng, range);
    p.br = uniform_init<T>({hidden}, rng, range);
    p.wz = uniform_init<T>({hidden, input}, rng, range);
    p.uz = uniform_init<T>({hidden, hidden}, rng, range);
    p.bz = uniform_init<T>({hidden}, rng, range);
    return p;
  }

  std::size_t input_size() const { return w.cols(); }
  std::size_t hidden_size() const { return w.rows(); }

  template <typename F>
  void visit(F&& f, const std::string& prefix = "") {
    visit_impl(*this, f, prefix);
  }
  template <typename F>
  void visit(F&& f, const std::string& prefix = "") const {
    visit_impl(*this, f, prefix);
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& s, F& f, const std::string& prefix) {
    f(prefix + "W", s.w);
    f(prefix + "U", s.u);
    f(prefix + "b", s.b);
    f(prefix + "W_r", s.wr);
    f(prefix + "U_r", s.ur);
    f(prefix + "b_r", s.br);
    f(prefix + "W_z", s.wz);
    f(prefix + "U_z", s.uz);
    f(prefix + "b_z", s.bz);
  }
};

/// Everything the backward pass of one step needs.
template <typename T>
struct GruCache {
  std::vector<T> x, h_prev;
  std::vector<T> r, z, uh, cand, h;
};

/// r = sig(Wr x + Ur h + br), z = sig(Wz x + Uz h + bz),
/// h' = tanh(W x + r * (U h) + b), h_t = (1 - z) * h' + z * h.
template <typename T>
GruCache<T> gru_forward(const GruParams<T>& p, std::span<const T> x, std::span<const T> h_prev) {
  const std::size_t d = p.hidden_size();
  if (x.size() != p.input_size() || h_prev.size() != d) {
    throw ShapeError("gru_step: input " + std::to_string(x.size()) + " / state " +
                     std::to_string(h_prev.size()) + " vs params " +
                     std::to_string(p.input_size()) + " / " + std::to_string(d));
  }
  GruCache<T> c;
  c.x.assign(x.begin(), x.end());
  c.h_prev.assign(h_prev.begin(), h_prev.end());
  c.r.assign(p.br.data().begin(), p.br.data().end());
  c.z.assign(p.bz.data().begin(), p.bz.data().end());
  c.cand.assign(p.b.data().begin(), p.b.data().end());
  c.uh.assign(d, T(0));
  gemv_acc(p.wr, x, std::span<T>(c.r));
  gemv_acc(p.ur, h_prev, std::span<T>(c.r));
  gemv_acc(p.wz, x, std::span<T>(c.z));
  gemv_acc(p.uz, h_prev, std::span<T>(c.z));
  sigmoid_inplace(std::span<T>(c.r));
  sigmoid_inplace(std::span<T>(c.z));
  gemv_acc(p.u, h_prev, std::span<T>(c.uh));
  gemv_acc(p.w, x, std::span<T>(c.cand));
  for (std::size_t i = 0; i < d; ++i) c.cand[i] += c.r[i] * c.uh[i];
  tanh_inplace(std::span<T>(c.cand));
  c.h.resize(d);
  for (std::size_t i = 0; i < d; ++i) c.h[i] = (T(1) - c.z[i]) * c.cand[i] + c.z[i] * h_prev[i];
  return c;
}

template <typename T>
std::vector<T> gru_step(const GruParams<T>& p, std::span<const T> x, std::span<const T> h_prev) {
  return gru_forward(p, x, h_prev).h;
}

/// Accumulates parameter gradients into `g` and input/state gradients into
/// `dx` / `dh_prev` given dL/dh_t.
template <typename T>
void gru_backward(const GruParams<T>& p, const GruCache<T>& c, std::span<const T> dh,
                  GruParams<T>& g, std::span<T> dx, std::span<T> dh_prev) {
  const std::size_t d = p.hidden_size();
  std::vector<T> da_z(d), da_c(d), da_r(d), du(d);
  for (std::size_t i = 0; i < d; ++i) {
    const T dz = dh[i] * (c.h_prev[i] - c.cand[i]);
    const T dcand = dh[i] * (T(1) - c.z[i]);
    dh_prev[i] += dh[i] * c.z[i];
    da_z[i] = dz * c.z[i] * (T(1) - c.z[i]);
    da_c[i] = dcand * (T(1) - c.cand[i] * c.cand[i]);
    const T dr = da_c[i] * c.uh[i];
    du[i] = da_c[i] * c.r[i];
    da_r[i] = dr * c.r[i] * (T(1) - c.r[i]);
  }
  const std::span<const T> x(c.x), h(c.h_prev);
  const std::span<const T> daz(da_z), dac(da_c), dar(da_r), duh(du);

  ger_acc(g.wz, daz, x);
  ger_acc(g.uz, daz, h);
  add_to(daz, g.bz.data());
  gemv_t_acc(p.wz, daz, dx);
  gemv_t_acc(p.uz, daz, dh_prev);

  ger_acc(g.w, dac, x);
  add_to(dac, g.b.data());
  gemv_t_acc(p.w, dac, dx);
  ger_acc(g.u, duh, h);
  gemv_t_acc(p.u, duh, dh_prev);

  ger_acc(g.wr, dar, x);
  ger_acc(g.ur, dar, h);
  add_to(dar, g.br.data());
  gemv_t_acc(p.wr, dar, dx);
  gemv_t_acc(p.ur, dar, dh_prev);
}

}  // namespace mce

#endif  // MCE_GRU_HPP_
