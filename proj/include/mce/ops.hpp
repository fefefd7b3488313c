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

#ifndef MCE_OPS_HPP_
#define MCE_OPS_HPP_

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "mce/rng.hpp"
#include "mce/tensor.hpp"

namespace mce {

// ---------------------------------------------------------------------------
// Activations
// ---------------------------------------------------------------------------

template <typename T>
T sigmoid(T x) {
  if (!std::isfinite(x)) throw NonFiniteError("sigmoid of non-finite value");
  if (x >= 0) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

template <typename T>
T tanh_checked(T x) {
  if (!std::isfinite(x)) throw NonFiniteError("tanh of non-finite value");
  return std::tanh(x);
}

template <typename T>
std::vector<T> sigmoid(std::span<const T> v) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = sigmoid(v[i]);
  return out;
}

template <typename T>
std::vector<T> tanh(std::span<const T> v) {
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = tanh_checked(v[i]);
  return out;
}

template <typename T>
void sigmoid_inplace(std::span<T> v) {
  for (auto& x : v) x = sigmoid(x);
}

template <typename T>
void tanh_inplace(std::span<T> v) {
  for (auto& x : v) x = tanh_checked(x);
}

/// Max-subtracted softmax. Entries equal to -inf are treated as masked and get
/// exactly zero probability; at least one entry must be finite.
template <typename T>
std::vector<T> softmax(std::span<const T> v) {
  if (v.empty()) throw Error("softmax of empty vector");
  T hi = -std::numeric_limits<T>::infinity();
  for (T x : v) {
    if (std::isnan(x) || x == std::numeric_limits<T>::infinity()) {
      throw NonFiniteError("softmax of non-finite value");
    }
    hi = std::max(hi, x);
  }
  if (!std::isfinite(hi)) throw Error("softmax with every entry masked");
  std::vector<T> out(v.size());
  T total = 0;
  for (std::size_t i = 0; i < v.size(); ++i) {
    out[i] = std::isfinite(v[i]) ? std::exp(v[i] - hi) : T(0);
    total += out[i];
  }
  for (auto& x : out) x /= total;
  return out;
}

template <typename T>
std::vector<T> softmax(const std::vector<T>& v) {
  return softmax(std::span<const T>(v));
}

template <typename T>
std::vector<T> log_softmax(std::span<const T> v) {
  if (v.empty()) throw Error("log_softmax of empty vector");
  require_finite(v, "log_softmax input");
  const T hi = *std::max_element(v.begin(), v.end());
  T total = 0;
  for (T x : v) total += std::exp(x - hi);
  const T lse = hi + std::log(total);
  std::vector<T> out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] - lse;
  return out;
}

// ---------------------------------------------------------------------------
// Linear algebra kernels. Matrices are row-major (rows x cols); y = W x means
// W is (out x in).
// ---------------------------------------------------------------------------

template <typename A, typename B>
std::remove_const_t<A> dot(std::span<A> a, std::span<B> b) {
  using T = std::remove_const_t<A>;
  if (a.size() != b.size()) throw ShapeError("dot length mismatch");
  // Four fixed accumulators: faster, and the summation order stays fixed.
  T s0 = 0, s1 = 0, s2 = 0, s3 = 0;
  std::size_t i = 0;
  const std::size_t n = a.size();
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

/// y += W x
template <typename T, typename A>
void gemv_acc(const Tensor<T>& w, std::span<A> x, std::span<T> y) {
  if (w.cols() != x.size() || w.rows() != y.size()) {
    throw ShapeError("gemv: matrix " + shape_string(w.shape()) + " with x(" +
                     std::to_string(x.size()) + ") into y(" + std::to_string(y.size()) + ")");
  }
  for (std::size_t r = 0; r < y.size(); ++r) y[r] += dot(w.row(r), x);
}

/// x_grad += W^T dy
template <typename T, typename A>
void gemv_t_acc(const Tensor<T>& w, std::span<A> dy, std::span<T> dx) {
  if (w.rows() != dy.size() || w.cols() != dx.size()) throw ShapeError("gemv_t shape mismatch");
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const T g = dy[r];
    if (g == T(0)) continue;
    const T* wr = w.row(r).data();
    for (std::size_t c = 0; c < dx.size(); ++c) dx[c] += g * wr[c];
  }
}

/// dW += dy x^T
template <typename T, typename A, typename B>
void ger_acc(Tensor<T>& dw, std::span<A> dy, std::span<B> x) {
  if (dw.rows() != dy.size() || dw.cols() != x.size()) throw ShapeError("ger shape mismatch");
  for (std::size_t r = 0; r < dy.size(); ++r) {
    const T g = dy[r];
    if (g == T(0)) continue;
    T* wr = dw.row(r).data();
    for (std::size_t c = 0; c < x.size(); ++c) wr[c] += g * x[c];
  }
}

template <typename T, typename A>
void axpy(std::type_identity_t<T> a, std::span<A> x, std::span<T> y) {
  if (x.size() != y.size()) throw ShapeError("axpy length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

template <typename T, typename A>
void add_to(std::span<A> x, std::span<T> y) {
  if (x.size() != y.size()) throw ShapeError("add length mismatch");
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += x[i];
}

/// (a x b) . (b x c) -> (a x c)
template <typename T>
Tensor<T> matmul(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rank() != 2 || b.rank() != 2 || a.cols() != b.rows()) {
    throw ShapeError("matmul " + shape_string(a.shape()) + " . " + shape_string(b.shape()));
  }
  Tensor<T> out({a.rows(), b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto out_row = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      axpy(a(i, k), b.row(k), out_row);
    }
  }
  return out;
}

template <typename T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("add " + shape_string(a.shape()) + " + " + shape_string(b.shape()));
  }
  Tensor<T> out = a;
  add_to(b.data(), out.data());
  return out;
}

template <typename T>
Tensor<T> hadamard(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.shape() != b.shape()) {
    throw ShapeError("hadamard " + shape_string(a.shape()) + " * " + shape_string(b.shape()));
  }
  Tensor<T> out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out[i] *= b[i];
  return out;
}

// ---------------------------------------------------------------------------
// Initialization, dropout, clipping
// ---------------------------------------------------------------------------

template <typename T>
Tensor<T> uniform_init(const Shape& shape, Rng& rng, double half_width = 0.04) {
  if (!(half_width > 0)) throw Error("uniform_init half_width must be positive");
  Tensor<T> out(shape);
  for (auto& x : out.data()) x = static_cast<T>(rng.uniform(-half_width, half_width));
  return out;
}

/// Inverted dropout: kept entries are 1/(1-rate), so inference needs no rescale.
template <typename T>
Tensor<T> dropout_mask(const Shape& shape, double rate, Rng& rng, bool training) {
  if (!(rate >= 0) || rate >= 1) throw Error("dropout rate must lie in [0, 1)");
  Tensor<T> mask(shape, T(1));
  if (!training || rate == 0) return mask;
  const T keep = static_cast<T>(1.0 / (1.0 - rate));
  for (auto& x : mask.data()) x = rng.uniform() < rate ? T(0) : keep;
  return mask;
}

template <typename P>
double global_norm(const P& grads) {
  double sq = 0;
  grads.visit([&](std::string_view name, const auto& t) {
    for (auto v : t.data()) {
      if (!std::isfinite(v)) throw NonFiniteError("non-finite gradient in '" + std::string(name) + "'");
      sq += static_cast<double>(v) * static_cast<double>(v);
    }
  });
  return std::sqrt(sq);
}

/// Scales every gradient by one factor so the joint L2 norm is at most `max_norm`.
/// Returns the norm before clipping.
template <typename P>
double clip_global_norm(P& grads, double max_norm = 1.0) {
  if (!(max_norm > 0)) throw Error("clip threshold must be positive");
  const double norm = global_norm(grads);
  if (norm > max_norm) {
    const double scale = max_norm / norm;
    grads.visit([&](std::string_view, auto& t) {
      using V = typename std::decay_t<decltype(t)>::value_type;
      for (auto& v : t.data()) v = static_cast<V>(v * scale);
    });
  }
  return norm;
}

}  // namespace mce

#endif  // MCE_OPS_HPP_
