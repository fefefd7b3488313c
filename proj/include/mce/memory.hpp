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

#ifndef MCE_MEMORY_HPP_
#define MCE_MEMORY_HPP_

#include <span>
#include <string>
#include <vector>

#include "mce/attention.hpp"

namespace mce {

/// How the read context re-applies the cell weights.
///  kLiteral: c = sum_i w_i * Mread_i (weights applied twice, as the read
///            memory already carries w_i).
///  kSingle:  c = sum_i Mread_i.
enum class ReadWeighting { kLiteral, kSingle };

inline const char* to_string(ReadWeighting m) {
  return m == ReadWeighting::kLiteral ? "literal" : "single";
}

/// Read/write external memory for one encoder direction. Cells are m wide
/// and the controller state is d wide.
template <typename T>
struct MemoryParams {
  AttentionParams<T> addressing;  // query d, key m
  Tensor<T> w_read, b_read;       // read gate (m x d), (m)
  Tensor<T> w_update, b_update;   // update gate (m x d), (m)

  static MemoryParams init(std::size_t state, std::size_t cell, std::size_t attn_hidden, Rng& rng,
                           double range = 0.04) {
    MemoryParams p;
    p.addressing = AttentionParams<T>::init(state, cell, attn_hidden, rng, range);
    p.w_read = uniform_init<T>({cell, state}, rng, range);
    p.b_read = uniform_init<T>({cell}, rng, range);
    p.w_update = uniform_init<T>({cell, state}, rng, range);
    p.b_update = uniform_init<T>({cell}, rng, range);
    return p;
  }

  std::size_t cell_size() const { return w_read.rows(); }
  std::size_t state_size() const { return w_read.cols(); }

  template <typename F>
  void visit(F&& f, const std::string& prefix = "") {
    addressing.visit(f, prefix + "addr.");
    f(prefix + "W_read", w_read);
    f(prefix + "b_read", b_read);
    f(prefix + "W_u", w_update);
    f(prefix + "b_u", b_update);
  }
  template <typename F>
  void visit(F&& f, const std::string& prefix = "") const {
    addressing.visit(f, prefix + "addr.");
    f(prefix + "W_read", w_read);
    f(prefix + "b_read", b_read);
    f(prefix + "W_u", w_update);
    f(prefix + "b_u", b_update);
  }
};

template <typename T>
struct MemoryReadCache {
  Tensor<T> memory_prev;  // M_{t-1}
  Tensor<T> keys;
  ScoreCache<T> address;  // address.weights is w
  std::vector<T> state_prev;
  std::vector<T> read_gate;  // R_t
  Tensor<T> read_memory;     // Mread = (w outer R) * M_{t-1}
  std::vector<T> context;    // c_t
  ReadWeighting mode = ReadWeighting::kLiteral;

  const std::vector<T>& weights() const { return address.weights; }
};

/// w = softmax_i(v . tanh(U_a s + W_a M_i + b_a)), R = sig(W_read s + b_read),
/// Mread_i = w_i (M_i * R), c = sum_i k_i Mread_i with k_i = w_i (literal) or 1.
template <typename T>
MemoryReadCache<T> memory_read(const MemoryParams<T>& p, const Tensor<T>& memory,
                               std::span<const T> state_prev,
                               ReadWeighting mode = ReadWeighting::kLiteral) {
  if (memory.rank() != 2 || memory.rows() == 0) throw Error("memory_read: empty memory");
  if (memory.cols() != p.cell_size() || state_prev.size() != p.state_size()) {
    throw ShapeError("memory_read: memory " + shape_string(memory.shape()) + ", state " +
                     std::to_string(state_prev.size()));
  }
  const std::size_t n = memory.rows();
  const std::size_t m = memory.cols();
  MemoryReadCache<T> c;
  c.mode = mode;
  c.memory_prev = memory;
  c.state_prev.assign(state_prev.begin(), state_prev.end());
  c.keys = attention_keys(p.addressing, memory);
  c.address = attention_weights(p.addressing, state_prev, c.keys);

  c.read_gate.assign(p.b_read.data().begin(), p.b_read.data().end());
  gemv_acc(p.w_read, state_prev, std::span<T>(c.read_gate));
  sigmoid_inplace(std::span<T>(c.read_gate));

  const auto& w = c.address.weights;
  c.read_memory = Tensor<T>({n, m});
  c.context.assign(m, T(0));
  for (std::size_t i = 0; i < n; ++i) {
    auto out = c.read_memory.row(i);
    const auto in = memory.row(i);
    for (std::size_t j = 0; j < m; ++j) out[j] = w[i] * in[j] * c.read_gate[j];
    const T k = mode == ReadWeighting::kLiteral ? w[i] : T(1);
    axpy(k, std::span<const T>(out), std::span<T>(c.context));
  }
  return c;
}

template <typename T>
struct MemoryWriteCache {
  std::vector<T> state;
  std::vector<T> update_gate;  // U_t
  Tensor<T> memory;            // M_t
};

/// U = sig(W_u s + b_u), M_t = Mread + w outer U.
template <typename T>
MemoryWriteCache<T> memory_write(const MemoryParams<T>& p, const Tensor<T>& read_memory,
                                 std::span<const T> state, std::span<const T> weights) {
  if (read_memory.cols() != p.cell_size() || state.size() != p.state_size() ||
      weights.size() != read_memory.rows()) {
    throw ShapeError("memory_write: shape mismatch");
  }
  MemoryWriteCache<T> c;
  c.state.assign(state.begin(), state.end());
  c.update_gate.assign(p.b_update.data().begin(), p.b_update.data().end());
  gemv_acc(p.w_update, state, std::span<T>(c.update_gate));
  sigmoid_inplace(std::span<T>(c.update_gate));
  c.memory = read_memory;
  for (std::size_t i = 0; i < read_memory.rows(); ++i) {
    axpy(weights[i], std::span<const T>(c.update_gate), c.memory.row(i));
  }
  return c;
}

/// Given dL/dM_t: accumulates into d(read memory), d(state) and d(weights).
template <typename T>
void memory_write_backward(const MemoryParams<T>& p, const MemoryWriteCache<T>& c,
                           std::span<const T> weights, const Tensor<T>& dmemory,
                           MemoryParams<T>& g, Tensor<T>& dread_memory, std::span<T> dstate,
                           std::span<T> dweights) {
  const std::size_t m = p.cell_size();
  std::vector<T> dupdate(m, T(0));
  for (std::size_t i = 0; i < dmemory.rows(); ++i) {
    const auto dm = dmemory.row(i);
    add_to(dm, dread_memory.row(i));
    dweights[i] += dot(dm, std::span<const T>(c.update_gate));
    axpy(weights[i], dm, std::span<T>(dupdate));
  }
  for (std::size_t j = 0; j < m; ++j) dupdate[j] *= c.update_gate[j] * (T(1) - c.update_gate[j]);
  ger_acc(g.w_update, std::span<const T>(dupdate), std::span<const T>(c.state));
  add_to(std::span<const T>(dupdate), g.b_update.data());
  gemv_t_acc(p.w_update, std::span<const T>(dupdate), dstate);
}

/// Given dL/d(read memory), dL/dc and any extra dL/dw (e.g. from the write
/// sharing the same weights): accumulates into dM_{t-1} and d(state_prev).
template <typename T>
void memory_read_backward(const MemoryParams<T>& p, const MemoryReadCache<T>& c,
                          const Tensor<T>& dread_memory, std::span<const T> dcontext,
                          std::span<const T> dweights_extra, MemoryParams<T>& g,
                          Tensor<T>& dmemory_prev, std::span<T> dstate_prev) {
  const std::size_t n = c.memory_prev.rows();
  const std::size_t m = c.memory_prev.cols();
  const auto& w = c.weights();
  std::vector<T> dweights(dweights_extra.begin(), dweights_extra.end());
  std::vector<T> dgate(m, T(0));
  std::vector<T> dread(m);
  for (std::size_t i = 0; i < n; ++i) {
    const auto mread = c.read_memory.row(i);
    const auto mprev = c.memory_prev.row(i);
    const auto dmr = dread_memory.row(i);
    const T k = c.mode == ReadWeighting::kLiteral ? w[i] : T(1);
    for (std::size_t j = 0; j < m; ++j) dread[j] = dmr[j] + k * dcontext[j];
    if (c.mode == ReadWeighting::kLiteral) dweights[i] += dot(dcontext, mread);
    auto dprev = dmemory_prev.row(i);
    T dw = 0;
    for (std::size_t j = 0; j < m; ++j) {
      const T gated = mprev[j] * c.read_gate[j];
      dw += dread[j] * gated;
      dprev[j] += w[i] * dread[j] * c.read_gate[j];
      dgate[j] += w[i] * dread[j] * mprev[j];
    }
    dweights[i] += dw;
  }
  for (std::size_t j = 0; j < m; ++j) dgate[j] *= c.read_gate[j] * (T(1) - c.read_gate[j]);
  ger_acc(g.w_read, std::span<const T>(dgate), std::span<const T>(c.state_prev));
  add_to(std::span<const T>(dgate), g.b_read.data());
  gemv_t_acc(p.w_read, std::span<const T>(dgate), dstate_prev);

  Tensor<T> dkeys = Tensor<T>::zeros_like(c.keys);
  attention_weights_backward(p.addressing, c.address, std::span<const T>(dweights), g.addressing,
                             dstate_prev, dkeys);
  attention_keys_backward(p.addressing, c.memory_prev, dkeys, g.addressing, dmemory_prev);
}

}  // namespace mce

#endif  // MCE_MEMORY_HPP_
