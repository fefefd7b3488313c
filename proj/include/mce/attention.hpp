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

#ifndef MCE_ATTENTION_HPP_
#define MCE_ATTENTION_HPP_

#include <limits>
#include <span>
#include <string>
#include <vector>

#include "mce/ops.hpp"
#include "mce/vocabulary.hpp"

namespace mce {

/// Additive scoring e_i = v . tanh(U_a q + W_a x_i + b_a). Used both for the
/// decoder's source attention and for memory addressing in the encoder.
template <typename T>
struct AttentionParams {
  Tensor<T> ua;  // (a x query)
  Tensor<T> wa;  // (a x key)
  Tensor<T> ba;  // (a)
  Tensor<T> va;  // (a)

  static AttentionParams init(std::size_t query, std::size_t key, std::size_t hidden, Rng& rng,
                              double range = 0.04) {
    AttentionParams p;
    p.ua = uniform_init<T>({hidden, query}, rng, range);
    p.wa = uniform_init<T>({hidden, key}, rng, range);
    p.ba = uniform_init<T>({hidden}, rng, range);
    p.va = uniform_init<T>({hidden}, rng, range);
    return p;
  }

  std::size_t hidden_size() const { return va.size(); }

  template <typename F>
  void visit(F&& f, const std::string& prefix = "") {
    f(prefix + "U_a", ua);
    f(prefix + "W_a", wa);
    f(prefix + "b_a", ba);
    f(prefix + "v_a", va);
  }
  template <typename F>
  void visit(F&& f, const std::string& prefix = "") const {
    f(prefix + "U_a", ua);
    f(prefix + "W_a", wa);
    f(prefix + "b_a", ba);
    f(prefix + "v_a", va);
  }
};

/// K_i = W_a x_i + b_a for every row of `items` (n x key).
template <typename T>
Tensor<T> attention_keys(const AttentionParams<T>& p, const Tensor<T>& items) {
  Tensor<T> keys({items.rows(), p.hidden_size()});
  for (std::size_t i = 0; i < items.rows(); ++i) {
    auto k = keys.row(i);
    add_to(p.ba.data(), k);
    gemv_acc(p.wa, items.row(i), k);
  }
  return keys;
}

/// dW_a, db_a and d(items) from the gradient of the keys.
template <typename T>
void attention_keys_backward(const AttentionParams<T>& p, const Tensor<T>& items,
                             const Tensor<T>& dkeys, AttentionParams<T>& g, Tensor<T>& ditems) {
  for (std::size_t i = 0; i < items.rows(); ++i) {
    ger_acc(g.wa, dkeys.row(i), items.row(i));
    add_to(dkeys.row(i), g.ba.data());
    gemv_t_acc(p.wa, dkeys.row(i), ditems.row(i));
  }
}

template <typename T>
struct ScoreCache {
  std::vector<T> query;
  Tensor<T> activations;  // tanh(U_a q + K_i), (n x a)
  std::vector<TokenId> mask;
  std::vector<T> weights;
};

/// Normalized weights over the n keys. Positions with mask == 0 get a score
/// of -inf and therefore exactly zero weight. An empty mask means all valid.
template <typename T>
ScoreCache<T> attention_weights(const AttentionParams<T>& p, std::span<const T> query,
                                const Tensor<T>& keys, std::span<const TokenId> mask = {}) {
  const std::size_t n = keys.rows();
  const std::size_t a = p.hidden_size();
  if (n == 0) throw Error("attention over an empty sequence");
  if (!mask.empty() && mask.size() != n) throw ShapeError("attention mask length mismatch");
  ScoreCache<T> c;
  c.query.assign(query.begin(), query.end());
  c.mask.assign(mask.begin(), mask.end());
  std::vector<T> projected(a, T(0));
  gemv_acc(p.ua, query, std::span<T>(projected));
  c.activations = Tensor<T>({n, a});
  std::vector<T> scores(n);
  bool any = false;
  for (std::size_t i = 0; i < n; ++i) {
    auto act = c.activations.row(i);
    const auto k = keys.row(i);
    for (std::size_t j = 0; j < a; ++j) act[j] = tanh_checked(projected[j] + k[j]);
    if (!mask.empty() && mask[i] == 0) {
      scores[i] = -std::numeric_limits<T>::infinity();
    } else {
      scores[i] = dot(p.va.data(), std::span<const T>(act));
      any = true;
    }
  }
  if (!any) throw Error("attention over a fully masked sequence");
  c.weights = softmax(std::span<const T>(scores));
  return c;
}

/// Backward from dL/d(weights): accumulates dU_a, dv_a, d(query) and d(keys).
template <typename T>
void attention_weights_backward(const AttentionParams<T>& p, const ScoreCache<T>& c,
                                std::span<const T> dweights, AttentionParams<T>& g,
                                std::span<T> dquery, Tensor<T>& dkeys) {
  const std::size_t n = c.weights.size();
  const std::size_t a = p.hidden_size();
  T inner = 0;
  for (std::size_t i = 0; i < n; ++i) inner += c.weights[i] * dweights[i];
  std::vector<T> dprojected(a, T(0));
  std::vector<T> dpre(a);
  for (std::size_t i = 0; i < n; ++i) {
    const T dscore = c.weights[i] * (dweights[i] - inner);
    if (dscore == T(0)) continue;
    const auto act = c.activations.row(i);
    axpy(dscore, act, g.va.data());
    auto dk = dkeys.row(i);
    for (std::size_t j = 0; j < a; ++j) {
      dpre[j] = dscore * p.va[j] * (T(1) - act[j] * act[j]);
      dk[j] += dpre[j];
      dprojected[j] += dpre[j];
    }
  }
  ger_acc(g.ua, std::span<const T>(dprojected), std::span<const T>(c.query));
  gemv_t_acc(p.ua, std::span<const T>(dprojected), dquery);
}

/// Weighted sum of rows: c = sum_i w_i X_i.
template <typename T>
std::vector<T> weighted_sum(std::span<const T> weights, const Tensor<T>& items) {
  std::vector<T> out(items.cols(), T(0));
  for (std::size_t i = 0; i < items.rows(); ++i) {
    if (weights[i] != T(0)) axpy(weights[i], items.row(i), std::span<T>(out));
  }
  return out;
}

}  // namespace mce

#endif  // MCE_ATTENTION_HPP_
