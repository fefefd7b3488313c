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

#ifndef MCE_DECODER_HPP_
#define MCE_DECODER_HPP_

#include <string>
#include <vector>

#include "mce/attention.hpp"
#include "mce/encoder.hpp"
#include "mce/gru.hpp"

namespace mce {

enum class InitState { kMeanAnnotation, kZero };

template <typename T>
struct DecoderParams {
  Tensor<T> embedding;       // (|V_tgt| x e)
  Tensor<T> embedding_bias;  // (e), mirrors the encoder's emb_bias flag
  GruParams<T> gru;          // input e + D, state d
  AttentionParams<T> attention;  // query d, key D
  Tensor<T> w_state, w_prev, w_context, b_readout;  // readout (r x d), (r x e), (r x D), (r)
  Tensor<T> w_out, b_out;                           // (|V| x r), (|V|)
  Tensor<T> w_init;                                 // (d x D)

  static DecoderParams init(const ChannelConfig& cfg, std::size_t vocab, Rng& rng,
                            double range = 0.04) {
    DecoderParams p;
    const std::size_t e = cfg.emb_dim, d = cfg.hidden_dim, width = cfg.annotation_dim();
    const std::size_t r = d;
    p.embedding = uniform_init<T>({vocab, e}, rng, range);
    if (cfg.emb_bias) p.embedding_bias = uniform_init<T>({e}, rng, range);
    p.gru = GruParams<T>::init(e + width, d, rng, range);
    p.attention = AttentionParams<T>::init(d, width, d, rng, range);
    p.w_state = uniform_init<T>({r, d}, rng, range);
    p.w_prev = uniform_init<T>({r, e}, rng, range);
    p.w_context = uniform_init<T>({r, width}, rng, range);
    p.b_readout = uniform_init<T>({r}, rng, range);
    p.w_out = uniform_init<T>({vocab, r}, rng, range);
    p.b_out = uniform_init<T>({vocab}, rng, range);
    p.w_init = uniform_init<T>({d, width}, rng, range);
    return p;
  }

  std::size_t vocab_size() const { return w_out.rows(); }
  std::size_t state_size() const { return gru.hidden_size(); }

  template <typename F>
  void visit(F&& f) {
    visit_impl(*this, f);
  }
  template <typename F>
  void visit(F&& f) const {
    visit_impl(*this, f);
  }

 private:
  template <typename Self, typename F>
  static void visit_impl(Self& s, F& f) {
    f(std::string("dec.embedding"), s.embedding);
    if (!s.embedding_bias.empty()) f(std::string("dec.embedding_bias"), s.embedding_bias);
    s.gru.visit(f, "dec.gru.");
    s.attention.visit(f, "dec.attn.");
    f(std::string("dec.W_t1"), s.w_state);
    f(std::string("dec.W_t2"), s.w_prev);
    f(std::string("dec.W_t3"), s.w_context);
    f(std::string("dec.b_t"), s.b_readout);
    f(std::string("dec.W_o"), s.w_out);
    f(std::string("dec.b_o"), s.b_out);
    f(std::string("dec.W_init"), s.w_init);
  }
};

template <typename T>
struct AttendResult {
  ScoreCache<T> scores;
  std::vector<T> context;
  const std::vector<T>& weights() const { return scores.weights; }
};

/// alpha = softmax over unmasked i of v . tanh(U_a s + W_a A_i + b_a),
/// c = sum_i alpha_i A_i. `keys` come from attention_keys(p, annotation).
template <typename T>
AttendResult<T> attend(const AttentionParams<T>& p, std::span<const T> query,
                       const Tensor<T>& annotation, const Tensor<T>& keys,
                       std::span<const TokenId> mask = {}) {
  AttendResult<T> r;
  r.scores = attention_weights(p, query, keys, mask);
  r.context = weighted_sum(std::span<const T>(r.scores.weights), annotation);
  return r;
}

template <typename T>
void attend_backward(const AttentionParams<T>& p, const AttendResult<T>& r,
                     const Tensor<T>& annotation, std::span<const T> dcontext,
                     AttentionParams<T>& g, std::span<T> dquery, Tensor<T>& dannotation,
                     Tensor<T>& dkeys) {
  const std::size_t n = annotation.rows();
  std::vector<T> dweights(n);
  for (std::size_t i = 0; i < n; ++i) {
    dweights[i] = dot(dcontext, annotation.row(i));
    if (r.weights()[i] != T(0)) axpy(r.weights()[i], dcontext, dannotation.row(i));
  }
  attention_weights_backward(p, r.scores, std::span<const T>(dweights), g, dquery, dkeys);
}

/// Per-sentence decoder inputs that do not change across steps.
template <typename T>
struct DecoderContext {
  const Tensor<T>* annotation = nullptr;
  std::vector<TokenId> mask;
  Tensor<T> keys;
  std::vector<T> pooled;   // mean of unmasked annotation rows
  std::vector<T> initial;  // s_0
};

/// s_0 = tanh(W_init . mean(A)) or zero; keys precomputed once.
template <typename T>
DecoderContext<T> prepare_decoder(const DecoderParams<T>& p, const Tensor<T>& annotation,
                                  std::span<const TokenId> mask, InitState init) {
  DecoderContext<T> ctx;
  ctx.annotation = &annotation;
  const std::size_t n = annotation.rows();
  ctx.mask.assign(mask.begin(), mask.end());
  if (ctx.mask.empty()) ctx.mask.assign(n, 1);
  ctx.keys = attention_keys(p.attention, annotation);
  ctx.initial.assign(p.state_size(), T(0));
  if (init == InitState::kMeanAnnotation) {
    ctx.pooled.assign(annotation.cols(), T(0));
    std::size_t count = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (ctx.mask[i] == 0) continue;
      add_to(annotation.row(i), std::span<T>(ctx.pooled));
      ++count;
    }
    if (count == 0) throw Error("decoder: fully masked source");
    for (auto& v : ctx.pooled) v /= static_cast<T>(count);
    gemv_acc(p.w_init, std::span<const T>(ctx.pooled), std::span<T>(ctx.initial));
    tanh_inplace(std::span<T>(ctx.initial));
  }
  return ctx;
}

template <typename T>
struct DecoderStep {
  TokenId previous = kBosId;
  std::vector<T> state_prev;
  std::vector<T> embedded;
  AttendResult<T> attention;
  GruCache<T> gru;
  std::vector<T> readout;  // t_j before dropout
  std::vector<T> dropout;  // mask applied to t_j; empty when inactive
  std::vector<T> log_probs;

  const std::vector<T>& state() const { return gru.h; }
};

/// c_j = attend(s_{j-1}), s_j = GRU([e_{y_{j-1}} ; c_j], s_{j-1}),
/// t_j = tanh(W_t1 s_j + W_t2 e_{y_{j-1}} + W_t3 c_j + b_t), log p = log_softmax(W_o t_j + b_o).
template <typename T>
DecoderStep<T> decoder_step(const DecoderParams<T>& p, const DecoderContext<T>& ctx,
                            std::span<const T> state_prev, TokenId previous,
                            const Tensor<T>* dropout_mask = nullptr) {
  if (previous < 0 || static_cast<std::size_t>(previous) >= p.vocab_size()) {
    throw Error("decoder_step: previous token id " + std::to_string(previous) + " out of range");
  }
  DecoderStep<T> s;
  s.previous = previous;
  s.state_prev.assign(state_prev.begin(), state_prev.end());
  const auto row = p.embedding.row(static_cast<std::size_t>(previous));
  s.embedded.assign(row.begin(), row.end());
  if (!p.embedding_bias.empty()) add_to(p.embedding_bias.data(), std::span<T>(s.embedded));

  s.attention = attend(p.attention, state_prev, *ctx.annotation, ctx.keys,
                       std::span<const TokenId>(ctx.mask));
  std::vector<T> input(s.embedded);
  input.insert(input.end(), s.attention.context.begin(), s.attention.context.end());
  s.gru = gru_forward(p.gru, std::span<const T>(input), state_prev);

  s.readout.assign(p.b_readout.data().begin(), p.b_readout.data().end());
  gemv_acc(p.w_state, std::span<const T>(s.gru.h), std::span<T>(s.readout));
  gemv_acc(p.w_prev, std::span<const T>(s.embedded), std::span<T>(s.readout));
  gemv_acc(p.w_context, std::span<const T>(s.attention.context), std::span<T>(s.readout));
  tanh_inplace(std::span<T>(s.readout));

  std::vector<T> dropped = s.readout;
  if (dropout_mask != nullptr) {
    if (dropout_mask->size() != dropped.size()) throw ShapeError("dropout mask width mismatch");
    s.dropout.assign(dropout_mask->data().begin(), dropout_mask->data().end());
    for (std::size_t i = 0; i < dropped.size(); ++i) dropped[i] *= s.dropout[i];
  }
  std::vector<T> logits(p.b_out.data().begin(), p.b_out.data().end());
  gemv_acc(p.w_out, std::span<const T>(dropped), std::span<T>(logits));
  s.log_probs = log_softmax(std::span<const T>(logits));
  return s;
}

/// Backward of one step given dL/dlogits and dL/ds_j from later steps.
/// Accumulates dL/ds_{j-1} into `dstate_prev`.
template <typename T>
void decoder_step_backward(const DecoderParams<T>& p, const DecoderContext<T>& ctx,
                           const DecoderStep<T>& s, std::span<const T> dlogits,
                           std::span<const T> dstate, DecoderParams<T>& g,
                           std::span<T> dstate_prev, Tensor<T>& dannotation, Tensor<T>& dkeys) {
  const std::size_t r = s.readout.size();
  std::vector<T> dropped = s.readout;
  if (!s.dropout.empty()) {
    for (std::size_t i = 0; i < r; ++i) dropped[i] *= s.dropout[i];
  }
  ger_acc(g.w_out, dlogits, std::span<const T>(dropped));
  add_to(dlogits, g.b_out.data());
  std::vector<T> dreadout(r, T(0));
  gemv_t_acc(p.w_out, dlogits, std::span<T>(dreadout));
  for (std::size_t i = 0; i < r; ++i) {
    if (!s.dropout.empty()) dreadout[i] *= s.dropout[i];
    dreadout[i] *= T(1) - s.readout[i] * s.readout[i];
  }
  const std::span<const T> dpre(dreadout);

  std::vector<T> dh(dstate.begin(), dstate.end());
  std::vector<T> dembedded(s.embedded.size(), T(0));
  std::vector<T> dcontext(s.attention.context.size(), T(0));
  ger_acc(g.w_state, dpre, std::span<const T>(s.gru.h));
  ger_acc(g.w_prev, dpre, std::span<const T>(s.embedded));
  ger_acc(g.w_context, dpre, std::span<const T>(s.attention.context));
  add_to(dpre, g.b_readout.data());
  gemv_t_acc(p.w_state, dpre, std::span<T>(dh));
  gemv_t_acc(p.w_prev, dpre, std::span<T>(dembedded));
  gemv_t_acc(p.w_context, dpre, std::span<T>(dcontext));

  std::vector<T> dinput(s.gru.x.size(), T(0));
  gru_backward(p.gru, s.gru, std::span<const T>(dh), g.gru, std::span<T>(dinput), dstate_prev);
  const std::size_t e = s.embedded.size();
  for (std::size_t i = 0; i < e; ++i) dembedded[i] += dinput[i];
  for (std::size_t i = 0; i < dcontext.size(); ++i) dcontext[i] += dinput[e + i];

  attend_backward(p.attention, s.attention, *ctx.annotation, std::span<const T>(dcontext),
                  g.attention, dstate_prev, dannotation, dkeys);

  add_to(std::span<const T>(dembedded), g.embedding.row(static_cast<std::size_t>(s.previous)));
  if (!g.embedding_bias.empty()) add_to(std::span<const T>(dembedded), g.embedding_bias.data());
}

/// Backward of prepare_decoder: keys and s_0 into dA.
template <typename T>
void prepare_decoder_backward(const DecoderParams<T>& p, const DecoderContext<T>& ctx,
                              std::span<const T> dinitial, const Tensor<T>& dkeys,
                              InitState init, DecoderParams<T>& g, Tensor<T>& dannotation) {
  attention_keys_backward(p.attention, *ctx.annotation, dkeys, g.attention, dannotation);
  if (init != InitState::kMeanAnnotation) return;
  std::vector<T> dpre(dinitial.begin(), dinitial.end());
  for (std::size_t i = 0; i < dpre.size(); ++i) dpre[i] *= T(1) - ctx.initial[i] * ctx.initial[i];
  ger_acc(g.w_init, std::span<const T>(dpre), std::span<const T>(ctx.pooled));
  std::vector<T> dpooled(ctx.pooled.size(), T(0));
  gemv_t_acc(p.w_init, std::span<const T>(dpre), std::span<T>(dpooled));
  std::size_t count = 0;
  for (auto m : ctx.mask) count += m != 0;
  const T scale = T(1) / static_cast<T>(count);
  for (std::size_t i = 0; i < dannotation.rows(); ++i) {
    if (ctx.mask[i] == 0) continue;
    axpy(scale, std::span<const T>(dpooled), dannotation.row(i));
  }
}

}  // namespace mce

#endif  // MCE_DECODER_HPP_
