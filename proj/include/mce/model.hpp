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

#ifndef MCE_MODEL_HPP_
#define MCE_MODEL_HPP_

#include <cmath>
#include <memory>
#include <string>
#include <vector>

#include "mce/corpus.hpp"
#include "mce/decoder.hpp"
#include "mce/encoder.hpp"

namespace mce {

struct ModelConfig {
  ChannelConfig channels;
  std::size_t src_vocab = 0;
  std::size_t tgt_vocab = 0;
  InitState init_state = InitState::kMeanAnnotation;
  double dropout = 0.5;
  double init_range = 0.04;

  void validate() const {
    channels.validate();
    if (src_vocab < kNumReserved || tgt_vocab < kNumReserved) {
      throw Error("vocabulary sizes must cover the reserved tokens");
    }
    if (!(dropout >= 0) || dropout >= 1) throw Error("dropout must lie in [0, 1)");
  }
};

template <typename T>
struct ModelParams {
  EncoderParams<T> encoder;
  DecoderParams<T> decoder;

  template <typename F>
  void visit(F&& f) {
    encoder.visit(f);
    decoder.visit(f);
  }
  template <typename F>
  void visit(F&& f) const {
    encoder.visit(f);
    decoder.visit(f);
  }
};

struct LossStats {
  double loss = 0;       // sum over sentences of -log p(y), divided by sentence count
  double nll_sum = 0;    // total -log p over target tokens
  std::size_t sentences = 0;
  std::size_t tokens = 0;
  std::size_t correct = 0;  // argmax == gold under teacher forcing

  double token_nll() const { return tokens ? nll_sum / static_cast<double>(tokens) : 0.0; }
  double token_accuracy() const {
    return tokens ? static_cast<double>(correct) / static_cast<double>(tokens) : 0.0;
  }
};

template <typename T>
class Model {
 public:
  using Params = ModelParams<T>;

  Model(ModelConfig config, std::uint64_t seed) : config_(std::move(config)) {
    config_.validate();
    Rng rng(seed);
    params_.encoder = EncoderParams<T>::init(config_.channels, config_.src_vocab, rng, config_.init_range);
    params_.decoder = DecoderParams<T>::init(config_.channels, config_.tgt_vocab, rng, config_.init_range);
  }

  Model(ModelConfig config, Params params) : config_(std::move(config)), params_(std::move(params)) {
    config_.validate();
  }

  const ModelConfig& config() const { return config_; }
  const Params& params() const { return params_; }
  Params& params() { return params_; }

  /// Non-movable: the decoder context points into the encoding it owns.
  class Session {
   public:
    Session(const Model& model, const std::vector<TokenId>& source)
        : model_(model), trace_(encode(model.config().channels, model.params().encoder, source)) {
      context_ = prepare_decoder(model.params().decoder, trace_.encoding.annotation,
                                 std::span<const TokenId>(trace_.encoding.mask),
                                 model.config().init_state);
    }
    Session(const Session&) = delete;
    Session& operator=(const Session&) = delete;

    const std::vector<T>& initial_state() const { return context_.initial; }

    DecoderStep<T> step(std::span<const T> state, TokenId previous,
                        const Tensor<T>* dropout = nullptr) const {
      return decoder_step(model_.params().decoder, context_, state, previous, dropout);
    }

    const EncoderTrace<T>& trace() const { return trace_; }
    const DecoderContext<T>& context() const { return context_; }
    std::size_t source_length() const { return trace_.ids.size(); }

   private:
    const Model& model_;
    EncoderTrace<T> trace_;
    DecoderContext<T> context_;
  };

  std::unique_ptr<Session> start(const std::vector<TokenId>& source) const {
    return std::make_unique<Session>(*this, source);
  }

  /// Teacher-forced -log p(target | source); `target` ends with EOS. When
  /// `grads` is set, accumulates scale * gradient. Dropout is active iff
  /// `dropout_rng` is set and the rate is positive. `objective`, if set,
  /// receives the loss at full precision T.
  LossStats sentence_loss(const std::vector<TokenId>& source, const std::vector<TokenId>& target,
                          double scale, Params* grads, Rng* dropout_rng, T* objective = nullptr) const {
    if (target.empty()) throw Error("sentence_loss: empty target");
    Session session(*this, source);
    const auto& dec = params_.decoder;
    const bool drop = dropout_rng != nullptr && config_.dropout > 0;
    std::vector<DecoderStep<T>> steps;
    steps.reserve(target.size());
    LossStats stats;
    stats.sentences = 1;
    std::vector<T> state = session.initial_state();
    TokenId previous = kBosId;
    T nll = 0;
    for (TokenId gold : target) {
      if (gold < 0 || static_cast<std::size_t>(gold) >= dec.vocab_size()) {
        throw Error("sentence_loss: target id out of range");
      }
      Tensor<T> mask;
      if (drop) mask = dropout_mask<T>({dec.w_state.rows()}, config_.dropout, *dropout_rng, true);
      steps.push_back(session.step(std::span<const T>(state), previous, drop ? &mask : nullptr));
      const auto& lp = steps.back().log_probs;
      nll -= lp[static_cast<std::size_t>(gold)];
      std::size_t best = 0;
      for (std::size_t k = 1; k < lp.size(); ++k) {
        if (lp[k] > lp[best]) best = k;
      }
      stats.correct += best == static_cast<std::size_t>(gold);
      ++stats.tokens;
      state = steps.back().state();
      previous = gold;
    }
    stats.nll_sum = static_cast<double>(nll);
    stats.loss = stats.nll_sum;
    if (!std::isfinite(stats.loss)) throw NonFiniteError("non-finite sentence loss");
    if (objective) *objective = nll;
    if (grads == nullptr) return stats;

    const auto& ctx = session.context();
    const auto& annotation = session.trace().encoding.annotation;
    Tensor<T> dannotation = Tensor<T>::zeros_like(annotation);
    Tensor<T> dkeys = Tensor<T>::zeros_like(ctx.keys);
    std::vector<T> carry(dec.state_size(), T(0));
    std::vector<T> dlogits(dec.vocab_size());
    for (std::size_t j = target.size(); j-- > 0;) {
      const auto& step = steps[j];
      for (std::size_t k = 0; k < dlogits.size(); ++k) {
        dlogits[k] = static_cast<T>(scale) * std::exp(step.log_probs[k]);
      }
      dlogits[static_cast<std::size_t>(target[j])] -= static_cast<T>(scale);
      std::vector<T> dprev(dec.state_size(), T(0));
      decoder_step_backward(dec, ctx, step, std::span<const T>(dlogits), std::span<const T>(carry),
                            grads->decoder, std::span<T>(dprev), dannotation, dkeys);
      carry = std::move(dprev);
    }
    prepare_decoder_backward(dec, ctx, std::span<const T>(carry), dkeys, config_.init_state,
                             grads->decoder, dannotation);
    encode_backward(config_.channels, params_.encoder, session.trace(), dannotation, grads->encoder);
    return stats;
  }

  /// Batch loss: per-sentence sums averaged over the batch.
  LossStats batch_loss(const ParallelBatch& batch, Params* grads, Rng* dropout_rng) const {
    if (batch.size() == 0) throw Error("batch_loss: empty batch");
    LossStats total;
    const double scale = 1.0 / static_cast<double>(batch.size());
    for (std::size_t i = 0; i < batch.size(); ++i) {
      auto s = sentence_loss(batch.source(i), batch.target(i), scale, grads, dropout_rng);
      total.nll_sum += s.nll_sum;
      total.tokens += s.tokens;
      total.correct += s.correct;
      total.sentences += 1;
    }
    total.loss = total.nll_sum * scale;
    return total;
  }

 private:
  ModelConfig config_;
  Params params_;
};

}  // namespace mce

#endif  // MCE_MODEL_HPP_
