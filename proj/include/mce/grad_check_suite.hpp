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

#ifndef MCE_GRAD_CHECK_SUITE_HPP_
#define MCE_GRAD_CHECK_SUITE_HPP_

#include <string>
#include <utility>
#include <vector>

#include "mce/grad_check.hpp"
#include "mce/model.hpp"

namespace mce::gradcheck {

// Finite-difference checks for every parameterized operation at toy sizes
// (dims <= 6, sequence length <= 4). Analytic gradients are 64-bit; the
// difference quotients come from grad_check_extended. Parameters are drawn
// from [-1, 1] rather than the training init range.

inline constexpr double kRange = 1.0;
inline constexpr double kEpsilon = 1e-5;

template <typename S>
Tensor<S> random_tensor(const Shape& shape, Rng& rng) {
  return uniform_init<S>(shape, rng, kRange);
}

template <typename S>
S weighted(const Tensor<S>& probe, std::span<const S> values) {
  return dot(probe.data(), values);
}

// Visits a case's tensors through its non-const overload.
#define MCE_CONST_VISIT(Case)                                                           \
  template <typename F>                                                                  \
  void visit(F&& f) const {                                                              \
    const_cast<Case*>(this)->visit([&](auto name, auto& t) { f(name, std::as_const(t)); }); \
  }

/// A GRU step with its inputs as checkable tensors.
template <typename S>
struct GruCase {
  GruParams<S> gru;
  Tensor<S> x, h;
  Tensor<S> probe;  // not checked

  template <typename F>
  void visit(F&& f) {
    gru.visit(f, "gru.");
    f(std::string("x"), x);
    f(std::string("h_prev"), h);
  }
  MCE_CONST_VISIT(GruCase)
};

inline GradCheckResult check_gru_step(std::uint64_t seed, std::size_t input = 5, std::size_t hidden = 5) {
  auto make = [=]<typename S>() {
    Rng rng(seed);
    GruCase<S> c;
    c.gru = GruParams<S>::init(input, hidden, rng, kRange);
    c.x = random_tensor<S>({input}, rng);
    c.h = random_tensor<S>({hidden}, rng);
    c.probe = random_tensor<S>({hidden}, rng);
    return c;
  };
  auto fn = []<typename S>(const GruCase<S>& p, GruCase<S>* g) {
    auto cache = gru_forward(p.gru, p.x.data(), p.h.data());
    if (g) gru_backward(p.gru, cache, p.probe.data(), g->gru, g->x.data(), g->h.data());
    return weighted(p.probe, std::span<const S>(cache.h));
  };
  return grad_check_extended(make, fn, kEpsilon);
}

/// memory_read followed by memory_write sharing the addressing weights.
template <typename S>
struct MemoryCase {
  MemoryParams<S> memory;
  Tensor<S> cells, state_prev, state;
  Tensor<S> probe_memory, probe_context;

  template <typename F>
  void visit(F&& f) {
    memory.visit(f, "mem.");
    f(std::string("M_prev"), cells);
    f(std::string("s_prev"), state_prev);
    f(std::string("s_t"), state);
  }
  MCE_CONST_VISIT(MemoryCase)
};

inline GradCheckResult check_memory(std::uint64_t seed, ReadWeighting mode, std::size_t cells = 4,
                                    std::size_t width = 5) {
  auto make = [=]<typename S>() {
    Rng rng(seed);
    MemoryCase<S> c;
    c.memory = MemoryParams<S>::init(width, width, width, rng, kRange);
    c.cells = random_tensor<S>({cells, width}, rng);
    c.state_prev = random_tensor<S>({width}, rng);
    c.state = random_tensor<S>({width}, rng);
    c.probe_memory = random_tensor<S>({cells, width}, rng);
    c.probe_context = random_tensor<S>({width}, rng);
    return c;
  };
  auto fn = [=]<typename S>(const MemoryCase<S>& p, MemoryCase<S>* g) {
    auto read = memory_read(p.memory, p.cells, p.state_prev.data(), mode);
    auto write = memory_write(p.memory, read.read_memory, p.state.data(), std::span<const S>(read.weights()));
    const S value = dot(p.probe_memory.data(), write.memory.data()) +
                    weighted(p.probe_context, std::span<const S>(read.context));
    if (g) {
      Tensor<S> dread = Tensor<S>::zeros_like(read.read_memory);
      std::vector<S> dweights(cells, S(0));
      memory_write_backward(p.memory, write, std::span<const S>(read.weights()), p.probe_memory,
                            g->memory, dread, g->state.data(), std::span<S>(dweights));
      memory_read_backward(p.memory, read, dread, p.probe_context.data(), std::span<const S>(dweights),
                           g->memory, g->cells, g->state_prev.data());
    }
    return value;
  };
  return grad_check_extended(make, fn, kEpsilon);
}

/// Gated channel combination with the channel matrices as checkable inputs.
template <typename S>
struct CombineCase {
  EncoderParams<S> encoder;
  Tensor<S> embeddings, hidden, memory;
  Tensor<S> probe;

  template <typename F>
  void visit(F&& f) {
    encoder.gate_ntm_rnn.visit(f, "g0.");
    encoder.gate_rnn_emb.visit(f, "g1.");
    encoder.gate_ntm_emb.visit(f, "g2.");
    encoder.gate_all.visit(f, "g3.");
    if (!embeddings.empty()) f(std::string("E'"), embeddings);
    if (!hidden.empty()) f(std::string("h"), hidden);
    if (!memory.empty()) f(std::string("M"), memory);
  }
  MCE_CONST_VISIT(CombineCase)
};

inline GradCheckResult check_combiner(std::uint64_t seed, const std::string& system,
                                      std::size_t n = 4, std::size_t dim = 3) {
  ChannelConfig cfg;
  cfg.set_system(system);
  cfg.emb_dim = cfg.hidden_dim = cfg.mem_dim = dim;
  const std::size_t width = cfg.annotation_dim();
  auto make = [=]<typename S>() {
    Rng rng(seed);
    CombineCase<S> c;
    c.encoder = EncoderParams<S>::init(cfg, 5, rng, kRange);
    if (cfg.use_emb) c.embeddings = random_tensor<S>({n, width}, rng);
    if (cfg.recurrent()) c.hidden = random_tensor<S>({n, width}, rng);
    if (cfg.use_ntm) c.memory = random_tensor<S>({n, width}, rng);
    c.probe = random_tensor<S>({n, width}, rng);
    return c;
  };
  auto fn = [=]<typename S>(const CombineCase<S>& p, CombineCase<S>* g) {
    SourceEncoding<S> enc;
    enc.embeddings = p.embeddings;
    enc.hidden = p.hidden;
    enc.memory = p.memory;
    CombineCache<S> cache;
    enc.annotation = combine_channels(cfg, p.encoder, &enc.embeddings, &enc.hidden, &enc.memory, &cache);
    if (g) {
      combine_channels_backward(cfg, p.encoder, enc, cache, p.probe, g->encoder, g->embeddings,
                                g->hidden, g->memory);
    }
    return dot(p.probe.data(), enc.annotation.data());
  };
  return grad_check_extended(make, fn, kEpsilon);
}

/// Additive attention with a masked position, query and annotation checkable.
template <typename S>
struct AttentionCase {
  AttentionParams<S> attention;
  Tensor<S> query, annotation;
  Tensor<S> probe;

  template <typename F>
  void visit(F&& f) {
    attention.visit(f, "attn.");
    f(std::string("s_prev"), query);
    f(std::string("A"), annotation);
  }
  MCE_CONST_VISIT(AttentionCase)
};

inline GradCheckResult check_attention(std::uint64_t seed, std::size_t n = 4, std::size_t query = 4,
                                       std::size_t width = 6) {
  std::vector<TokenId> mask(n, 1);
  mask.back() = 0;
  auto make = [=]<typename S>() {
    Rng rng(seed);
    AttentionCase<S> c;
    c.attention = AttentionParams<S>::init(query, width, query, rng, kRange);
    c.query = random_tensor<S>({query}, rng);
    c.annotation = random_tensor<S>({n, width}, rng);
    c.probe = random_tensor<S>({width}, rng);
    return c;
  };
  auto fn = [&]<typename S>(const AttentionCase<S>& p, AttentionCase<S>* g) {
    const auto keys = attention_keys(p.attention, p.annotation);
    auto r = attend(p.attention, p.query.data(), p.annotation, keys, std::span<const TokenId>(mask));
    if (g) {
      Tensor<S> dkeys = Tensor<S>::zeros_like(keys);
      attend_backward(p.attention, r, p.annotation, p.probe.data(), g->attention, g->query.data(),
                      g->annotation, dkeys);
      attention_keys_backward(p.attention, p.annotation, dkeys, g->attention, g->annotation);
    }
    return weighted(p.probe, std::span<const S>(r.context));
  };
  return grad_check_extended(make, fn, kEpsilon);
}

/// One decoder step (attention, GRU, readout, output, fixed dropout mask)
/// plus the s_0 initializer feeding it.
template <typename S>
struct DecoderCase {
  DecoderParams<S> decoder;
  Tensor<S> annotation;
  Tensor<S> drop, probe;

  template <typename F>
  void visit(F&& f) {
    decoder.visit(f);
    f(std::string("A"), annotation);
  }
  MCE_CONST_VISIT(DecoderCase)
};

inline GradCheckResult check_decoder_step(std::uint64_t seed, std::size_t n = 3, std::size_t dim = 4,
                                          std::size_t vocab = 7) {
  ChannelConfig cfg;
  cfg.emb_dim = cfg.hidden_dim = cfg.mem_dim = dim;
  auto make = [=]<typename S>() {
    Rng rng(seed);
    DecoderCase<S> c;
    c.decoder = DecoderParams<S>::init(cfg, vocab, rng, kRange);
    c.annotation = random_tensor<S>({n, cfg.annotation_dim()}, rng);
    c.drop = dropout_mask<S>({dim}, 0.5, rng, true);
    c.probe = random_tensor<S>({dim}, rng);
    return c;
  };
  const TokenId previous = 5, gold = 4;
  auto fn = [=]<typename S>(const DecoderCase<S>& p, DecoderCase<S>* g) {
    auto ctx = prepare_decoder(p.decoder, p.annotation, {}, InitState::kMeanAnnotation);
    auto step = decoder_step(p.decoder, ctx, std::span<const S>(ctx.initial), previous, &p.drop);
    const S value = step.log_probs[gold] + weighted(p.probe, std::span<const S>(step.state()));
    if (g) {
      std::vector<S> dlogits(vocab);
      for (std::size_t k = 0; k < vocab; ++k) dlogits[k] = -std::exp(step.log_probs[k]);
      dlogits[gold] += S(1);
      Tensor<S> dkeys = Tensor<S>::zeros_like(ctx.keys);
      std::vector<S> dinitial(dim, S(0));
      decoder_step_backward(p.decoder, ctx, step, std::span<const S>(dlogits), p.probe.data(), g->decoder,
                            std::span<S>(dinitial), g->annotation, dkeys);
      prepare_decoder_backward(p.decoder, ctx, std::span<const S>(dinitial), dkeys,
                               InitState::kMeanAnnotation, g->decoder, g->annotation);
    }
    return value;
  };
  return grad_check_extended(make, fn, kEpsilon);
}

#undef MCE_CONST_VISIT

inline ModelConfig toy_model_config(const std::string& system, std::size_t dim = 4,
                                    std::size_t vocab = 7) {
  ModelConfig cfg;
  cfg.channels.set_system(system);
  cfg.channels.emb_dim = cfg.channels.hidden_dim = cfg.channels.mem_dim = dim;
  cfg.src_vocab = cfg.tgt_vocab = vocab;
  return cfg;
}

/// Whole encoder: sum(probe * A) w.r.t. every encoder parameter.
inline GradCheckResult check_encoder(std::uint64_t seed, const ChannelConfig& channels,
                                     std::vector<TokenId> ids = {4, 6, 5, 4},
                                     std::size_t vocab = 7) {
  auto make = [=]<typename S>() {
    Rng rng(seed);
    return EncoderParams<S>::init(channels, vocab, rng, kRange);
  };
  Rng probe_rng = Rng::derive(seed, 1);
  const Tensor<double> probe = random_tensor<double>({ids.size(), channels.annotation_dim()}, probe_rng);
  const auto wide_probe = tensor_cast<long double>(probe);
  auto fn = [&]<typename S>(const EncoderParams<S>& p, EncoderParams<S>* g) {
    const Tensor<S>* pr = nullptr;
    if constexpr (std::is_same_v<S, double>) pr = &probe;
    else pr = &wide_probe;
    auto tr = encode(channels, p, ids);
    if (g) encode_backward(channels, p, tr, *pr, *g);
    return dot(pr->data(), tr.encoding.annotation.data());
  };
  return grad_check_extended(make, fn, kEpsilon);
}

/// Full teacher-forced loss on a two-sentence batch, dropout active.
inline GradCheckResult check_full_loss(std::uint64_t seed, const ModelConfig& cfg) {
  ModelConfig c = cfg;
  c.init_range = kRange;
  const Rng dropout_start = Rng::derive(seed, 1);
  const std::vector<std::vector<TokenId>> sources = {{4, 5, 6, 4}, {6, 5}};
  const std::vector<std::vector<TokenId>> targets = {{5, 4, kEosId}, {6, 6, 4, kEosId}};
  auto make = [&]<typename S>() { return Model<S>(c, seed).params(); };
  auto fn = [&]<typename S>(const ModelParams<S>& p, ModelParams<S>* g) {
    Model<S> m(c, p);
    Rng drop = dropout_start;
    S total = 0;
    for (std::size_t i = 0; i < sources.size(); ++i) {
      S loss = 0;
      m.sentence_loss(sources[i], targets[i], 0.5, g, &drop, &loss);
      total += loss * S(0.5);
    }
    return total;
  };
  return grad_check_extended(make, fn, kEpsilon);
}

using SuiteResult = std::vector<std::pair<std::string, GradCheckResult>>;

/// Every check the `grad-check` command and the acceptance suite report.
inline SuiteResult run_suite(std::uint64_t seed) {
  SuiteResult out;
  out.emplace_back("gru_step", check_gru_step(seed));
  out.emplace_back("memory_read_write[literal]", check_memory(seed + 1, ReadWeighting::kLiteral));
  out.emplace_back("memory_read_write[single]", check_memory(seed + 2, ReadWeighting::kSingle));
  for (const std::string system : {"NTM-RNN", "RNN-EMB", "NTM-EMB", "NTM-RNN-EMB"}) {
    out.emplace_back("combiner[" + system + "]", check_combiner(seed + 3, system));
  }
  out.emplace_back("attention", check_attention(seed + 4));
  out.emplace_back("decoder_step", check_decoder_step(seed + 5));
  for (const auto& system : ChannelConfig::all_systems()) {
    out.emplace_back("encoder[" + system + "]", check_encoder(seed + 6, toy_model_config(system).channels));
  }
  {
    auto cfg = toy_model_config("NTM-RNN-EMB");
    cfg.channels.stacked_bidir = true;
    cfg.channels.read_weighting = ReadWeighting::kSingle;
    out.emplace_back("encoder[NTM-RNN-EMB,stacked,single]", check_encoder(seed + 7, cfg.channels));
  }
  for (const auto& system : ChannelConfig::all_systems()) {
    out.emplace_back("loss[" + system + "]", check_full_loss(seed + 8, toy_model_config(system)));
  }
  return out;
}

}  // namespace mce::gradcheck

#endif  // MCE_GRAD_CHECK_SUITE_HPP_
