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

#ifndef MCE_ENCODER_HPP_
#define MCE_ENCODER_HPP_

#include <algorithm>
#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mce/combiner.hpp"
#include "mce/gru.hpp"
#include "mce/memory.hpp"
#include "mce/vocabulary.hpp"

namespace mce {

/// Which encoding channels feed the annotation, plus encoder dimensions.
struct ChannelConfig {
  bool use_emb = true;
  bool use_rnn = true;
  bool use_ntm = true;
  ReadWeighting read_weighting = ReadWeighting::kLiteral;
  bool stacked_bidir = false;
  bool emb_bias = true;
  std::size_t emb_dim = 512;
  std::size_t hidden_dim = 512;
  std::size_t mem_dim = 512;

  bool recurrent() const { return use_rnn || use_ntm; }

  /// Width D of every channel matrix and of the combined annotation.
  std::size_t annotation_dim() const { return recurrent() ? 2 * hidden_dim : 2 * emb_dim; }

  void validate() const {
    if (!use_emb && !use_rnn && !use_ntm) throw Error("channel config enables no channel");
    if (emb_dim == 0 || hidden_dim == 0 || mem_dim == 0) throw Error("dimensions must be positive");
    if (use_ntm && !(mem_dim == emb_dim && emb_dim == hidden_dim)) {
      throw Error("NTM channel requires mem_dim == emb_dim == hidden_dim (got m=" +
                  std::to_string(mem_dim) + ", e=" + std::to_string(emb_dim) +
                  ", d=" + std::to_string(hidden_dim) + ")");
    }
    if (use_emb && recurrent() && emb_dim != hidden_dim) {
      throw Error("embedding channel next to a recurrent channel requires emb_dim == hidden_dim");
    }
  }

  std::string system_name() const {
    std::string name;
    auto append = [&](const char* part) {
      if (!name.empty()) name += '-';
      name += part;
    };
    if (use_ntm) append("NTM");
    if (use_rnn) append("RNN");
    if (use_emb) append("EMB");
    return name;
  }

  /// Accepts the seven system names (RNN, NTM, EMB, NTM-RNN, RNN-EMB,
  /// NTM-EMB, NTM-RNN-EMB); dims and other flags are left untouched.
  void set_system(const std::string& name) {
    static const std::array<std::string, 7> known = {"RNN",     "NTM",     "EMB",        "NTM-RNN",
                                                     "RNN-EMB", "NTM-EMB", "NTM-RNN-EMB"};
    if (std::find(known.begin(), known.end(), name) == known.end()) {
      throw Error("unknown system '" + name + "'");
    }
    use_ntm = name.find("NTM") != std::string::npos;
    use_rnn = name.find("RNN") != std::string::npos;
    use_emb = name.find("EMB") != std::string::npos;
  }

  static std::vector<std::string> all_systems() {
    return {"RNN", "NTM", "EMB", "NTM-EMB", "NTM-RNN", "RNN-EMB", "NTM-RNN-EMB"};
  }
};

template <typename T>
struct DirectionParams {
  GruParams<T> gru;
  MemoryParams<T> memory;  // absent unless the NTM channel is on

  bool has_memory() const { return !memory.w_read.empty(); }

  template <typename F>
  void visit(F&& f, const std::string& prefix) {
    gru.visit(f, prefix + "gru.");
    if (has_memory()) memory.visit(f, prefix + "mem.");
  }
  template <typename F>
  void visit(F&& f, const std::string& prefix) const {
    gru.visit(f, prefix + "gru.");
    if (has_memory()) memory.visit(f, prefix + "mem.");
  }
};

/// Source embeddings, per-direction recurrence/memory and the four gates.
/// Tensors a configuration does not use stay absent.
template <typename T>
struct EncoderParams {
  Tensor<T> embedding;       // (|V_src| x e)
  Tensor<T> embedding_bias;  // (e), when emb_bias
  std::optional<DirectionParams<T>> forward, backward;
  GateParams<T> gate_ntm_rnn;      // g0: memory vs hidden
  GateParams<T> gate_rnn_emb;      // g1: embeddings vs hidden
  GateParams<T> gate_ntm_emb;      // g2: embeddings vs memory
  GateParams<T> gate_all;          // g3: embeddings vs g0 blend

  static EncoderParams init(const ChannelConfig& cfg, std::size_t vocab, Rng& rng,
                            double range = 0.04) {
    cfg.validate();
    EncoderParams p;
    const std::size_t e = cfg.emb_dim, d = cfg.hidden_dim, m = cfg.mem_dim;
    const std::size_t width = cfg.annotation_dim();
    p.embedding = uniform_init<T>({vocab, e}, rng, range);
    if (cfg.emb_bias) p.embedding_bias = uniform_init<T>({e}, rng, range);
    if (cfg.recurrent()) {
      for (int dir = 0; dir < 2; ++dir) {
        DirectionParams<T> dp;
        const std::size_t input = (dir == 1 && cfg.stacked_bidir) ? d : e;
        dp.gru = GruParams<T>::init(input, d, rng, range);
        if (cfg.use_ntm) dp.memory = MemoryParams<T>::init(d, m, d, rng, range);
        (dir == 0 ? p.forward : p.backward) = std::move(dp);
      }
    }
    if (cfg.use_ntm && cfg.use_rnn) p.gate_ntm_rnn = GateParams<T>::init(width, rng, range);
    if (cfg.use_emb && cfg.use_rnn && !cfg.use_ntm) p.gate_rnn_emb = GateParams<T>::init(width, rng, range);
    if (cfg.use_emb && cfg.use_ntm && !cfg.use_rnn) p.gate_ntm_emb = GateParams<T>::init(width, rng, range);
    if (cfg.use_emb && cfg.use_ntm && cfg.use_rnn) p.gate_all = GateParams<T>::init(width, rng, range);
    return p;
  }

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
    f(std::string("enc.embedding"), s.embedding);
    if (!s.embedding_bias.empty()) f(std::string("enc.embedding_bias"), s.embedding_bias);
    if (s.forward) s.forward->visit(f, "enc.fwd.");
    if (s.backward) s.backward->visit(f, "enc.bwd.");
    s.gate_ntm_rnn.visit(f, "enc.g0.");
    s.gate_rnn_emb.visit(f, "enc.g1.");
    s.gate_ntm_emb.visit(f, "enc.g2.");
    s.gate_all.visit(f, "enc.g3.");
  }
};

template <typename T>
struct DirectionStep {
  MemoryReadCache<T> read;
  GruCache<T> gru;
  MemoryWriteCache<T> write;
};

template <typename T>
struct DirectionTrace {
  std::vector<DirectionStep<T>> steps;
  Tensor<T> states;        // (n x d), row t is s_t
  Tensor<T> final_memory;  // (n x m), absent without memory
};

/// One pass over `inputs` in row order. With memory, M^0 = `initial_memory`
/// and at each step the read context replaces the previous state as the GRU
/// state input; otherwise a plain GRU recurrence from s_0 = 0.
template <typename T>
DirectionTrace<T> encode_direction(const DirectionParams<T>& p, const Tensor<T>& inputs,
                                   const Tensor<T>* initial_memory, ReadWeighting mode) {
  const std::size_t n = inputs.rows();
  const std::size_t d = p.gru.hidden_size();
  DirectionTrace<T> trace;
  trace.steps.resize(n);
  trace.states = Tensor<T>({n, d});
  std::vector<T> state(d, T(0));
  const bool with_memory = p.has_memory();
  if (with_memory && initial_memory == nullptr) throw Error("memory direction needs M^0");
  Tensor<T> memory = with_memory ? *initial_memory : Tensor<T>();
  for (std::size_t t = 0; t < n; ++t) {
    auto& step = trace.steps[t];
    if (with_memory) {
      step.read = memory_read(p.memory, memory, std::span<const T>(state), mode);
      step.gru = gru_forward(p.gru, inputs.row(t), std::span<const T>(step.read.context));
      step.write = memory_write(p.memory, step.read.read_memory, std::span<const T>(step.gru.h),
                                std::span<const T>(step.read.weights()));
      memory = step.write.memory;
    } else {
      step.gru = gru_forward(p.gru, inputs.row(t), std::span<const T>(state));
    }
    state = step.gru.h;
    std::copy(state.begin(), state.end(), trace.states.row(t).begin());
  }
  if (with_memory) trace.final_memory = std::move(memory);
  return trace;
}

/// Returns dL/dM^0 (absent without memory); input gradients go to `dinputs`.
template <typename T>
Tensor<T> encode_direction_backward(const DirectionParams<T>& p, const DirectionTrace<T>& trace,
                                    const Tensor<T>& dstates, const Tensor<T>* dfinal_memory,
                                    DirectionParams<T>& g, Tensor<T>& dinputs) {
  const std::size_t n = trace.steps.size();
  const std::size_t d = p.gru.hidden_size();
  const bool with_memory = p.has_memory();
  std::vector<T> carry(d, T(0));
  Tensor<T> dmemory;
  if (with_memory) {
    dmemory = dfinal_memory ? *dfinal_memory : Tensor<T>::zeros_like(trace.final_memory);
  }
  for (std::size_t t = n; t-- > 0;) {
    const auto& step = trace.steps[t];
    std::vector<T> ds(carry);
    add_to(dstates.row(t), std::span<T>(ds));
    std::vector<T> dprev(d, T(0));
    if (with_memory) {
      const std::size_t cells = dmemory.rows();
      Tensor<T> dread = Tensor<T>::zeros_like(dmemory);
      std::vector<T> dweights(cells, T(0));
      memory_write_backward(p.memory, step.write, std::span<const T>(step.read.weights()), dmemory,
                            g.memory, dread, std::span<T>(ds), std::span<T>(dweights));
      std::vector<T> dcontext(d, T(0));
      gru_backward(p.gru, step.gru, std::span<const T>(ds), g.gru, dinputs.row(t),
                   std::span<T>(dcontext));
      Tensor<T> dmemory_prev = Tensor<T>::zeros_like(dmemory);
      memory_read_backward(p.memory, step.read, dread, std::span<const T>(dcontext),
                           std::span<const T>(dweights), g.memory, dmemory_prev,
                           std::span<T>(dprev));
      dmemory = std::move(dmemory_prev);
    } else {
      gru_backward(p.gru, step.gru, std::span<const T>(ds), g.gru, dinputs.row(t),
                   std::span<T>(dprev));
    }
    carry = std::move(dprev);
  }
  return dmemory;
}

template <typename T>
Tensor<T> reverse_rows(const Tensor<T>& x) {
  Tensor<T> out = Tensor<T>::zeros_like(x);
  const std::size_t n = x.rows();
  for (std::size_t i = 0; i < n; ++i) {
    std::copy(x.row(i).begin(), x.row(i).end(), out.row(n - 1 - i).begin());
  }
  return out;
}

/// [a ; b] per row.
template <typename T>
Tensor<T> concat_cols(const Tensor<T>& a, const Tensor<T>& b) {
  if (a.rows() != b.rows()) throw ShapeError("concat_cols row mismatch");
  Tensor<T> out({a.rows(), a.cols() + b.cols()});
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto row = out.row(i);
    std::copy(a.row(i).begin(), a.row(i).end(), row.begin());
    std::copy(b.row(i).begin(), b.row(i).end(), row.begin() + static_cast<std::ptrdiff_t>(a.cols()));
  }
  return out;
}

/// Splits columns [0, left) and [left, cols).
template <typename T>
std::pair<Tensor<T>, Tensor<T>> split_cols(const Tensor<T>& x, std::size_t left) {
  Tensor<T> a({x.rows(), left}), b({x.rows(), x.cols() - left});
  for (std::size_t i = 0; i < x.rows(); ++i) {
    const auto row = x.row(i);
    std::copy(row.begin(), row.begin() + static_cast<std::ptrdiff_t>(left), a.row(i).begin());
    std::copy(row.begin() + static_cast<std::ptrdiff_t>(left), row.end(), b.row(i).begin());
  }
  return {std::move(a), std::move(b)};
}

/// Channel matrices for one sentence and their gated combination.
template <typename T>
struct SourceEncoding {
  Tensor<T> embeddings;  // E' = [E ; E], (n x 2e), absent without the EMB channel
  Tensor<T> hidden;      // h = [fwd ; bwd] states, (n x 2d)
  Tensor<T> memory;      // M = [fwd ; bwd] final memories, (n x 2m)
  Tensor<T> annotation;  // A, (n x D)
  std::vector<TokenId> mask;

  std::size_t length() const { return annotation.rows(); }
};

template <typename T>
struct CombineCache {
  BlendCache<T> first;   // g0, g1 or g2
  BlendCache<T> second;  // g3
};

/// Builds A from whichever channels `cfg` enables:
///   single channel: A is that channel matrix;
///   NTM-RNN: g0 * M + (1 - g0) * h;   RNN-EMB: g1 * E' + (1 - g1) * h;
///   NTM-EMB: g2 * E' + (1 - g2) * M;  NTM-RNN-EMB: g3 * E' + (1 - g3) * (NTM-RNN blend).
template <typename T>
Tensor<T> combine_channels(const ChannelConfig& cfg, const EncoderParams<T>& p,
                           const Tensor<T>* embeddings, const Tensor<T>* hidden,
                           const Tensor<T>* memory, CombineCache<T>* cache = nullptr) {
  auto need = [](const Tensor<T>* t, const char* name) -> const Tensor<T>& {
    if (t == nullptr || t->empty()) {
      throw Error(std::string("combine_channels: config requires the ") + name +
                  " channel but it is absent");
    }
    return *t;
  };
  CombineCache<T> local;
  CombineCache<T>& c = cache ? *cache : local;
  const bool e = cfg.use_emb, r = cfg.use_rnn, m = cfg.use_ntm;
  if (e && !r && !m) return need(embeddings, "embedding");
  if (!e && r && !m) return need(hidden, "hidden-state");
  if (!e && !r && m) return need(memory, "memory");
  if (!e && r && m) {
    c.first = gated_blend(p.gate_ntm_rnn, need(memory, "memory"), need(hidden, "hidden-state"));
    return c.first.output;
  }
  if (e && r && !m) {
    c.first = gated_blend(p.gate_rnn_emb, need(embeddings, "embedding"), need(hidden, "hidden-state"));
    return c.first.output;
  }
  if (e && !r && m) {
    c.first = gated_blend(p.gate_ntm_emb, need(embeddings, "embedding"), need(memory, "memory"));
    return c.first.output;
  }
  c.first = gated_blend(p.gate_ntm_rnn, need(memory, "memory"), need(hidden, "hidden-state"));
  c.second = gated_blend(p.gate_all, need(embeddings, "embedding"), c.first.output);
  return c.second.output;
}

/// Routes dL/dA back to the channel matrices.
template <typename T>
void combine_channels_backward(const ChannelConfig& cfg, const EncoderParams<T>& p,
                               const SourceEncoding<T>& enc, const CombineCache<T>& c,
                               const Tensor<T>& dannotation, EncoderParams<T>& g,
                               Tensor<T>& dembeddings, Tensor<T>& dhidden, Tensor<T>& dmemory) {
  const bool e = cfg.use_emb, r = cfg.use_rnn, m = cfg.use_ntm;
  if (e && !r && !m) {
    add_to(dannotation.data(), dembeddings.data());
  } else if (!e && r && !m) {
    add_to(dannotation.data(), dhidden.data());
  } else if (!e && !r && m) {
    add_to(dannotation.data(), dmemory.data());
  } else if (!e && r && m) {
    gated_blend_backward(p.gate_ntm_rnn, enc.memory, enc.hidden, c.first, dannotation,
                         g.gate_ntm_rnn, dmemory, dhidden);
  } else if (e && r && !m) {
    gated_blend_backward(p.gate_rnn_emb, enc.embeddings, enc.hidden, c.first, dannotation,
                         g.gate_rnn_emb, dembeddings, dhidden);
  } else if (e && !r && m) {
    gated_blend_backward(p.gate_ntm_emb, enc.embeddings, enc.memory, c.first, dannotation,
                         g.gate_ntm_emb, dembeddings, dmemory);
  } else {
    Tensor<T> dblend = Tensor<T>::zeros_like(c.first.output);
    gated_blend_backward(p.gate_all, enc.embeddings, c.first.output, c.second, dannotation,
                         g.gate_all, dembeddings, dblend);
    gated_blend_backward(p.gate_ntm_rnn, enc.memory, enc.hidden, c.first, dblend, g.gate_ntm_rnn,
                         dmemory, dhidden);
  }
}

/// Forward state kept for the backward pass.
template <typename T>
struct EncoderTrace {
  std::vector<TokenId> ids;
  Tensor<T> embedded;  // E, (n x e)
  std::optional<DirectionTrace<T>> forward, backward;  // backward runs on reversed rows
  CombineCache<T> combine;
  SourceEncoding<T> encoding;
};

/// E row t = embedding[x_t] (+ bias).
template <typename T>
Tensor<T> embed(const Tensor<T>& table, const Tensor<T>& bias, const std::vector<TokenId>& ids) {
  if (ids.empty()) throw Error("embed: empty sequence");
  Tensor<T> out({ids.size(), table.cols()});
  for (std::size_t t = 0; t < ids.size(); ++t) {
    const TokenId id = ids[t];
    if (id < 0 || static_cast<std::size_t>(id) >= table.rows()) {
      throw Error("embed: token id " + std::to_string(id) + " out of range for vocabulary of " +
                  std::to_string(table.rows()));
    }
    auto row = out.row(t);
    std::copy(table.row(static_cast<std::size_t>(id)).begin(),
              table.row(static_cast<std::size_t>(id)).end(), row.begin());
    if (!bias.empty()) add_to(bias.data(), row);
  }
  return out;
}

template <typename T>
void embed_backward(const std::vector<TokenId>& ids, const Tensor<T>& dembedded, Tensor<T>& dtable,
                    Tensor<T>& dbias) {
  for (std::size_t t = 0; t < ids.size(); ++t) {
    add_to(dembedded.row(t), dtable.row(static_cast<std::size_t>(ids[t])));
    if (!dbias.empty()) add_to(dembedded.row(t), dbias.data());
  }
}

template <typename T>
EncoderTrace<T> encode(const ChannelConfig& cfg, const EncoderParams<T>& p,
                       const std::vector<TokenId>& ids) {
  EncoderTrace<T> tr;
  tr.ids = ids;
  tr.embedded = embed(p.embedding, p.embedding_bias, ids);
  auto& enc = tr.encoding;
  enc.mask.assign(ids.size(), 1);
  if (cfg.use_emb) enc.embeddings = concat_cols(tr.embedded, tr.embedded);
  if (cfg.recurrent()) {
    const Tensor<T>* m0 = cfg.use_ntm ? &tr.embedded : nullptr;
    tr.forward = encode_direction(*p.forward, tr.embedded, m0, cfg.read_weighting);
    const Tensor<T> reversed_embedded = reverse_rows(tr.embedded);
    const Tensor<T> backward_inputs =
        cfg.stacked_bidir ? reverse_rows(tr.forward->states) : reversed_embedded;
    tr.backward = encode_direction(*p.backward, backward_inputs,
                                   cfg.use_ntm ? &reversed_embedded : nullptr, cfg.read_weighting);
    enc.hidden = concat_cols(tr.forward->states, reverse_rows(tr.backward->states));
    if (cfg.use_ntm) {
      enc.memory = concat_cols(tr.forward->final_memory, reverse_rows(tr.backward->final_memory));
    }
  }
  enc.annotation = combine_channels(cfg, p, &enc.embeddings, &enc.hidden, &enc.memory, &tr.combine);
  return tr;
}

template <typename T>
void encode_backward(const ChannelConfig& cfg, const EncoderParams<T>& p, const EncoderTrace<T>& tr,
                     const Tensor<T>& dannotation, EncoderParams<T>& g) {
  const auto& enc = tr.encoding;
  const std::size_t n = tr.ids.size();
  const std::size_t e = cfg.emb_dim, d = cfg.hidden_dim, m = cfg.mem_dim;
  Tensor<T> dembeddings = cfg.use_emb ? Tensor<T>({n, 2 * e}) : Tensor<T>();
  Tensor<T> dhidden = cfg.recurrent() ? Tensor<T>({n, 2 * d}) : Tensor<T>();
  Tensor<T> dmemory = cfg.use_ntm ? Tensor<T>({n, 2 * m}) : Tensor<T>();
  combine_channels_backward(cfg, p, enc, tr.combine, dannotation, g, dembeddings, dhidden, dmemory);

  Tensor<T> dembedded({n, e});
  if (cfg.use_emb) {
    auto [left, right] = split_cols(dembeddings, e);
    add_to(left.data(), dembedded.data());
    add_to(right.data(), dembedded.data());
  }
  if (cfg.recurrent()) {
    auto [dh_fwd, dh_bwd] = split_cols(dhidden, d);
    Tensor<T> dmem_fwd, dmem_bwd;
    if (cfg.use_ntm) {
      auto split = split_cols(dmemory, m);
      dmem_fwd = std::move(split.first);
      dmem_bwd = reverse_rows(split.second);
    }
    const Tensor<T>& bwd_inputs_shape = cfg.stacked_bidir ? tr.forward->states : tr.embedded;
    Tensor<T> dbwd_inputs = Tensor<T>::zeros_like(bwd_inputs_shape);
    Tensor<T> dm0_bwd = encode_direction_backward(*p.backward, *tr.backward, reverse_rows(dh_bwd),
                                                  cfg.use_ntm ? &dmem_bwd : nullptr, *g.backward,
                                                  dbwd_inputs);
    dbwd_inputs = reverse_rows(dbwd_inputs);
    if (cfg.stacked_bidir) {
      add_to(dbwd_inputs.data(), dh_fwd.data());
    } else {
      add_to(dbwd_inputs.data(), dembedded.data());
    }
    if (cfg.use_ntm) add_to(reverse_rows(dm0_bwd).data(), dembedded.data());

    Tensor<T> dfwd_inputs = Tensor<T>::zeros_like(tr.embedded);
    Tensor<T> dm0_fwd = encode_direction_backward(*p.forward, *tr.forward, dh_fwd,
                                                  cfg.use_ntm ? &dmem_fwd : nullptr, *g.forward,
                                                  dfwd_inputs);
    add_to(dfwd_inputs.data(), dembedded.data());
    if (cfg.use_ntm) add_to(dm0_fwd.data(), dembedded.data());
  }
  embed_backward(tr.ids, dembedded, g.embedding, g.embedding_bias);
}

}  // namespace mce

#endif  // MCE_ENCODER_HPP_
