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

#include <cmath>
#include <numeric>

#include <gtest/gtest.h>

#include "mce/model.hpp"

namespace mce {
namespace {

Tensor<double> random_matrix(std::size_t rows, std::size_t cols, Rng& rng, double range = 1.0) {
  return uniform_init<double>({rows, cols}, rng, range);
}

ChannelConfig small_channels(const std::string& system, std::size_t dim = 4) {
  ChannelConfig c;
  c.set_system(system);
  c.emb_dim = c.hidden_dim = c.mem_dim = dim;
  return c;
}

// ---------------------------------------------------------------------------
// GRU and memory zero-parameter algebra

TEST(GruAlgebraTest, ZeroParamsHalveState) {
  Rng rng(1);
  const auto p = zeros_like_params(GruParams<double>::init(3, 4, rng));
  const std::vector<double> x = {0.3, -1, 2}, h = {1, -2, 0.5, 4};
  const auto c = gru_forward(p, std::span<const double>(x), std::span<const double>(h));
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(c.z[i], 0.5);
    EXPECT_EQ(c.r[i], 0.5);
    EXPECT_EQ(c.cand[i], 0.0);
    EXPECT_EQ(c.h[i], 0.5 * h[i]);
  }
  const std::vector<double> zero(4, 0.0);
  for (double v : gru_step(p, std::span<const double>(x), std::span<const double>(zero))) EXPECT_EQ(v, 0.0);
}

TEST(MemoryAlgebraTest, ZeroReadGateHalvesAddressedMemory) {
  Rng rng(2);
  const auto p = zeros_like_params(MemoryParams<double>::init(4, 4, 4, rng));
  const auto memory = random_matrix(3, 4, rng);
  const std::vector<double> state = {0.1, 0.2, 0.3, 0.4};
  const auto c = memory_read(p, memory, std::span<const double>(state));
  for (double g : c.read_gate) EXPECT_EQ(g, 0.5);
  for (double w : c.weights()) EXPECT_NEAR(w, 1.0 / 3.0, 1e-15);
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      EXPECT_NEAR(c.read_memory(i, j), 0.5 * c.weights()[i] * memory(i, j), 1e-15);
    }
  }
}

TEST(MemoryAlgebraTest, SingleCellSaturatedReadReturnsCell) {
  Rng rng(3);
  auto p = zeros_like_params(MemoryParams<double>::init(4, 4, 4, rng));
  p.b_read.fill(50);
  const auto memory = random_matrix(1, 4, rng);
  const std::vector<double> state(4, 0.0);
  const auto c = memory_read(p, memory, std::span<const double>(state));
  ASSERT_EQ(c.weights().size(), 1u);
  EXPECT_EQ(c.weights()[0], 1.0);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(c.context[j], memory(0, j), 1e-12);
}

TEST(MemoryAlgebraTest, ZeroUpdateGateAddsHalfWeight) {
  Rng rng(4);
  const auto p = zeros_like_params(MemoryParams<double>::init(4, 4, 4, rng));
  const auto read = random_matrix(3, 4, rng);
  const std::vector<double> state = {1, 2, 3, 4}, w = {0.2, 0.3, 0.5};
  const auto c = memory_write(p, read, std::span<const double>(state), std::span<const double>(w));
  for (std::size_t i = 0; i < 3; ++i) {
    for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(c.memory(i, j), read(i, j) + 0.5 * w[i]);
  }
}

TEST(MemoryAlgebraTest, OneHotWriteTouchesOneRow) {
  Rng rng(5);
  const auto p = MemoryParams<double>::init(4, 4, 4, rng, 0.5);
  const auto read = random_matrix(4, 4, rng);
  const std::vector<double> state = {1, -1, 0.5, 2}, w = {0, 0, 1, 0};
  const auto c = memory_write(p, read, std::span<const double>(state), std::span<const double>(w));
  for (std::size_t i = 0; i < 4; ++i) {
    for (std::size_t j = 0; j < 4; ++j) {
      if (i == 2) {
        EXPECT_NE(c.memory(i, j), read(i, j));
      } else {
        EXPECT_EQ(c.memory(i, j), read(i, j));
      }
    }
  }
}

TEST(MemoryAlgebraTest, SingleCellZeroParamChain) {
  // One position, zero parameters: w = [1], R = 0.5, c_1 = 0.5 * E_1, then
  // the GRU halves its previous state, so s_1 = 0.5 * c_1 = 0.25 * E_1.
  Rng rng(6);
  DirectionParams<double> p;
  p.gru = zeros_like_params(GruParams<double>::init(4, 4, rng));
  p.memory = zeros_like_params(MemoryParams<double>::init(4, 4, 4, rng));
  const auto e = random_matrix(1, 4, rng);
  const auto trace = encode_direction(p, e, &e, ReadWeighting::kLiteral);
  for (std::size_t j = 0; j < 4; ++j) {
    EXPECT_EQ(trace.steps[0].read.context[j], 0.5 * e(0, j));
    EXPECT_EQ(trace.states(0, j), 0.25 * e(0, j));
  }
}

TEST(MemoryAlgebraTest, LiteralWeightsContextTwice) {
  // Uniform addressing over n cells: the literal reading weights each cell
  // by w_i^2, the single reading by w_i, so the contexts differ by n.
  Rng rng(7);
  const auto p = zeros_like_params(MemoryParams<double>::init(4, 4, 4, rng));
  const auto memory = random_matrix(5, 4, rng);
  const std::vector<double> state(4, 0.3);
  const auto literal = memory_read(p, memory, std::span<const double>(state), ReadWeighting::kLiteral);
  const auto single = memory_read(p, memory, std::span<const double>(state), ReadWeighting::kSingle);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_NEAR(single.context[j], 5 * literal.context[j], 1e-14);
}

TEST(MemoryAlgebraTest, ClosedWriteGateLeavesReadChain) {
  Rng rng(8);
  auto cfg = small_channels("NTM");
  auto p = EncoderParams<double>::init(cfg, 10, rng, 0.5);
  for (auto* dir : {&*p.forward, &*p.backward}) {
    dir->memory.w_update.fill(0);
    dir->memory.b_update.fill(-50);
  }
  const auto tr = encode(cfg, p, {4, 5, 6, 7, 8});
  for (const auto* dir : {&*tr.forward, &*tr.backward}) {
    for (const auto& step : dir->steps) {
      for (std::size_t k = 0; k < step.write.memory.size(); ++k) {
        EXPECT_NEAR(step.write.memory[k], step.read.read_memory[k], 1e-20);
      }
    }
  }
}

// ---------------------------------------------------------------------------
// Channel combination

class ChannelTest : public ::testing::TestWithParam<std::string> {};

TEST_P(ChannelTest, IdenticalChannelsPassThrough) {
  const auto cfg = small_channels(GetParam());
  Rng rng(11);
  const auto p = EncoderParams<double>::init(cfg, 10, rng, 2.0);
  for (int trial = 0; trial < 20; ++trial) {
    const auto x = random_matrix(6, cfg.annotation_dim(), rng, 3.0);
    const auto a = combine_channels(cfg, p, &x, &x, &x);
    for (std::size_t k = 0; k < x.size(); ++k) EXPECT_DOUBLE_EQ(a[k], x[k]);
  }
}

TEST_P(ChannelTest, ZeroGatesAverage) {
  const auto cfg = small_channels(GetParam());
  Rng rng(12);
  const auto p = zeros_like_params(EncoderParams<double>::init(cfg, 10, rng));
  const std::size_t width = cfg.annotation_dim();
  const auto e = random_matrix(5, width, rng), h = random_matrix(5, width, rng), m = random_matrix(5, width, rng);
  const auto a = combine_channels(cfg, p, &e, &h, &m);
  const bool ue = cfg.use_emb, ur = cfg.use_rnn, un = cfg.use_ntm;
  for (std::size_t k = 0; k < a.size(); ++k) {
    double expected;
    if (ue && ur && un) {
      expected = 0.5 * (e[k] + 0.5 * (m[k] + h[k]));
    } else if (ur && un) {
      expected = 0.5 * (m[k] + h[k]);
    } else if (ue && ur) {
      expected = 0.5 * (e[k] + h[k]);
    } else if (ue && un) {
      expected = 0.5 * (e[k] + m[k]);
    } else {
      expected = ue ? e[k] : ur ? h[k] : m[k];
    }
    EXPECT_EQ(a[k], expected);
  }
}

INSTANTIATE_TEST_SUITE_P(AllSystems, ChannelTest, ::testing::ValuesIn(ChannelConfig::all_systems()),
                         [](const auto& info) {
                           std::string s = info.param;
                           std::replace(s.begin(), s.end(), '-', '_');
                           return s;
                         });

TEST(ChannelTest, SingleChannelIsBitIdentical) {
  Rng rng(13);
  for (const std::string system : {"EMB", "RNN", "NTM"}) {
    const auto cfg = small_channels(system);
    const auto p = EncoderParams<double>::init(cfg, 12, rng, 0.5);
    const auto tr = encode(cfg, p, {4, 9, 5, 11, 4});
    const auto& enc = tr.encoding;
    const auto& expected = system == "EMB" ? enc.embeddings : system == "RNN" ? enc.hidden : enc.memory;
    EXPECT_TRUE(enc.annotation == expected) << system;
  }
}

TEST(ChannelTest, SaturatedGateSelectsFirstChannel) {
  Rng rng(14);
  GateParams<double> g = GateParams<double>::init(4, rng);
  g.b.fill(50);
  const auto first = random_matrix(3, 4, rng), second = random_matrix(3, 4, rng);
  const auto c = gated_blend(g, first, second);
  for (std::size_t k = 0; k < first.size(); ++k) EXPECT_NEAR(c.output[k], first[k], 1e-12);
}

TEST(ChannelTest, MissingChannelIsAnError) {
  const auto cfg = small_channels("RNN-EMB");
  Rng rng(15);
  const auto p = EncoderParams<double>::init(cfg, 10, rng);
  const auto x = random_matrix(3, cfg.annotation_dim(), rng);
  EXPECT_THROW(combine_channels(cfg, p, &x, static_cast<const Tensor<double>*>(nullptr), &x), Error);
}

TEST(ChannelTest, NtmDimensionConstraint) {
  ChannelConfig c = small_channels("NTM");
  c.emb_dim = 32;
  c.hidden_dim = 16;
  EXPECT_THROW(c.validate(), Error);
  EXPECT_THROW(c.set_system("CNN"), Error);
}

TEST(EncoderTest, EmbeddingRows) {
  auto cfg = small_channels("EMB");
  cfg.emb_bias = false;
  Rng rng(16);
  auto p = EncoderParams<double>::init(cfg, 6, rng);
  p.embedding.fill(0);
  for (std::size_t k = 0; k < 4; ++k) p.embedding(k + 2, k) = 1;
  const auto e = embed(p.embedding, p.embedding_bias, {2, 5, 5});
  EXPECT_EQ(e(0, 0), 1.0);
  EXPECT_EQ(e(1, 3), 1.0);
  for (std::size_t j = 0; j < 4; ++j) EXPECT_EQ(e(1, j), e(2, j));
  EXPECT_THROW(embed(p.embedding, p.embedding_bias, {6}), Error);
}

TEST(EncoderTest, PalindromeWithTiedDirectionsIsSymmetric) {
  const auto cfg = small_channels("NTM-RNN");
  Rng rng(17);
  auto p = EncoderParams<double>::init(cfg, 10, rng, 0.5);
  p.backward = p.forward;
  const auto tr = encode(cfg, p, {4, 7, 9, 7, 4});
  const auto& h = tr.encoding.hidden;
  const std::size_t n = 5, d = cfg.hidden_dim;
  for (std::size_t t = 0; t < n; ++t) {
    for (std::size_t j = 0; j < d; ++j) EXPECT_EQ(h(t, d + j), h(n - 1 - t, j));
  }
}

// ---------------------------------------------------------------------------
// Normalization of attention and memory addressing

TEST(NormalizationTest, RandomAttentionAndAddressing) {
  Rng rng(21);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + rng.uniform_int(9), q = 1 + rng.uniform_int(5), k = 1 + rng.uniform_int(5);
    const auto p = AttentionParams<double>::init(q, k, 1 + rng.uniform_int(5), rng, 2.0);
    const auto items = random_matrix(n, k, rng, 3.0);
    std::vector<double> query(q);
    for (auto& v : query) v = rng.uniform(-3, 3);
    std::vector<TokenId> mask(n);
    for (auto& m : mask) m = rng.uniform() < 0.7 ? 1 : 0;
    mask[rng.uniform_int(n)] = 1;
    const auto keys = attention_keys(p, items);
    const auto c = attention_weights(p, std::span<const double>(query), keys, std::span<const TokenId>(mask));
    double total = 0;
    for (std::size_t i = 0; i < n; ++i) {
      if (mask[i] == 0) {
        ASSERT_EQ(c.weights[i], 0.0);
      }
      total += c.weights[i];
    }
    ASSERT_NEAR(total, 1.0, 1e-12);

    const std::size_t m = 1 + rng.uniform_int(5), d = 1 + rng.uniform_int(5);
    const auto mp = MemoryParams<double>::init(d, m, 1 + rng.uniform_int(5), rng, 2.0);
    std::vector<double> state(d);
    for (auto& v : state) v = rng.uniform(-1, 1);
    const auto read = memory_read(mp, random_matrix(n, m, rng, 3.0), std::span<const double>(state));
    ASSERT_NEAR(std::accumulate(read.weights().begin(), read.weights().end(), 0.0), 1.0, 1e-12);
  }
}

TEST(AttentionTest, MatchesDirectRecomputation) {
  Rng rng(22);
  const auto p = AttentionParams<double>::init(3, 4, 6, rng, 1.0);
  const auto items = random_matrix(5, 4, rng);
  const std::vector<double> query = {0.5, -1, 0.25};
  const auto c = attention_weights(p, std::span<const double>(query), attention_keys(p, items));
  std::vector<double> e(5);
  for (std::size_t i = 0; i < 5; ++i) {
    for (std::size_t a = 0; a < 6; ++a) {
      double pre = p.ba[a];
      for (std::size_t j = 0; j < 3; ++j) pre += p.ua(a, j) * query[j];
      for (std::size_t j = 0; j < 4; ++j) pre += p.wa(a, j) * items(i, j);
      e[i] += p.va[a] * std::tanh(pre);
    }
  }
  double z = 0;
  for (double v : e) z += std::exp(v);
  for (std::size_t i = 0; i < 5; ++i) EXPECT_NEAR(c.weights[i], std::exp(e[i]) / z, 1e-12);
}

TEST(AttentionTest, DegenerateShapes) {
  Rng rng(23);
  const auto p = AttentionParams<double>::init(2, 3, 4, rng);
  const std::vector<double> query = {1, 2};
  const auto one = random_matrix(1, 3, rng);
  const auto r = attend(p, std::span<const double>(query), one, attention_keys(p, one));
  EXPECT_EQ(r.scores.weights[0], 1.0);
  for (std::size_t j = 0; j < 3; ++j) EXPECT_EQ(r.context[j], one(0, j));

  Tensor<double> same({4, 3});
  for (std::size_t i = 0; i < 4; ++i) std::copy(one.row(0).begin(), one.row(0).end(), same.row(i).begin());
  const std::vector<TokenId> mask = {1, 0, 1, 1};
  const auto u = attention_weights(p, std::span<const double>(query), attention_keys(p, same),
                                   std::span<const TokenId>(mask));
  EXPECT_NEAR(u.weights[0], 1.0 / 3.0, 1e-15);
  EXPECT_EQ(u.weights[1], 0.0);
  const std::vector<TokenId> none = {0, 0, 0, 0};
  EXPECT_THROW(attention_weights(p, std::span<const double>(query), attention_keys(p, same),
                                 std::span<const TokenId>(none)),
               Error);
}

// ---------------------------------------------------------------------------
// Decoder and loss

ModelConfig tiny_model(const std::string& system = "NTM-RNN-EMB", std::size_t tgt_vocab = 7) {
  ModelConfig mc;
  mc.channels = small_channels(system, 3);
  mc.src_vocab = 8;
  mc.tgt_vocab = tgt_vocab;
  return mc;
}

TEST(DecoderTest, ZeroParamsGiveUniform) {
  Model<double> model(tiny_model(), 1);
  model.params() = zeros_like_params(model.params());
  auto session = model.start({4, 5, 6});
  const auto step = session->step(std::span<const double>(session->initial_state()), kBosId);
  for (double lp : step.log_probs) EXPECT_NEAR(lp, -std::log(7.0), 1e-15);
}

TEST(DecoderTest, LogProbsNormalize) {
  Rng rng(31);
  for (const auto& system : ChannelConfig::all_systems()) {
    auto mc = tiny_model(system);
    mc.init_range = 1.0;
    Model<double> model(mc, rng.next_u64());
    auto session = model.start({4, 7, 5});
    auto state = session->initial_state();
    for (TokenId prev : {kBosId, TokenId{4}, TokenId{6}}) {
      const auto step = session->step(std::span<const double>(state), prev);
      double z = 0;
      for (double lp : step.log_probs) z += std::exp(lp);
      EXPECT_NEAR(z, 1.0, 1e-12) << system;
      state = step.state();
    }
  }
}

TEST(DecoderTest, RateZeroMaskMatchesNoDropout) {
  Model<double> model(tiny_model(), 2);
  auto session = model.start({4, 5});
  const auto& s0 = session->initial_state();
  Tensor<double> ones({model.params().decoder.w_state.rows()}, 1.0);
  const auto a = session->step(std::span<const double>(s0), kBosId);
  const auto b = session->step(std::span<const double>(s0), kBosId, &ones);
  EXPECT_EQ(a.log_probs, b.log_probs);
}

TEST(LossTest, UniformModelCostsLengthTimesLogV) {
  Model<double> model(tiny_model(), 3);
  model.params() = zeros_like_params(model.params());
  const std::vector<TokenId> target = {4, 5, 6, kEosId};
  const auto stats = model.sentence_loss({4, 5, 6}, target, 1.0, nullptr, nullptr);
  EXPECT_NEAR(stats.nll_sum, 4 * std::log(7.0), 1e-12);
  EXPECT_EQ(stats.tokens, 4u);
}

TEST(LossTest, HalfProbabilityCostsLogTwo) {
  Model<double> model(tiny_model(), 4);
  model.params() = zeros_like_params(model.params());
  model.params().decoder.b_out[kEosId] = std::log(6.0);
  const auto stats = model.sentence_loss({4}, {kEosId}, 1.0, nullptr, nullptr);
  EXPECT_NEAR(stats.nll_sum, std::log(2.0), 1e-12);
}

TEST(LossTest, RejectsBadInput) {
  Model<double> model(tiny_model(), 5);
  EXPECT_THROW(model.sentence_loss({4}, {}, 1.0, nullptr, nullptr), Error);
  EXPECT_THROW(model.sentence_loss({4}, {9, kEosId}, 1.0, nullptr, nullptr), Error);
  EXPECT_THROW(model.sentence_loss({}, {kEosId}, 1.0, nullptr, nullptr), Error);
}

}  // namespace
}  // namespace mce
