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

// Pseudo-random scorer and brute-force search shared by the beam tests.
#pragma once

#include <cstdint>
#include <limits>
#include <span>
#include <utility>
#include <vector>

#include "mce/beam_search.hpp"

namespace mce::testing_support {

// Toy language model: next-token log-probabilities are a pseudo-random
// function of the whole prefix, so every path through the tree differs.
class ToyScorer {
 public:
  using State = std::vector<TokenId>;  // decoder inputs so far, BOS first

  ToyScorer(std::uint64_t seed, std::size_t vocab, double spread = 3.0)
      : seed_(seed), vocab_(vocab), spread_(spread) {}

  State initial() const { return {}; }

  std::pair<std::vector<double>, State> advance(const State& state, TokenId previous) const {
    State next = state;
    next.push_back(previous);
    return {log_probs(State(next.begin() + 1, next.end())), next};
  }

  std::vector<double> log_probs(const State& prefix) const {
    std::uint64_t h = seed_;
    for (TokenId t : prefix) h = h * 1000003ULL + static_cast<std::uint64_t>(t) + 1;
    Rng rng = Rng::derive(h, prefix.size());
    std::vector<double> logits(vocab_);
    for (auto& l : logits) l = rng.uniform(-spread_, spread_);
    return log_softmax(std::span<const double>(logits));
  }

 private:
  std::uint64_t seed_;
  std::size_t vocab_;
  double spread_;
};

struct Enumerated {
  std::vector<TokenId> tokens;
  double normalized = -std::numeric_limits<double>::infinity();
};

// Brute force over every sequence that ends in EOS within max_len steps.
inline void enumerate(const ToyScorer& s, std::size_t max_len, std::vector<TokenId>& prefix, double log_prob,
               Enumerated& best) {
  const auto lp = s.log_probs(prefix);
  const double finished = log_prob + lp[kEosId];
  const double norm = finished / static_cast<double>(prefix.size() + 1);
  if (norm > best.normalized) best = {prefix, norm};
  if (prefix.size() + 1 >= max_len) return;
  for (std::size_t t = 0; t < lp.size(); ++t) {
    if (static_cast<TokenId>(t) == kEosId) continue;
    prefix.push_back(static_cast<TokenId>(t));
    enumerate(s, max_len, prefix, log_prob + lp[t], best);
    prefix.pop_back();
  }
}

}  // namespace mce::testing_support
