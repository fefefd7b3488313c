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

#ifndef MCE_BEAM_SEARCH_HPP_
#define MCE_BEAM_SEARCH_HPP_

#include <algorithm>
#include <concepts>
#include <memory>
#include <numeric>
#include <utility>
#include <vector>

#include "mce/model.hpp"

namespace mce {

/// Anything that scores next tokens: `initial()` gives the start state and
/// `advance(state, previous)` returns the log-probabilities of the next token
/// together with the successor state.
template <typename S>
concept StepScorer = requires(const S& s, const typename S::State& st, TokenId t) {
  { s.initial() } -> std::convertible_to<typename S::State>;
  { s.advance(st, t) } -> std::convertible_to<std::pair<std::vector<double>, typename S::State>>;
};

/// Adapts a trained model to StepScorer for one source sentence.
template <typename T>
class ModelScorer {
 public:
  using State = std::vector<T>;

  ModelScorer(const Model<T>& model, const std::vector<TokenId>& source) : session_(model.start(source)) {}

  State initial() const { return session_->initial_state(); }

  std::pair<std::vector<double>, State> advance(const State& state, TokenId previous) const {
    auto step = session_->step(std::span<const T>(state), previous);
    std::vector<double> lp(step.log_probs.begin(), step.log_probs.end());
    return {std::move(lp), step.state()};
  }

 private:
  std::unique_ptr<typename Model<T>::Session> session_;
};

inline std::size_t default_max_len(std::size_t source_length) { return 2 * source_length + 5; }

/// Emitted tokens exclude EOS; `length` counts it when `finished`.
struct Hypothesis {
  std::vector<TokenId> tokens;
  double log_prob = 0;
  bool finished = false;

  std::size_t length() const { return tokens.size() + (finished ? 1 : 0); }
  double normalized() const { return log_prob / static_cast<double>(length()); }
};

struct BeamResult {
  Hypothesis best;
  std::vector<Hypothesis> pool;  // every hypothesis that competed in the final ranking
};

struct BeamOptions {
  std::size_t beam = 10;
  std::size_t max_len = 0;  // required; see default_max_len
  /// Expand every token instead of the top 2*beam per hypothesis.
  bool full_expansion = false;
};

/// Index of the best hypothesis under length-normalized score; earlier
/// entries win ties.
inline std::size_t best_normalized(const std::vector<Hypothesis>& pool) {
  if (pool.empty()) throw Error("best_normalized: empty pool");
  std::size_t best = 0;
  for (std::size_t i = 1; i < pool.size(); ++i) {
    if (pool[i].normalized() > pool[best].normalized()) best = i;
  }
  return best;
}

/// Argmax decoding; ties go to the lowest token id. Stops after EOS or
/// `max_len` tokens; the returned ids exclude EOS.
template <StepScorer S>
std::vector<TokenId> greedy_decode(const S& scorer, std::size_t max_len) {
  if (max_len < 1) throw Error("greedy_decode: max_len must be at least 1");
  auto state = scorer.initial();
  std::vector<TokenId> out;
  TokenId previous = kBosId;
  for (std::size_t t = 0; t < max_len; ++t) {
    auto [lp, next] = scorer.advance(state, previous);
    const auto best = static_cast<TokenId>(std::max_element(lp.begin(), lp.end()) - lp.begin());
    if (best == kEosId) break;
    out.push_back(best);
    state = std::move(next);
    previous = best;
  }
  return out;
}

/// Shrinking beam: each step keeps the best (beam - finished) expansions, a
/// hypothesis ending in EOS moves to the finished pool, and the search stops
/// when no live hypothesis remains or after `max_len` tokens. The result is
/// the best finished hypothesis by log_prob / length (EOS counted); live
/// hypotheses are ranked only when nothing finished.
template <StepScorer S>
BeamResult beam_search(const S& scorer, const BeamOptions& opt) {
  if (opt.beam < 1) throw Error("beam_search: beam must be at least 1");
  if (opt.max_len < 1) throw Error("beam_search: max_len must be at least 1");
  using State = typename S::State;
  struct Live {
    Hypothesis hyp;
    State state;
  };
  struct Candidate {
    std::size_t parent;
    TokenId token;
    double score;
  };

  std::vector<Live> live;
  live.push_back({Hypothesis{}, scorer.initial()});
  std::vector<Hypothesis> finished;

  for (std::size_t t = 0; t < opt.max_len && !live.empty(); ++t) {
    std::vector<Candidate> candidates;
    std::vector<State> successors;
    successors.reserve(live.size());
    for (std::size_t h = 0; h < live.size(); ++h) {
      const TokenId previous = live[h].hyp.tokens.empty() ? kBosId : live[h].hyp.tokens.back();
      auto [lp, next] = scorer.advance(live[h].state, previous);
      successors.push_back(std::move(next));
      std::vector<TokenId> ids(lp.size());
      std::iota(ids.begin(), ids.end(), TokenId{0});
      const std::size_t width = opt.full_expansion ? ids.size() : std::min(ids.size(), 2 * opt.beam);
      std::partial_sort(ids.begin(), ids.begin() + static_cast<std::ptrdiff_t>(width), ids.end(),
                        [&](TokenId a, TokenId b) {
                          const auto ia = static_cast<std::size_t>(a), ib = static_cast<std::size_t>(b);
                          return lp[ia] != lp[ib] ? lp[ia] > lp[ib] : a < b;
                        });
      for (std::size_t k = 0; k < width; ++k) {
        candidates.push_back({h, ids[k], live[h].hyp.log_prob + lp[static_cast<std::size_t>(ids[k])]});
      }
    }
    std::stable_sort(candidates.begin(), candidates.end(), [](const Candidate& a, const Candidate& b) {
      if (a.score != b.score) return a.score > b.score;
      if (a.token != b.token) return a.token < b.token;
      return a.parent < b.parent;
    });
    const std::size_t keep = std::min(candidates.size(), opt.beam - finished.size());
    std::vector<Live> next_live;
    for (std::size_t k = 0; k < keep; ++k) {
      const auto& c = candidates[k];
      Hypothesis hyp = live[c.parent].hyp;
      hyp.log_prob = c.score;
      if (c.token == kEosId) {
        hyp.finished = true;
        finished.push_back(std::move(hyp));
      } else {
        hyp.tokens.push_back(c.token);
        next_live.push_back({std::move(hyp), successors[c.parent]});
      }
    }
    live = std::move(next_live);
  }

  BeamResult result;
  if (!finished.empty()) {
    result.pool = std::move(finished);
  } else {
    for (auto& l : live) result.pool.push_back(std::move(l.hyp));
  }
  result.best = result.pool[best_normalized(result.pool)];
  return result;
}

/// Beam decoding of one source sentence with the default length cap.
template <typename T>
BeamResult translate(const Model<T>& model, const std::vector<TokenId>& source, std::size_t beam,
                     std::size_t max_len = 0) {
  ModelScorer<T> scorer(model, source);
  BeamOptions opt;
  opt.beam = beam;
  opt.max_len = max_len ? max_len : default_max_len(source.size());
  return beam_search(scorer, opt);
}

}  // namespace mce

#endif  // MCE_BEAM_SEARCH_HPP_
