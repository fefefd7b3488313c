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

#ifndef MCE_VOCABULARY_HPP_
#define MCE_VOCABULARY_HPP_

#include <algorithm>
#include <cstdint>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "mce/tensor.hpp"

namespace mce {

using TokenId = std::int32_t;
using Sentence = std::vector<std::string>;

inline constexpr TokenId kPadId = 0;
inline constexpr TokenId kBosId = 1;
inline constexpr TokenId kEosId = 2;
inline constexpr TokenId kOovId = 3;
inline constexpr std::size_t kNumReserved = 4;

inline constexpr std::string_view kPadToken = "<pad>";
inline constexpr std::string_view kBosToken = "<s>";
inline constexpr std::string_view kEosToken = "</s>";
inline constexpr std::string_view kOovToken = "OOV";

/// Whitespace tokenizer; input text is expected to be pre-tokenized.
inline Sentence tokenize(std::string_view line) {
  Sentence out;
  std::istringstream is{std::string(line)};
  std::string tok;
  while (is >> tok) out.push_back(tok);
  return out;
}

inline std::string join(const Sentence& tokens) {
  std::string out;
  for (std::size_t i = 0; i < tokens.size(); ++i) {
    if (i) out += ' ';
    out += tokens[i];
  }
  return out;
}

/// Frequency-ranked token <-> id map. Ids 0..3 are PAD, BOS, EOS, OOV;
/// immutable once built.
class Vocabulary {
 public:
  Vocabulary() : Vocabulary(std::vector<std::string>{}) {}

  /// Builds from an explicit corpus-token list (reserved tokens are prepended).
  explicit Vocabulary(const std::vector<std::string>& corpus_tokens) {
    tokens_ = {std::string(kPadToken), std::string(kBosToken), std::string(kEosToken),
               std::string(kOovToken)};
    for (const auto& t : corpus_tokens) {
      if (is_reserved(t)) throw Error("reserved token '" + t + "' in vocabulary body");
      tokens_.push_back(t);
    }
    for (std::size_t i = 0; i < tokens_.size(); ++i) {
      if (!index_.emplace(tokens_[i], static_cast<TokenId>(i)).second) {
        throw Error("duplicate vocabulary token '" + tokens_[i] + "'");
      }
    }
  }

  static bool is_reserved(std::string_view t) {
    return t == kPadToken || t == kBosToken || t == kEosToken || t == kOovToken;
  }

  std::size_t size() const { return tokens_.size(); }

  TokenId lookup(std::string_view token) const {
    auto it = index_.find(std::string(token));
    return it == index_.end() ? kOovId : it->second;
  }

  const std::string& render(TokenId id) const {
    if (id < 0 || static_cast<std::size_t>(id) >= tokens_.size()) {
      throw Error("token id " + std::to_string(id) + " out of range");
    }
    return tokens_[static_cast<std::size_t>(id)];
  }

  std::vector<TokenId> numericalize(const Sentence& sentence) const {
    std::vector<TokenId> ids;
    ids.reserve(sentence.size());
    for (const auto& tok : sentence) ids.push_back(lookup(tok));
    return ids;
  }

  /// Stops at the first EOS; PAD and BOS are dropped.
  Sentence denumericalize(const std::vector<TokenId>& ids) const {
    Sentence out;
    for (TokenId id : ids) {
      if (id == kEosId) break;
      if (id == kPadId || id == kBosId) continue;
      out.push_back(render(id));
    }
    return out;
  }

  const std::vector<std::string>& tokens() const { return tokens_; }

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

  /// One token per line; line number is the id.
  void save(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw Error("cannot write vocabulary file " + path);
    for (const auto& t : tokens_) out << t << '\n';
  }

  static Vocabulary load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot read vocabulary file " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) lines.push_back(line);
    return from_token_list(lines);
  }

  /// Inverse of `tokens()`: expects the reserved tokens in their fixed slots.
  static Vocabulary from_token_list(const std::vector<std::string>& all) {
    if (all.size() < kNumReserved || all[0] != kPadToken || all[1] != kBosToken ||
        all[2] != kEosToken || all[3] != kOovToken) {
      throw Error("vocabulary list does not start with the reserved tokens");
    }
    return Vocabulary(std::vector<std::string>(all.begin() + kNumReserved, all.end()));
  }

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, TokenId> index_;
};

/// Reserved tokens plus the (max_size - 4) most frequent corpus tokens;
/// ties are broken lexicographically.
inline Vocabulary build_vocab(const std::vector<Sentence>& corpus, std::size_t max_size = 30000) {
  if (max_size < kNumReserved) throw Error("vocabulary max_size must be at least 4");
  std::map<std::string, std::size_t> counts;
  std::size_t total = 0;
  for (const auto& sentence : corpus) {
    for (const auto& tok : sentence) {
      if (Vocabulary::is_reserved(tok)) continue;
      ++counts[tok];
      ++total;
    }
  }
  if (total == 0) throw Error("cannot build a vocabulary from an empty corpus");
  std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
  std::stable_sort(ranked.begin(), ranked.end(),
                   [](const auto& a, const auto& b) { return a.second > b.second; });
  const std::size_t keep = std::min(ranked.size(), max_size - kNumReserved);
  std::vector<std::string> kept;
  kept.reserve(keep);
  for (std::size_t i = 0; i < keep; ++i) kept.push_back(ranked[i].first);
  return Vocabulary(kept);
}

}  // namespace mce

#endif  // MCE_VOCABULARY_HPP_
