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

#ifndef MCE_CORPUS_HPP_
#define MCE_CORPUS_HPP_

#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

#include "mce/rng.hpp"
#include "mce/vocabulary.hpp"

namespace mce {

struct SentencePair {
  Sentence source;
  Sentence target;
  bool operator==(const SentencePair&) const = default;
};

/// Row-major integer matrix used for padded ids and 0/1 masks.
struct IdMatrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<TokenId> data;

  IdMatrix() = default;
  IdMatrix(std::size_t r, std::size_t c, TokenId fill) : rows(r), cols(c), data(r * c, fill) {}

  TokenId& at(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  TokenId at(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  std::vector<TokenId> row_prefix(std::size_t r, std::size_t len) const {
    return std::vector<TokenId>(data.begin() + static_cast<std::ptrdiff_t>(r * cols),
                                data.begin() + static_cast<std::ptrdiff_t>(r * cols + len));
  }

  std::int64_t sum() const { return std::accumulate(data.begin(), data.end(), std::int64_t{0}); }
};

/// mask(i, t) == 1 iff t < length_i; padded slots hold PAD. Target rows end
/// with EOS before padding.
struct ParallelBatch {
  IdMatrix source_ids, source_mask;
  IdMatrix target_ids, target_mask;
  std::vector<std::size_t> source_lengths, target_lengths;

  std::size_t size() const { return source_lengths.size(); }

  std::vector<TokenId> source(std::size_t i) const {
    return source_ids.row_prefix(i, source_lengths[i]);
  }
  /// Includes the trailing EOS.
  std::vector<TokenId> target(std::size_t i) const {
    return target_ids.row_prefix(i, target_lengths[i]);
  }
};

/// Keeps a pair iff both sides have at most `max_len` tokens.
inline std::vector<SentencePair> filter_pairs(const std::vector<SentencePair>& pairs,
                                              std::size_t max_len) {
  if (max_len < 1) throw Error("filter_pairs: max_len must be at least 1");
  std::vector<SentencePair> kept;
  for (const auto& p : pairs) {
    if (p.source.size() <= max_len && p.target.size() <= max_len) kept.push_back(p);
  }
  return kept;
}

/// Numericalizes (OOV substitution), appends EOS to targets, pads and masks.
/// Pair order is shuffled by `rng`; the final short batch is kept.
inline std::vector<ParallelBatch> make_batches(const std::vector<SentencePair>& pairs,
                                               const Vocabulary& src_vocab,
                                               const Vocabulary& tgt_vocab,
                                               std::size_t batch_size, Rng& rng,
                                               bool shuffle = true) {
  if (batch_size < 1) throw Error("make_batches: batch_size must be at least 1");
  if (pairs.empty()) throw Error("make_batches: no sentence pairs");
  std::vector<std::size_t> order(pairs.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  if (shuffle) rng.shuffle(order);

  std::vector<ParallelBatch> batches;
  for (std::size_t start = 0; start < order.size(); start += batch_size) {
    const std::size_t count = std::min(batch_size, order.size() - start);
    std::vector<std::vector<TokenId>> srcs, tgts;
    std::size_t src_width = 1, tgt_width = 1;
    for (std::size_t k = 0; k < count; ++k) {
      const auto& p = pairs[order[start + k]];
      if (p.source.empty()) throw Error("make_batches: empty source sentence");
      srcs.push_back(src_vocab.numericalize(p.source));
      auto t = tgt_vocab.numericalize(p.target);
      t.push_back(kEosId);
      tgts.push_back(std::move(t));
      src_width = std::max(src_width, srcs.back().size());
      tgt_width = std::max(tgt_width, tgts.back().size());
    }
    ParallelBatch b;
    b.source_ids = IdMatrix(count, src_width, kPadId);
    b.source_mask = IdMatrix(count, src_width, 0);
    b.target_ids = IdMatrix(count, tgt_width, kPadId);
    b.target_mask = IdMatrix(count, tgt_width, 0);
    for (std::size_t k = 0; k < count; ++k) {
      for (std::size_t t = 0; t < srcs[k].size(); ++t) {
        b.source_ids.at(k, t) = srcs[k][t];
        b.source_mask.at(k, t) = 1;
      }
      for (std::size_t t = 0; t < tgts[k].size(); ++t) {
        b.target_ids.at(k, t) = tgts[k][t];
        b.target_mask.at(k, t) = 1;
      }
      b.source_lengths.push_back(srcs[k].size());
      b.target_lengths.push_back(tgts[k].size());
    }
    batches.push_back(std::move(b));
  }
  return batches;
}

inline std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  return lines;
}

inline void write_lines(const std::string& path, const std::vector<std::string>& lines) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  for (const auto& l : lines) out << l << '\n';
}

/// Reads two line-aligned files. Pairs with an empty side are skipped.
inline std::vector<SentencePair> read_parallel(const std::string& src_path,
                                               const std::string& tgt_path) {
  const auto src = read_lines(src_path);
  const auto tgt = read_lines(tgt_path);
  if (src.size() != tgt.size()) {
    throw Error("parallel files differ in line count: " + src_path + " (" +
                std::to_string(src.size()) + ") vs " + tgt_path + " (" + std::to_string(tgt.size()) +
                ")");
  }
  std::vector<SentencePair> pairs;
  for (std::size_t i = 0; i < src.size(); ++i) {
    SentencePair p{tokenize(src[i]), tokenize(tgt[i])};
    if (p.source.empty() || p.target.empty()) continue;
    pairs.push_back(std::move(p));
  }
  return pairs;
}

inline void write_parallel(const std::vector<SentencePair>& pairs, const std::string& src_path,
                           const std::string& tgt_path) {
  std::vector<std::string> src, tgt;
  for (const auto& p : pairs) {
    src.push_back(join(p.source));
    tgt.push_back(join(p.target));
  }
  write_lines(src_path, src);
  write_lines(tgt_path, tgt);
}

inline std::vector<Sentence> sources_of(const std::vector<SentencePair>& pairs) {
  std::vector<Sentence> out;
  for (const auto& p : pairs) out.push_back(p.source);
  return out;
}

inline std::vector<Sentence> targets_of(const std::vector<SentencePair>& pairs) {
  std::vector<Sentence> out;
  for (const auto& p : pairs) out.push_back(p.target);
  return out;
}

// Synthetic tasks used by the acceptance runs and the ablation harness.

enum class SyntheticTask { kCopy, kReverse };

inline SyntheticTask parse_task(const std::string& name) {
  if (name == "copy") return SyntheticTask::kCopy;
  if (name == "reverse") return SyntheticTask::kReverse;
  throw Error("unknown task '" + name + "' (expected copy or reverse)");
}

/// Tokens are "w0".."w{vocab-1}"; lengths uniform in [min_len, max_len].
inline std::vector<SentencePair> generate_task(SyntheticTask task, std::size_t count,
                                               std::size_t vocab, std::size_t min_len,
                                               std::size_t max_len, Rng& rng) {
  if (vocab < 1 || min_len < 1 || max_len < min_len) throw Error("invalid synthetic task shape");
  std::vector<SentencePair> pairs;
  pairs.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::size_t len = min_len + rng.uniform_int(max_len - min_len + 1);
    Sentence src;
    for (std::size_t t = 0; t < len; ++t) src.push_back("w" + std::to_string(rng.uniform_int(vocab)));
    Sentence tgt = src;
    if (task == SyntheticTask::kReverse) std::reverse(tgt.begin(), tgt.end());
    pairs.push_back({std::move(src), std::move(tgt)});
  }
  return pairs;
}

}  // namespace mce

#endif  // MCE_CORPUS_HPP_
