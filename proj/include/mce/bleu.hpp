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

#ifndef MCE_BLEU_HPP_
#define MCE_BLEU_HPP_

#include <algorithm>
#include <cctype>
#include <cmath>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mce/vocabulary.hpp"

namespace mce {

/// Corpus-level BLEU with multi-bleu semantics: clipped n-gram counts summed
/// over the corpus, no smoothing, BP = min(1, exp(1 - ref_len / hyp_len)).
struct BleuReport {
  double bleu = 0;                 // 0..100
  std::vector<double> precisions;  // p_1..p_max_n
  std::vector<std::size_t> matches, totals;
  double brevity_penalty = 0;
  std::size_t hyp_length = 0;
  std::size_t ref_length = 0;
  std::size_t sentences = 0;
};

namespace bleu_detail {

inline Sentence lower(const Sentence& s) {
  Sentence out = s;
  for (auto& tok : out) {
    for (auto& ch : tok) ch = static_cast<char>(std::tolower(static_cast<unsigned char>(ch)));
  }
  return out;
}

inline std::map<std::vector<std::string>, std::size_t> ngram_counts(const Sentence& s, std::size_t n) {
  std::map<std::vector<std::string>, std::size_t> counts;
  if (s.size() < n) return counts;
  for (std::size_t i = 0; i + n <= s.size(); ++i) {
    ++counts[std::vector<std::string>(s.begin() + static_cast<std::ptrdiff_t>(i),
                                      s.begin() + static_cast<std::ptrdiff_t>(i + n))];
  }
  return counts;
}

}  // namespace bleu_detail

inline BleuReport bleu(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references,
                       std::size_t max_n = 4, bool lowercase = false) {
  if (hypotheses.size() != references.size()) {
    throw Error("bleu: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                std::to_string(references.size()) + " references");
  }
  if (hypotheses.empty()) throw Error("bleu: empty corpus");
  if (max_n < 1) throw Error("bleu: max_n must be at least 1");
  BleuReport r;
  r.sentences = hypotheses.size();
  r.matches.assign(max_n, 0);
  r.totals.assign(max_n, 0);
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const Sentence hyp = lowercase ? bleu_detail::lower(hypotheses[i]) : hypotheses[i];
    const Sentence ref = lowercase ? bleu_detail::lower(references[i]) : references[i];
    r.hyp_length += hyp.size();
    r.ref_length += ref.size();
    for (std::size_t n = 1; n <= max_n; ++n) {
      const auto hyp_counts = bleu_detail::ngram_counts(hyp, n);
      const auto ref_counts = bleu_detail::ngram_counts(ref, n);
      for (const auto& [gram, count] : hyp_counts) {
        auto it = ref_counts.find(gram);
        r.matches[n - 1] += std::min(count, it == ref_counts.end() ? std::size_t{0} : it->second);
        r.totals[n - 1] += count;
      }
    }
  }
  double log_sum = 0;
  bool zero = false;
  r.precisions.resize(max_n);
  for (std::size_t n = 0; n < max_n; ++n) {
    r.precisions[n] = r.totals[n] ? static_cast<double>(r.matches[n]) / static_cast<double>(r.totals[n]) : 0.0;
    if (r.precisions[n] == 0) {
      zero = true;
    } else {
      log_sum += std::log(r.precisions[n]) / static_cast<double>(max_n);
    }
  }
  if (r.hyp_length == 0) {
    r.brevity_penalty = 0;
  } else if (r.hyp_length < r.ref_length) {
    r.brevity_penalty = std::exp(1.0 - static_cast<double>(r.ref_length) / static_cast<double>(r.hyp_length));
  } else {
    r.brevity_penalty = 1;
  }
  r.bleu = zero ? 0.0 : 100.0 * r.brevity_penalty * std::exp(log_sum);
  return r;
}

struct BucketRow {
  std::size_t threshold = 0;  // bucket holds sentences with source length > threshold
  std::size_t sentences = 0;
  std::optional<BleuReport> report;  // absent for an empty bucket

  bool empty() const { return !report.has_value(); }
};

inline std::vector<std::size_t> default_bucket_thresholds() { return {10, 20, 30, 40, 50, 60}; }

/// BLEU over the pairs whose source is longer than each threshold.
inline std::vector<BucketRow> length_bucket_report(const std::vector<std::size_t>& source_lengths,
                                                   const std::vector<Sentence>& hypotheses,
                                                   const std::vector<Sentence>& references,
                                                   const std::vector<std::size_t>& thresholds =
                                                       default_bucket_thresholds(),
                                                   bool lowercase = false) {
  if (source_lengths.size() != hypotheses.size() || hypotheses.size() != references.size()) {
    throw Error("length_bucket_report: sources, hypotheses and references differ in count");
  }
  if (!std::is_sorted(thresholds.begin(), thresholds.end()) ||
      std::adjacent_find(thresholds.begin(), thresholds.end()) != thresholds.end()) {
    throw Error("length_bucket_report: thresholds must be strictly ascending");
  }
  std::vector<BucketRow> rows;
  for (std::size_t threshold : thresholds) {
    BucketRow row;
    row.threshold = threshold;
    std::vector<Sentence> h, r;
    for (std::size_t i = 0; i < hypotheses.size(); ++i) {
      if (source_lengths[i] > threshold) {
        h.push_back(hypotheses[i]);
        r.push_back(references[i]);
      }
    }
    row.sentences = h.size();
    if (!h.empty()) row.report = bleu(h, r, 4, lowercase);
    rows.push_back(std::move(row));
  }
  return rows;
}

/// Positional token matches over the longer of each pair, summed over the
/// corpus: sum_i #{t : h_i[t] == r_i[t]} / sum_i max(|h_i|, |r_i|).
inline double token_accuracy(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size()) throw Error("token_accuracy: line counts differ");
  std::size_t matches = 0, total = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) {
    const auto& h = hypotheses[i];
    const auto& r = references[i];
    for (std::size_t t = 0; t < std::min(h.size(), r.size()); ++t) matches += h[t] == r[t];
    total += std::max(h.size(), r.size());
  }
  return total ? static_cast<double>(matches) / static_cast<double>(total) : 1.0;
}

inline double sequence_accuracy(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  if (hypotheses.size() != references.size()) throw Error("sequence_accuracy: line counts differ");
  if (hypotheses.empty()) return 1.0;
  std::size_t exact = 0;
  for (std::size_t i = 0; i < hypotheses.size(); ++i) exact += hypotheses[i] == references[i];
  return static_cast<double>(exact) / static_cast<double>(hypotheses.size());
}

}  // namespace mce

#endif  // MCE_BLEU_HPP_
