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

#ifndef MCE_EVALUATION_HPP_
#define MCE_EVALUATION_HPP_

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <functional>
#include <iomanip>
#include <numeric>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mce/beam_search.hpp"
#include "mce/bleu.hpp"
#include "mce/training.hpp"

namespace mce {

struct Decoded {
  std::vector<Sentence> hypotheses;
  std::vector<double> scores;  // length-normalized log-probabilities
};

/// Beam-decodes every source sentence (0 for max_len means the default cap).
template <typename T>
Decoded decode_corpus(const Model<T>& model, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab,
                      const std::vector<Sentence>& sources, std::size_t beam, std::size_t max_len = 0) {
  Decoded out;
  out.hypotheses.reserve(sources.size());
  for (const auto& s : sources) {
    if (s.empty()) {
      out.hypotheses.emplace_back();
      out.scores.push_back(0.0);
      continue;
    }
    const auto r = translate(model, src_vocab.numericalize(s), beam, max_len);
    out.hypotheses.push_back(tgt_vocab.denumericalize(r.best.tokens));
    out.scores.push_back(r.best.normalized());
  }
  return out;
}

struct TestMetrics {
  double bleu = 0;
  double token_accuracy = 0;
  double sequence_accuracy = 0;
};

inline TestMetrics score_corpus(const std::vector<Sentence>& hypotheses, const std::vector<Sentence>& references) {
  return {bleu(hypotheses, references).bleu, token_accuracy(hypotheses, references),
          sequence_accuracy(hypotheses, references)};
}

inline double median(std::vector<double> v) {
  if (v.empty()) throw Error("median of nothing");
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// ---------------------------------------------------------------------------
// Synthetic-task experiments
// ---------------------------------------------------------------------------

struct TaskSpec {
  SyntheticTask task = SyntheticTask::kCopy;
  std::size_t vocab = 20;
  std::size_t min_len = 3;
  std::size_t max_len = 10;
  std::size_t train_pairs = 1000;
  std::size_t test_pairs = 100;
};

struct TaskData {
  std::vector<SentencePair> train, test;
  Vocabulary src_vocab, tgt_vocab;
};

/// Train and test sets drawn from independent streams of `seed`.
inline TaskData make_task_data(const TaskSpec& spec, std::uint64_t seed) {
  TaskData d;
  Rng train_rng = Rng::derive(seed ^ 0x5452414EULL, 0);
  Rng test_rng = Rng::derive(seed ^ 0x54455354ULL, 0);
  d.train = generate_task(spec.task, spec.train_pairs, spec.vocab, spec.min_len, spec.max_len, train_rng);
  d.test = generate_task(spec.task, spec.test_pairs, spec.vocab, spec.min_len, spec.max_len, test_rng);
  d.src_vocab = build_vocab(sources_of(d.train), spec.vocab + kNumReserved);
  d.tgt_vocab = build_vocab(targets_of(d.train), spec.vocab + kNumReserved);
  return d;
}

struct ExperimentSettings {
  ChannelConfig channels;  // system flags are overwritten per row in the ablation
  InitState init_state = InitState::kMeanAnnotation;
  double dropout = 0.5;
  double init_range = 0.04;
  TrainConfig train;  // seed is overwritten per run
  std::size_t beam = 10;
};

struct RunOutcome {
  std::uint64_t seed = 0;
  bool ok = false;
  std::string error;
  TestMetrics metrics;
  double final_train_loss = 0;
  double seconds = 0;
};

/// Trains one system on one seed's data and scores the test split.
template <typename T = double>
RunOutcome run_experiment(const TaskData& data, const ExperimentSettings& s, std::uint64_t seed) {
  RunOutcome out;
  out.seed = seed;
  const auto start = std::chrono::steady_clock::now();
  try {
    ModelConfig mc;
    mc.channels = s.channels;
    mc.src_vocab = data.src_vocab.size();
    mc.tgt_vocab = data.tgt_vocab.size();
    mc.init_state = s.init_state;
    mc.dropout = s.dropout;
    mc.init_range = s.init_range;
    TrainConfig tc = s.train;
    tc.seed = seed;
    auto fitted = fit<T>(data.train, data.src_vocab, data.tgt_vocab, mc, tc);
    out.final_train_loss = fitted.epochs.empty() ? 0.0 : fitted.epochs.back().mean_loss;
    const auto decoded = decode_corpus(fitted.model, data.src_vocab, data.tgt_vocab, sources_of(data.test), s.beam);
    out.metrics = score_corpus(decoded.hypotheses, targets_of(data.test));
    out.ok = true;
  } catch (const std::exception& e) {
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return out;
}

struct AblationRow {
  std::string system;
  std::size_t parameters = 0;
  std::vector<RunOutcome> runs;  // one per seed
  bool ok = false;               // every run succeeded
  double median_token_accuracy = 0, median_bleu = 0;
  double mean_token_accuracy = 0, mean_bleu = 0;
  double delta_token_accuracy = 0, delta_bleu = 0;  // medians minus the baseline's
};

struct AblationReport {
  std::string task;
  std::string baseline = "RNN";
  std::vector<std::uint64_t> seeds;
  std::vector<AblationRow> rows;

  const AblationRow& row(const std::string& system) const {
    for (const auto& r : rows) {
      if (r.system == system) return r;
    }
    throw Error("ablation report has no row '" + system + "'");
  }
};

inline std::size_t system_parameter_count(ChannelConfig channels, const std::string& system, std::size_t src_vocab,
                                          std::size_t tgt_vocab) {
  channels.set_system(system);
  ModelConfig mc;
  mc.channels = channels;
  mc.src_vocab = src_vocab;
  mc.tgt_vocab = tgt_vocab;
  return parameter_count(Model<double>(mc, 0).params());
}

/// Trains each listed system on every seed with identical data and budget.
/// A failing run is recorded in its row; the suite carries on.
inline AblationReport ablation_suite(const TaskSpec& spec, const ExperimentSettings& settings,
                                     const std::vector<std::uint64_t>& seeds,
                                     std::vector<std::string> systems = ChannelConfig::all_systems(),
                                     std::ostream* log = nullptr) {
  if (seeds.empty()) throw Error("ablation_suite: no seeds");
  AblationReport report;
  report.task = spec.task == SyntheticTask::kCopy ? "copy" : "reverse";
  report.seeds = seeds;
  std::vector<TaskData> data;
  for (auto seed : seeds) data.push_back(make_task_data(spec, seed));

  for (const auto& system : systems) {
    AblationRow row;
    row.system = system;
    ExperimentSettings s = settings;
    s.channels.set_system(system);
    try {
      row.parameters = system_parameter_count(s.channels, system, data[0].src_vocab.size(), data[0].tgt_vocab.size());
    } catch (const std::exception& e) {
      RunOutcome failed;
      failed.error = e.what();
      row.runs.assign(seeds.size(), failed);
      report.rows.push_back(row);
      continue;
    }
    for (std::size_t k = 0; k < seeds.size(); ++k) {
      row.runs.push_back(run_experiment(data[k], s, seeds[k]));
      if (log != nullptr) {
        const auto& r = row.runs.back();
        *log << system << " seed " << seeds[k] << ": "
             << (r.ok ? "token_acc " + std::to_string(r.metrics.token_accuracy) + " bleu " +
                            std::to_string(r.metrics.bleu)
                      : "FAILED " + r.error)
             << " (" << std::fixed << std::setprecision(1) << r.seconds << "s)" << std::defaultfloat
             << std::endl;
      }
    }
    row.ok = std::all_of(row.runs.begin(), row.runs.end(), [](const RunOutcome& r) { return r.ok; });
    if (row.ok) {
      std::vector<double> acc, bl;
      for (const auto& r : row.runs) {
        acc.push_back(r.metrics.token_accuracy);
        bl.push_back(r.metrics.bleu);
      }
      row.median_token_accuracy = median(acc);
      row.median_bleu = median(bl);
      row.mean_token_accuracy = std::accumulate(acc.begin(), acc.end(), 0.0) / static_cast<double>(acc.size());
      row.mean_bleu = std::accumulate(bl.begin(), bl.end(), 0.0) / static_cast<double>(bl.size());
    }
    report.rows.push_back(std::move(row));
  }
  for (auto& row : report.rows) {
    for (const auto& base : report.rows) {
      if (base.system == report.baseline && base.ok && row.ok) {
        row.delta_token_accuracy = row.median_token_accuracy - base.median_token_accuracy;
        row.delta_bleu = row.median_bleu - base.median_bleu;
      }
    }
  }
  return report;
}

inline std::string ablation_csv(const AblationReport& r) {
  std::ostringstream os;
  os << "system,parameters,status";
  for (auto seed : r.seeds) os << ",token_acc_seed" << seed << ",bleu_seed" << seed;
  os << ",median_token_acc,median_bleu,mean_token_acc,mean_bleu,delta_token_acc,delta_bleu\n";
  os << std::setprecision(6);
  for (const auto& row : r.rows) {
    os << row.system << ',' << row.parameters << ',' << (row.ok ? "ok" : "failed");
    for (const auto& run : row.runs) {
      if (run.ok) {
        os << ',' << run.metrics.token_accuracy << ',' << run.metrics.bleu;
      } else {
        os << ",,";
      }
    }
    if (row.ok) {
      os << ',' << row.median_token_accuracy << ',' << row.median_bleu << ',' << row.mean_token_accuracy << ','
         << row.mean_bleu << ',' << row.delta_token_accuracy << ',' << row.delta_bleu;
    } else {
      os << ",,,,,,";
    }
    os << '\n';
  }
  return os.str();
}

inline std::string ablation_table(const AblationReport& r) {
  std::ostringstream os;
  char line[256];
  std::snprintf(line, sizeof(line), "%-12s %10s %10s %8s %10s %8s\n", "system", "params", "token_acc", "bleu",
                "d_tok_acc", "d_bleu");
  os << "task: " << r.task << ", seeds:";
  for (auto s : r.seeds) os << ' ' << s;
  os << ", medians, deltas vs " << r.baseline << "\n" << line;
  for (const auto& row : r.rows) {
    if (row.ok) {
      std::snprintf(line, sizeof(line), "%-12s %10zu %10.4f %8.2f %+10.4f %+8.2f\n", row.system.c_str(),
                    row.parameters, row.median_token_accuracy, row.median_bleu, row.delta_token_accuracy,
                    row.delta_bleu);
      os << line;
    } else {
      std::string why;
      for (const auto& run : row.runs) {
        if (!run.ok) {
          why = run.error;
          break;
        }
      }
      std::snprintf(line, sizeof(line), "%-12s %10zu   FAILED: ", row.system.c_str(), row.parameters);
      os << line << why << '\n';
    }
  }
  return os.str();
}

}  // namespace mce

#endif  // MCE_EVALUATION_HPP_
