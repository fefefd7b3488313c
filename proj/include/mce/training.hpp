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

#ifndef MCE_TRAINING_HPP_
#define MCE_TRAINING_HPP_

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "mce/checkpoint.hpp"
#include "mce/corpus.hpp"
#include "mce/model.hpp"
#include "mce/optimizer.hpp"

namespace mce {

/// Raised when the loss or a gradient turns non-finite. Names the most
/// recent checkpoint written before the failure ("" if none).
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::string last_good)
      : Error(what + (last_good.empty() ? std::string(" (no checkpoint written yet)")
                                        : " (last good checkpoint: " + last_good + ")")),
        last_good_(std::move(last_good)) {}
  const std::string& last_good_checkpoint() const { return last_good_; }

 private:
  std::string last_good_;
};

struct TrainConfig {
  std::size_t epochs = 10;
  std::size_t batch_size = 16;
  double warmup = 6000;
  double num_gpus = 1;
  double clip = 1.0;
  std::size_t checkpoint_every = 500;
  std::uint64_t seed = 1;
  std::uint64_t max_steps = 0;  // stop early once this many updates are done; 0 = no cap
  std::string output_dir;       // checkpoints and loss trace; empty = nothing written
  std::ostream* log = nullptr;
};

inline constexpr const char* kLastCheckpoint = "checkpoint_last.bin";
inline constexpr const char* kBestCheckpoint = "checkpoint_best.bin";
inline constexpr const char* kLossTrace = "loss_trace.csv";

struct TraceRow {
  std::uint64_t step = 0;
  double lrate = 0;
  double loss = 0;
  double tokens_per_sec = 0;
};

struct EpochSummary {
  std::size_t epoch = 0;  // 1-based
  std::uint64_t last_step = 0;
  double mean_loss = 0;
  double token_accuracy = 0;
};

template <typename T>
struct FitResult {
  Model<T> model;
  AdamState<ModelParams<T>> optimizer;
  std::vector<TraceRow> trace;
  std::vector<EpochSummary> epochs;
  TrainingMeta meta;
  std::string last_checkpoint, best_checkpoint;
};

// Independent random streams, all derived from the master seed.
inline std::uint64_t init_seed(std::uint64_t seed) { return Rng::derive(seed, 0x494E4954).next_u64(); }
inline Rng shuffle_rng(std::uint64_t seed, std::size_t epoch) {
  return Rng::derive(seed ^ 0x5348554646ULL, epoch);
}
inline Rng dropout_rng(std::uint64_t seed, std::uint64_t step) {
  return Rng::derive(seed ^ 0x44524F50ULL, step);
}

inline std::string format_trace_row(const TraceRow& r) {
  std::ostringstream os;
  os << r.step << ',' << std::setprecision(17) << r.lrate << ',' << r.loss << ',' << std::setprecision(6)
     << r.tokens_per_sec;
  return os.str();
}

inline std::vector<TraceRow> parse_trace_csv(const std::string& path) {
  std::vector<TraceRow> rows;
  std::ifstream in(path);
  if (!in) return rows;
  std::string line;
  std::getline(in, line);  // header
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    TraceRow r;
    char comma = 0;
    std::istringstream ls(line);
    ls >> r.step >> comma >> r.lrate >> comma >> r.loss >> comma >> r.tokens_per_sec;
    if (!ls) throw Error("malformed loss trace line in " + path + ": " + line);
    rows.push_back(r);
  }
  return rows;
}

namespace train_detail {

/// Rewrites the trace so it holds exactly the rows up to `keep_through`.
inline void reset_trace(const std::string& path, std::uint64_t keep_through) {
  std::vector<std::string> kept;
  {
    std::ifstream in(path);
    std::string line;
    if (in && std::getline(in, line)) {
      while (std::getline(in, line)) {
        if (line.empty()) continue;
        if (std::stoull(line.substr(0, line.find(','))) <= keep_through) kept.push_back(line);
      }
    }
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write loss trace " + path);
  out << "step,lrate,loss,tokens_per_sec\n";
  for (const auto& l : kept) out << l << '\n';
}

}  // namespace train_detail

/// Teacher-forced training with Adam, the warmup schedule, global-norm
/// clipping and readout dropout. Every random choice derives from
/// `tc.seed` and the step or epoch index, so a run resumed from a
/// checkpoint replays the uninterrupted run exactly.
template <typename T>
FitResult<T> fit(const std::vector<SentencePair>& pairs, const Vocabulary& src_vocab,
                 const Vocabulary& tgt_vocab, const ModelConfig& model_config, const TrainConfig& tc,
                 const Checkpoint<T>* resume = nullptr) {
  model_config.validate();
  if (pairs.empty()) throw Error("fit: empty training corpus");
  if (tc.batch_size < 1) throw Error("fit: batch_size must be at least 1");
  if (tc.checkpoint_every < 1) throw Error("fit: checkpoint_every must be at least 1");
  if (src_vocab.size() != model_config.src_vocab || tgt_vocab.size() != model_config.tgt_vocab) {
    throw Error("fit: vocabulary sizes disagree with the model config");
  }

  AdamConfig adam;
  adam.warmup = tc.warmup;
  adam.num_gpus = tc.num_gpus;
  adam.model_dim = static_cast<double>(model_config.channels.hidden_dim);

  std::optional<Model<T>> model;
  AdamState<ModelParams<T>> optimizer;
  TrainingMeta meta;
  meta.seed = tc.seed;
  meta.batch_size = tc.batch_size;
  std::uint64_t step = 0;
  if (resume != nullptr) {
    if (config_fingerprint(resume->model) != config_fingerprint(model_config)) {
      throw Error("fit: checkpoint was written for a different model config");
    }
    if (!resume->optimizer) throw Error("fit: checkpoint has no optimizer state to resume from");
    if (resume->training.seed != tc.seed || resume->training.batch_size != tc.batch_size) {
      throw Error("fit: resume requires the checkpoint's seed and batch_size");
    }
    if (resume->src_vocab.tokens() != src_vocab.tokens() || resume->tgt_vocab.tokens() != tgt_vocab.tokens()) {
      throw Error("fit: checkpoint vocabularies differ from the training vocabularies");
    }
    model.emplace(model_config, resume->params);
    optimizer = *resume->optimizer;
    optimizer.config = adam;
    step = optimizer.step;
    meta = resume->training;
  } else {
    model.emplace(model_config, init_seed(tc.seed));
    optimizer = AdamState<ModelParams<T>>(adam, model->params());
  }

  const std::size_t batches_per_epoch = (pairs.size() + tc.batch_size - 1) / tc.batch_size;
  const std::uint64_t schedule_end = static_cast<std::uint64_t>(tc.epochs) * batches_per_epoch;
  std::uint64_t total_steps = schedule_end;
  if (tc.max_steps > 0) total_steps = std::min<std::uint64_t>(total_steps, tc.max_steps);

  const bool persist = !tc.output_dir.empty();
  const std::filesystem::path dir(tc.output_dir);
  std::string last_path, best_path;
  std::ofstream trace_out;
  if (persist) {
    std::filesystem::create_directories(dir);
    const std::string trace_path = (dir / kLossTrace).string();
    train_detail::reset_trace(trace_path, step);
    trace_out.open(trace_path, std::ios::app);
    if (resume != nullptr) {
      if (std::filesystem::exists(dir / kLastCheckpoint)) last_path = (dir / kLastCheckpoint).string();
      if (std::filesystem::exists(dir / kBestCheckpoint)) best_path = (dir / kBestCheckpoint).string();
    }
  }

  auto snapshot = [&]() {
    Checkpoint<T> c;
    c.model = model_config;
    c.step = step;
    c.training = meta;
    c.src_vocab = src_vocab;
    c.tgt_vocab = tgt_vocab;
    c.params = model->params();
    c.optimizer = optimizer;
    return c;
  };

  FitResult<T> result{*model, optimizer, {}, {}, meta, last_path, best_path};
  std::vector<ParallelBatch> batches;
  std::size_t batches_epoch = std::numeric_limits<std::size_t>::max();
  double epoch_loss = 0;
  std::size_t epoch_steps = 0, epoch_tokens = 0, epoch_correct = 0;

  while (step < total_steps) {
    const std::size_t epoch = static_cast<std::size_t>(step / batches_per_epoch);
    if (epoch != batches_epoch) {
      Rng order = shuffle_rng(tc.seed, epoch);
      batches = make_batches(pairs, src_vocab, tgt_vocab, tc.batch_size, order, true);
      batches_epoch = epoch;
    }
    const auto& batch = batches[step % batches_per_epoch];
    const auto start = std::chrono::steady_clock::now();

    auto grads = zeros_like_params(model->params());
    Rng drop = dropout_rng(tc.seed, step + 1);
    LossStats stats;
    double lr = 0;
    try {
      stats = model->batch_loss(batch, &grads, &drop);
      if (!std::isfinite(stats.loss)) throw NonFiniteError("non-finite loss");
      clip_global_norm(grads, tc.clip);
      lr = adam_step(model->params(), grads, optimizer);
    } catch (const NonFiniteError& e) {
      throw DivergenceError("training diverged at step " + std::to_string(step + 1) + ": " + e.what(),
                            last_path);
    }
    ++step;

    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    TraceRow row{step, lr, stats.loss,
                 seconds > 0 ? static_cast<double>(stats.tokens) / seconds : 0.0};
    result.trace.push_back(row);
    if (persist) trace_out << format_trace_row(row) << '\n';

    meta.interval_loss += stats.loss;
    ++meta.interval_steps;
    epoch_loss += stats.loss;
    ++epoch_steps;
    epoch_tokens += stats.tokens;
    epoch_correct += stats.correct;

    if (step % batches_per_epoch == 0 || step == total_steps) {
      EpochSummary s{epoch + 1, step, epoch_loss / static_cast<double>(epoch_steps),
                     epoch_tokens ? static_cast<double>(epoch_correct) / static_cast<double>(epoch_tokens)
                                  : 0.0};
      result.epochs.push_back(s);
      if (tc.log != nullptr) {
        *tc.log << "epoch " << s.epoch << " step " << step << " mean_loss " << std::setprecision(6)
                << s.mean_loss << " token_acc " << s.token_accuracy << " lrate " << lr << std::endl;
      }
      epoch_loss = 0;
      epoch_steps = epoch_tokens = epoch_correct = 0;
    }

    // Best-loss bookkeeping happens only on the fixed cadence, so an early
    // stop (max_steps) followed by a resume matches an uninterrupted run.
    const bool cadence = step % tc.checkpoint_every == 0 || step == schedule_end;
    if (cadence || step == total_steps) {
      bool improved = false;
      if (cadence) {
        const double mean = meta.interval_loss / static_cast<double>(meta.interval_steps);
        improved = mean < meta.best_loss;
        if (improved) meta.best_loss = mean;
        meta.interval_loss = 0;
        meta.interval_steps = 0;
      }
      if (persist) {
        trace_out.flush();
        const auto ckpt = snapshot();
        last_path = (dir / kLastCheckpoint).string();
        save_checkpoint(ckpt, last_path);
        if (improved) {
          best_path = (dir / kBestCheckpoint).string();
          save_checkpoint(ckpt, best_path);
        }
      }
    }
  }

  result.model = *model;
  result.optimizer = optimizer;
  result.meta = meta;
  result.last_checkpoint = last_path;
  result.best_checkpoint = best_path;
  return result;
}

/// The checkpoint `fit` would write for its final state.
template <typename T>
Checkpoint<T> make_checkpoint(const FitResult<T>& r, const Vocabulary& src_vocab, const Vocabulary& tgt_vocab) {
  Checkpoint<T> c;
  c.model = r.model.config();
  c.step = r.optimizer.step;
  c.training = r.meta;
  c.src_vocab = src_vocab;
  c.tgt_vocab = tgt_vocab;
  c.params = r.model.params();
  c.optimizer = r.optimizer;
  return c;
}

}  // namespace mce

#endif  // MCE_TRAINING_HPP_
