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

// mce: command-line front end for training, translation, evaluation,
// ablation and gradient checking.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mce/checkpoint.hpp"
#include "mce/config.hpp"
#include "mce/evaluation.hpp"
#include "mce/grad_check_suite.hpp"
#include "mce/training.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace mce::cli {

constexpr int kExitContract = 1;  // ran, but the command's contract was not met
constexpr int kExitError = 2;     // bad input, missing files, internal errors

constexpr const char* kResolvedConfig = "config.resolved";
constexpr const char* kSrcVocab = "src.vocab";
constexpr const char* kTgtVocab = "tgt.vocab";

struct Options {
  std::string config_path;
  std::map<std::string, std::string> overrides;  // --<key> flags, applied after the file

  std::string resume;
  std::string checkpoint;
  std::string input, output, references, hypotheses;
  bool scores = false;
  bool buckets = false;
  bool json_out = false;
  bool lowercase = false;
  std::size_t max_decode_len = 0;
  std::string seeds = "1,2,3";
  std::string systems;
};

RunConfig resolve(const Options& o) {
  RunConfig cfg = o.config_path.empty() ? RunConfig{} : load_config(o.config_path);
  for (const auto& [key, value] : o.overrides) {
    try {
      apply_setting(cfg, key, value);
    } catch (const Error& e) {
      throw Error(std::string("--") + key + ": " + e.what());
    }
  }
  cfg.validate();
  return cfg;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  out << text;
}

std::vector<std::uint64_t> parse_seeds(const std::string& text) {
  std::vector<std::uint64_t> seeds;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = config_detail::trim(item);
    if (!item.empty()) seeds.push_back(config_detail::parse_unsigned<std::uint64_t>("seeds", item));
  }
  if (seeds.empty()) throw Error("--seeds needs at least one seed");
  return seeds;
}

TaskSpec task_spec(const RunConfig& cfg) {
  TaskSpec s;
  s.task = parse_task(cfg.task);
  s.vocab = cfg.task_vocab;
  s.min_len = cfg.task_min_len;
  s.max_len = cfg.task_max_len;
  s.train_pairs = cfg.task_train;
  s.test_pairs = cfg.task_test;
  return s;
}

TrainConfig train_config(const RunConfig& cfg) {
  TrainConfig tc;
  tc.epochs = cfg.epochs;
  tc.batch_size = cfg.batch_size;
  tc.warmup = static_cast<double>(cfg.warmup);
  tc.num_gpus = static_cast<double>(cfg.num_gpus);
  tc.clip = cfg.clip;
  tc.checkpoint_every = cfg.checkpoint_every;
  tc.seed = cfg.seed;
  return tc;
}

/// Test-side file paths: explicit config entries win, then the files a
/// `train --task` run left in the output directory.
std::pair<std::string, std::string> test_paths(const RunConfig& cfg) {
  if (!cfg.test_src.empty()) return {cfg.test_src, cfg.test_tgt};
  const fs::path dir(cfg.output_dir);
  if (!cfg.task.empty() || fs::exists(dir / "test.src")) {
    return {(dir / "test.src").string(), (dir / "test.tgt").string()};
  }
  return {"", ""};
}

// ---------------------------------------------------------------------------
// train

template <typename T>
int train(const RunConfig& cfg, const Options& o) {
  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);

  std::vector<SentencePair> pairs;
  Vocabulary src_vocab, tgt_vocab;
  if (!cfg.task.empty()) {
    auto data = make_task_data(task_spec(cfg), cfg.seed);
    write_parallel(data.train, (dir / "train.src").string(), (dir / "train.tgt").string());
    write_parallel(data.test, (dir / "test.src").string(), (dir / "test.tgt").string());
    pairs = std::move(data.train);
    src_vocab = std::move(data.src_vocab);
    tgt_vocab = std::move(data.tgt_vocab);
  } else {
    if (cfg.train_src.empty() || cfg.train_tgt.empty()) {
      throw Error("train needs train_src and train_tgt (or --task copy|reverse)");
    }
    pairs = filter_pairs(read_parallel(cfg.train_src, cfg.train_tgt), cfg.max_len);
    if (pairs.empty()) throw Error("no training pairs left after filtering to max_len " + std::to_string(cfg.max_len));
    src_vocab = build_vocab(sources_of(pairs), cfg.src_vocab_size);
    tgt_vocab = build_vocab(targets_of(pairs), cfg.tgt_vocab_size);
  }
  const ModelConfig mc = model_config(cfg, src_vocab.size(), tgt_vocab.size());
  write_text(dir / kResolvedConfig, resolved_config_text(cfg));
  src_vocab.save((dir / kSrcVocab).string());
  tgt_vocab.save((dir / kTgtVocab).string());

  TrainConfig tc = train_config(cfg);
  tc.output_dir = dir.string();
  tc.log = &std::cerr;

  std::optional<Checkpoint<T>> resume;
  if (!o.resume.empty()) resume = load_checkpoint<T>(o.resume, &mc);

  std::cerr << "training " << mc.channels.system_name() << " on " << pairs.size() << " pairs, "
            << parameter_count(Model<T>(mc, 0).params()) << " parameters\n";
  try {
    const auto result = fit<T>(pairs, src_vocab, tgt_vocab, mc, tc, resume ? &*resume : nullptr);
    std::cout << "last checkpoint: " << result.last_checkpoint << "\n";
    if (!result.best_checkpoint.empty()) std::cout << "best checkpoint: " << result.best_checkpoint << "\n";
  } catch (const DivergenceError& e) {
    std::cerr << e.what() << "\n";
    if (!e.last_good_checkpoint().empty()) std::cerr << "last good checkpoint: " << e.last_good_checkpoint() << "\n";
    return kExitContract;
  }
  return 0;
}

// ---------------------------------------------------------------------------
// translate / evaluate

template <typename T>
Checkpoint<T> open_checkpoint(const RunConfig& cfg, const Options& o) {
  std::string path = o.checkpoint;
  if (path.empty()) {
    path = (fs::path(cfg.output_dir) / kLastCheckpoint).string();
    if (!fs::exists(path)) {
      throw Error("no checkpoint given and none at " + path + "; run `train` first or pass --checkpoint");
    }
  }
  if (!fs::exists(path)) throw Error("checkpoint not found: " + path);
  return load_checkpoint<T>(path);
}

std::vector<Sentence> read_sentences(const std::string& path) {
  std::vector<Sentence> out;
  if (path.empty() || path == "-") {
    std::string line;
    while (std::getline(std::cin, line)) out.push_back(tokenize(line));
  } else {
    for (const auto& line : read_lines(path)) out.push_back(tokenize(line));
  }
  return out;
}

template <typename T>
int translate_cmd(const RunConfig& cfg, const Options& o) {
  const auto ckpt = open_checkpoint<T>(cfg, o);
  const Model<T> model(ckpt.model, ckpt.params);
  std::string input = o.input;
  if (input.empty()) input = test_paths(cfg).first;
  if (input.empty()) throw Error("translate needs --input (a file or - for stdin)");
  const auto sources = read_sentences(input);
  const auto decoded = decode_corpus(model, ckpt.src_vocab, ckpt.tgt_vocab, sources, cfg.beam, o.max_decode_len);

  std::ofstream file;
  if (!o.output.empty() && o.output != "-") {
    file.open(o.output);
    if (!file) throw Error("cannot write " + o.output);
  }
  std::ostream& out = file.is_open() ? file : std::cout;
  out << std::setprecision(6);
  for (std::size_t i = 0; i < sources.size(); ++i) {
    out << join(decoded.hypotheses[i]);
    if (o.scores) out << '\t' << decoded.scores[i];
    out << '\n';
  }
  return 0;
}

json bleu_json(const BleuReport& r) {
  return {{"bleu", r.bleu},
          {"precisions", r.precisions},
          {"brevity_penalty", r.brevity_penalty},
          {"hyp_length", r.hyp_length},
          {"ref_length", r.ref_length},
          {"sentences", r.sentences}};
}

template <typename T>
int evaluate_cmd(const RunConfig& cfg, const Options& o) {
  auto [src_path, ref_path] = test_paths(cfg);
  if (!o.input.empty()) src_path = o.input;
  if (!o.references.empty()) ref_path = o.references;
  if (ref_path.empty()) throw Error("evaluate needs references (--references or test_tgt)");
  const auto references = read_sentences(ref_path);

  std::vector<Sentence> sources, hypotheses;
  if (!src_path.empty()) sources = read_sentences(src_path);
  if (!o.hypotheses.empty()) {
    hypotheses = read_sentences(o.hypotheses);
  } else {
    if (src_path.empty()) throw Error("evaluate needs sources (--input or test_src) or --hypotheses");
    const auto ckpt = open_checkpoint<T>(cfg, o);
    const Model<T> model(ckpt.model, ckpt.params);
    hypotheses =
        decode_corpus(model, ckpt.src_vocab, ckpt.tgt_vocab, sources, cfg.beam, o.max_decode_len).hypotheses;
    fs::create_directories(cfg.output_dir);
    std::vector<std::string> lines;
    for (const auto& h : hypotheses) lines.push_back(join(h));
    write_lines((fs::path(cfg.output_dir) / "test.hyp").string(), lines);
  }
  if (hypotheses.size() != references.size()) {
    throw Error("evaluate: " + std::to_string(hypotheses.size()) + " hypotheses vs " +
                std::to_string(references.size()) + " references");
  }

  const auto report = bleu(hypotheses, references, 4, o.lowercase);
  const double tok = token_accuracy(hypotheses, references);
  const double seq = sequence_accuracy(hypotheses, references);
  std::vector<BucketRow> rows;
  if (o.buckets) {
    if (sources.size() != references.size()) throw Error("--buckets needs the source sentences (--input)");
    std::vector<std::size_t> lengths;
    for (const auto& s : sources) lengths.push_back(s.size());
    rows = length_bucket_report(lengths, hypotheses, references, default_bucket_thresholds(), o.lowercase);
  }

  if (o.json_out) {
    json j = bleu_json(report);
    j["token_accuracy"] = tok;
    j["sequence_accuracy"] = seq;
    if (o.buckets) {
      json b = json::array();
      for (const auto& r : rows) {
        json row = {{"threshold", r.threshold}, {"sentences", r.sentences}, {"empty", r.empty()}};
        row["bleu"] = r.empty() ? json(nullptr) : json(r.report->bleu);
        b.push_back(row);
      }
      j["buckets"] = b;
    }
    std::cout << j.dump(2) << "\n";
  } else {
    std::printf("BLEU = %.2f, %.1f/%.1f/%.1f/%.1f (BP=%.3f, hyp_len=%zu, ref_len=%zu)\n", report.bleu,
                100 * report.precisions[0], 100 * report.precisions[1], 100 * report.precisions[2],
                100 * report.precisions[3], report.brevity_penalty, report.hyp_length, report.ref_length);
    std::printf("token_accuracy = %.4f\nsequence_accuracy = %.4f\n", tok, seq);
    if (o.buckets) {
      std::printf("%-10s %10s %8s\n", "src_len >", "sentences", "BLEU");
      for (const auto& r : rows) {
        if (r.empty()) {
          std::printf("%-10zu %10zu %8s\n", r.threshold, r.sentences, "empty");
        } else {
          std::printf("%-10zu %10zu %8.2f\n", r.threshold, r.sentences, r.report->bleu);
        }
      }
    }
  }
  return 0;
}

// ---------------------------------------------------------------------------
// ablate / grad-check

int ablate_cmd(const RunConfig& cfg, const Options& o) {
  if (cfg.task.empty()) throw Error("ablate needs a synthetic task (--task copy|reverse)");
  if (cfg.precision != 64) throw Error("ablate runs at 64-bit precision only");
  ExperimentSettings s;
  s.channels = cfg.channels;
  s.init_state = cfg.init_state;
  s.dropout = cfg.dropout;
  s.init_range = cfg.init_range;
  s.train = train_config(cfg);
  s.beam = cfg.beam;
  std::vector<std::string> systems = ChannelConfig::all_systems();
  if (!o.systems.empty()) {
    systems.clear();
    std::stringstream ss(o.systems);
    std::string item;
    while (std::getline(ss, item, ',')) {
      item = config_detail::trim(item);
      if (!item.empty()) {
        ChannelConfig probe;
        probe.set_system(item);
        systems.push_back(item);
      }
    }
  }
  // Only the NTM systems need m == e == d; check the shared dims up front.
  for (const auto& system : systems) {
    ChannelConfig c = s.channels;
    c.set_system(system);
    c.validate();
  }
  const auto report = ablation_suite(task_spec(cfg), s, parse_seeds(o.seeds), systems, &std::cerr);

  const fs::path dir(cfg.output_dir);
  fs::create_directories(dir);
  write_text(dir / kResolvedConfig, resolved_config_text(cfg));
  write_text(dir / "ablation.csv", ablation_csv(report));
  write_text(dir / "ablation.txt", ablation_table(report));
  if (o.json_out) {
    json rows = json::array();
    for (const auto& r : report.rows) {
      json runs = json::array();
      for (const auto& run : r.runs) {
        json jr = {{"seed", run.seed}, {"ok", run.ok}};
        if (run.ok) {
          jr["token_accuracy"] = run.metrics.token_accuracy;
          jr["bleu"] = run.metrics.bleu;
        } else {
          jr["error"] = run.error;
        }
        runs.push_back(jr);
      }
      rows.push_back({{"system", r.system},
                      {"parameters", r.parameters},
                      {"ok", r.ok},
                      {"median_token_accuracy", r.median_token_accuracy},
                      {"median_bleu", r.median_bleu},
                      {"delta_token_accuracy", r.delta_token_accuracy},
                      {"delta_bleu", r.delta_bleu},
                      {"runs", runs}});
    }
    const json j = {{"task", report.task}, {"baseline", report.baseline}, {"seeds", report.seeds}, {"rows", rows}};
    write_text(dir / "ablation.json", j.dump(2) + "\n");
    std::cout << j.dump(2) << "\n";
  } else {
    std::cout << ablation_table(report);
  }
  for (const auto& r : report.rows) {
    if (!r.ok) return kExitContract;
  }
  return 0;
}

int grad_check_cmd(const RunConfig& cfg, const Options& o) {
  constexpr double kThreshold = 1e-4;
  const auto results = gradcheck::run_suite(cfg.seed);
  bool ok = true;
  json j = json::array();
  for (const auto& [name, r] : results) {
    const bool pass = r.max_rel_error < kThreshold;
    ok = ok && pass;
    if (o.json_out) {
      j.push_back({{"module", name},
                   {"max_rel_error", r.max_rel_error},
                   {"worst_tensor", r.worst_tensor},
                   {"entries", r.entries_checked},
                   {"pass", pass}});
    } else {
      std::printf("%-40s %.3e  %s  (%zu entries, worst %s)\n", name.c_str(), r.max_rel_error, pass ? "ok" : "FAIL",
                  r.entries_checked, r.worst_tensor.c_str());
    }
  }
  if (o.json_out) std::cout << j.dump(2) << "\n";
  return ok ? 0 : kExitContract;
}

template <typename T>
int dispatch(const std::string& command, const RunConfig& cfg, const Options& o) {
  if (command == "train") return train<T>(cfg, o);
  if (command == "translate") return translate_cmd<T>(cfg, o);
  return evaluate_cmd<T>(cfg, o);
}

}  // namespace mce::cli

int main(int argc, char** argv) {
  using namespace mce;
  using namespace mce::cli;

  CLI::App app{"Multi-channel encoder NMT: train, translate, evaluate, ablate, grad-check"};
  app.require_subcommand(1);
  app.fallthrough();
  Options o;
  app.add_option("--config", o.config_path, "key = value configuration file")->check(CLI::ExistingFile);
  for (const auto& key : config_keys()) {
    app.add_option_function<std::string>(
        "--" + key.name, [&o, name = key.name](const std::string& v) { o.overrides[name] = v; },
        key.help + " (default " + key.get(RunConfig{}) + ")");
  }
  app.add_option_function<std::string>(
      "--system", [&o](const std::string& v) { o.overrides["system"] = v; },
      "one of RNN, NTM, EMB, NTM-RNN, RNN-EMB, NTM-EMB, NTM-RNN-EMB");

  auto* train = app.add_subcommand("train", "train a model; writes checkpoints and a loss trace");
  train->add_option("--resume", o.resume, "continue from this checkpoint")->check(CLI::ExistingFile);

  auto* translate = app.add_subcommand("translate", "translate one sentence per line");
  auto* evaluate = app.add_subcommand("evaluate", "BLEU and accuracy against references");
  for (auto* sub : {translate, evaluate}) {
    sub->add_option("--checkpoint", o.checkpoint, "model checkpoint (default <output_dir>/checkpoint_last.bin)");
    sub->add_option("--input", o.input, "source sentences (- for stdin)");
    sub->add_option("--max-len", o.max_decode_len, "decode length cap (default 2 * source length + 5)");
  }
  translate->add_option("--output", o.output, "hypothesis file (default stdout)");
  translate->add_flag("--scores", o.scores, "append the length-normalized log-probability");
  evaluate->add_option("--references", o.references, "reference sentences");
  evaluate->add_option("--hypotheses", o.hypotheses, "score this file instead of decoding");
  evaluate->add_flag("--buckets", o.buckets, "BLEU on sentences longer than 10, 20, ..., 60");
  evaluate->add_flag("--lowercase", o.lowercase, "case-insensitive BLEU");

  auto* ablate = app.add_subcommand("ablate", "train every system on a synthetic task and compare");
  ablate->add_option("--seeds", o.seeds, "comma-separated seeds")->capture_default_str();
  ablate->add_option("--systems", o.systems, "comma-separated subset of the seven systems");

  auto* grad = app.add_subcommand("grad-check", "finite-difference check of every backward pass");
  for (auto* sub : {evaluate, ablate, grad}) sub->add_flag("--json", o.json_out, "machine-readable output");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    const RunConfig cfg = resolve(o);
    if (ablate->parsed()) return ablate_cmd(cfg, o);
    if (grad->parsed()) return grad_check_cmd(cfg, o);
    const std::string command = train->parsed() ? "train" : translate->parsed() ? "translate" : "evaluate";
    return cfg.precision == 32 ? dispatch<float>(command, cfg, o) : dispatch<double>(command, cfg, o);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitError;
  }
}
