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

#ifndef MCE_CONFIG_HPP_
#define MCE_CONFIG_HPP_

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "mce/model.hpp"

namespace mce {

// Flat `key = value` run configuration. Every key has a default; unknown keys
// and malformed values are errors.

inline constexpr const char* kOutputDirEnv = "MCE_OUTPUT_DIR";

inline std::string default_output_dir() {
  const char* env = std::getenv(kOutputDirEnv);
  return env != nullptr && *env != '\0' ? std::string(env) : std::string("mce_output");
}

struct RunConfig {
  ChannelConfig channels;
  InitState init_state = InitState::kMeanAnnotation;
  std::string train_src, train_tgt;
  std::string test_src, test_tgt;
  std::string task;  // empty, "copy" or "reverse"
  std::size_t task_vocab = 20;
  std::size_t task_min_len = 3;
  std::size_t task_max_len = 10;
  std::size_t task_train = 1000;
  std::size_t task_test = 100;
  std::size_t src_vocab_size = 30000;
  std::size_t tgt_vocab_size = 30000;
  std::size_t max_len = 50;
  std::size_t batch_size = 16;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  std::size_t beam = 10;
  double dropout = 0.5;
  std::size_t warmup = 6000;
  std::size_t num_gpus = 1;
  std::size_t checkpoint_every = 500;
  double clip = 1.0;
  double init_range = 0.04;
  int precision = 64;
  std::string output_dir = default_output_dir();

  void validate() const;
};

namespace config_detail {

inline std::string trim(const std::string& s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return "";
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

[[noreturn]] inline void bad_value(const std::string& key, const std::string& value,
                                   const char* expected) {
  throw Error("config key '" + key + "': expected " + expected + ", got '" + value + "'");
}

template <typename U>
U parse_unsigned(const std::string& key, const std::string& value) {
  U out{};
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty()) bad_value(key, value, "a non-negative integer");
  return out;
}

inline double parse_real(const std::string& key, const std::string& value) {
  double out = 0;
  const char* end = value.data() + value.size();
  auto [ptr, ec] = std::from_chars(value.data(), end, out);
  if (ec != std::errc() || ptr != end || value.empty() || !std::isfinite(out)) {
    bad_value(key, value, "a real number");
  }
  return out;
}

inline bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true" || value == "1" || value == "yes") return true;
  if (value == "false" || value == "0" || value == "no") return false;
  bad_value(key, value, "true or false");
}

// Shortest text that parses back to the same double.
inline std::string format_real(double v) {
  char buf[32];
  const auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

inline const char* format_bool(bool b) { return b ? "true" : "false"; }

}  // namespace config_detail

inline const char* to_string(InitState s) {
  return s == InitState::kMeanAnnotation ? "mean" : "zero";
}

inline InitState parse_init_state(const std::string& v) {
  if (v == "mean") return InitState::kMeanAnnotation;
  if (v == "zero") return InitState::kZero;
  throw Error("init_state must be 'mean' or 'zero', got '" + v + "'");
}

inline ReadWeighting parse_read_weighting(const std::string& v) {
  if (v == "literal") return ReadWeighting::kLiteral;
  if (v == "single") return ReadWeighting::kSingle;
  throw Error("read_weighting must be 'literal' or 'single', got '" + v + "'");
}

struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

/// Every accepted key, in the order the resolved config is written.
inline const std::vector<ConfigKey>& config_keys() {
  using namespace config_detail;
  static const std::vector<ConfigKey> keys = [] {
    std::vector<ConfigKey> k;
    auto size_key = [&](std::string name, std::string help, std::size_t RunConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](RunConfig& c, const std::string& v) {
                     c.*field = parse_unsigned<std::size_t>(name, v);
                   },
                   [field](const RunConfig& c) { return std::to_string(c.*field); }});
    };
    auto dim_key = [&](std::string name, std::string help, std::size_t ChannelConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](RunConfig& c, const std::string& v) {
                     c.channels.*field = parse_unsigned<std::size_t>(name, v);
                   },
                   [field](const RunConfig& c) { return std::to_string(c.channels.*field); }});
    };
    auto flag_key = [&](std::string name, std::string help, bool ChannelConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](RunConfig& c, const std::string& v) {
                     c.channels.*field = parse_bool(name, v);
                   },
                   [field](const RunConfig& c) { return std::string(format_bool(c.channels.*field)); }});
    };
    auto real_key = [&](std::string name, std::string help, double RunConfig::*field) {
      k.push_back({name, std::move(help),
                   [name, field](RunConfig& c, const std::string& v) { c.*field = parse_real(name, v); },
                   [field](const RunConfig& c) { return format_real(c.*field); }});
    };
    auto text_key = [&](std::string name, std::string help, std::string RunConfig::*field) {
      k.push_back({name, std::move(help), [field](RunConfig& c, const std::string& v) { c.*field = v; },
                   [field](const RunConfig& c) { return c.*field; }});
    };

    flag_key("use_emb", "embedding channel", &ChannelConfig::use_emb);
    flag_key("use_rnn", "bidirectional GRU channel", &ChannelConfig::use_rnn);
    flag_key("use_ntm", "external-memory channel", &ChannelConfig::use_ntm);
    dim_key("emb_dim", "word embedding size e", &ChannelConfig::emb_dim);
    dim_key("hidden_dim", "GRU state size d", &ChannelConfig::hidden_dim);
    dim_key("mem_dim", "memory cell size m", &ChannelConfig::mem_dim);
    k.push_back({"read_weighting", "literal | single",
                 [](RunConfig& c, const std::string& v) { c.channels.read_weighting = parse_read_weighting(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.channels.read_weighting)); }});
    flag_key("stacked_bidir", "backward GRU reads the forward states", &ChannelConfig::stacked_bidir);
    flag_key("emb_bias", "add a bias to looked-up embeddings", &ChannelConfig::emb_bias);
    k.push_back({"init_state", "decoder s_0: mean | zero",
                 [](RunConfig& c, const std::string& v) { c.init_state = parse_init_state(v); },
                 [](const RunConfig& c) { return std::string(to_string(c.init_state)); }});
    text_key("train_src", "training source file", &RunConfig::train_src);
    text_key("train_tgt", "training target file", &RunConfig::train_tgt);
    text_key("test_src", "test source file", &RunConfig::test_src);
    text_key("test_tgt", "test reference file", &RunConfig::test_tgt);
    k.push_back({"task", "built-in synthetic task: copy | reverse (replaces corpus files)",
                 [](RunConfig& c, const std::string& v) {
                   if (!v.empty()) parse_task(v);
                   c.task = v;
                 },
                 [](const RunConfig& c) { return c.task; }});
    size_key("task_vocab", "synthetic task vocabulary size", &RunConfig::task_vocab);
    size_key("task_min_len", "synthetic sentence minimum length", &RunConfig::task_min_len);
    size_key("task_max_len", "synthetic sentence maximum length", &RunConfig::task_max_len);
    size_key("task_train", "synthetic training pairs", &RunConfig::task_train);
    size_key("task_test", "synthetic test pairs", &RunConfig::task_test);
    size_key("src_vocab_size", "source vocabulary cap, reserved tokens included", &RunConfig::src_vocab_size);
    size_key("tgt_vocab_size", "target vocabulary cap, reserved tokens included", &RunConfig::tgt_vocab_size);
    size_key("max_len", "drop training pairs longer than this", &RunConfig::max_len);
    size_key("batch_size", "sentences per update", &RunConfig::batch_size);
    size_key("epochs", "passes over the training data", &RunConfig::epochs);
    k.push_back({"seed", "master seed",
                 [](RunConfig& c, const std::string& v) { c.seed = parse_unsigned<std::uint64_t>("seed", v); },
                 [](const RunConfig& c) { return std::to_string(c.seed); }});
    size_key("beam", "beam width", &RunConfig::beam);
    real_key("dropout", "dropout rate on the readout", &RunConfig::dropout);
    size_key("warmup", "warmup steps of the learning-rate schedule", &RunConfig::warmup);
    size_key("num_gpus", "schedule divisor; must be 1", &RunConfig::num_gpus);
    size_key("checkpoint_every", "steps between checkpoints", &RunConfig::checkpoint_every);
    real_key("clip", "global gradient-norm threshold", &RunConfig::clip);
    real_key("init_range", "uniform init half-width", &RunConfig::init_range);
    k.push_back({"precision", "training scalar width: 64 | 32",
                 [](RunConfig& c, const std::string& v) {
                   c.precision = static_cast<int>(parse_unsigned<unsigned>("precision", v));
                 },
                 [](const RunConfig& c) { return std::to_string(c.precision); }});
    text_key("output_dir", "directory for checkpoints and reports", &RunConfig::output_dir);
    return k;
  }();
  return keys;
}

inline void apply_setting(RunConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& k : config_keys()) {
    if (k.name == key) {
      k.set(cfg, value);
      return;
    }
  }
  if (key == "system") {
    cfg.channels.set_system(value);
    return;
  }
  throw Error("unknown config key '" + key + "'");
}

/// Applies `key = value` lines on top of `cfg`. `#` starts a comment line.
inline void apply_config_text(RunConfig& cfg, const std::string& text, const std::string& origin = "config") {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = config_detail::trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw Error(origin + ":" + std::to_string(lineno) + ": expected 'key = value'");
    }
    const std::string key = config_detail::trim(t.substr(0, eq));
    const std::string value = config_detail::trim(t.substr(eq + 1));
    try {
      apply_setting(cfg, key, value);
    } catch (const Error& e) {
      throw Error(origin + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
}

inline RunConfig parse_config(const std::string& text) {
  RunConfig cfg;
  apply_config_text(cfg, text);
  return cfg;
}

inline RunConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot read config file " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  RunConfig cfg;
  apply_config_text(cfg, ss.str(), path);
  return cfg;
}

inline void RunConfig::validate() const {
  channels.validate();
  if (batch_size < 1) throw Error("batch_size must be at least 1");
  if (beam < 1) throw Error("beam must be at least 1");
  if (max_len < 1) throw Error("max_len must be at least 1");
  if (warmup < 1) throw Error("warmup must be at least 1");
  if (num_gpus != 1) throw Error("num_gpus is fixed at 1");
  if (checkpoint_every < 1) throw Error("checkpoint_every must be at least 1");
  if (!(dropout >= 0) || dropout >= 1) throw Error("dropout must lie in [0, 1)");
  if (!(clip > 0)) throw Error("clip must be positive");
  if (!(init_range > 0)) throw Error("init_range must be positive");
  if (precision != 64 && precision != 32) throw Error("precision must be 64 or 32");
  if (src_vocab_size < kNumReserved || tgt_vocab_size < kNumReserved) {
    throw Error("vocabulary sizes must be at least 4");
  }
  if (!task.empty()) {
    if (task_vocab < 1 || task_min_len < 1 || task_max_len < task_min_len || task_train < 1 ||
        task_test < 1) {
      throw Error("invalid synthetic task settings");
    }
  }
}

/// All keys with their effective values, one per line.
inline std::string resolved_config_text(const RunConfig& cfg) {
  std::string out;
  for (const auto& k : config_keys()) out += k.name + " = " + k.get(cfg) + "\n";
  return out;
}

inline ModelConfig model_config(const RunConfig& run, std::size_t src_vocab, std::size_t tgt_vocab) {
  ModelConfig m;
  m.channels = run.channels;
  m.src_vocab = src_vocab;
  m.tgt_vocab = tgt_vocab;
  m.init_state = run.init_state;
  m.dropout = run.dropout;
  m.init_range = run.init_range;
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Canonical model description, stored in checkpoints and hashed into the
// config fingerprint.
// ---------------------------------------------------------------------------

inline std::string model_config_text(const ModelConfig& m) {
  using config_detail::format_bool;
  std::string out;
  auto line = [&](const std::string& k, const std::string& v) { out += k + " = " + v + "\n"; };
  line("use_emb", format_bool(m.channels.use_emb));
  line("use_rnn", format_bool(m.channels.use_rnn));
  line("use_ntm", format_bool(m.channels.use_ntm));
  line("emb_dim", std::to_string(m.channels.emb_dim));
  line("hidden_dim", std::to_string(m.channels.hidden_dim));
  line("mem_dim", std::to_string(m.channels.mem_dim));
  line("read_weighting", to_string(m.channels.read_weighting));
  line("stacked_bidir", format_bool(m.channels.stacked_bidir));
  line("emb_bias", format_bool(m.channels.emb_bias));
  line("init_state", to_string(m.init_state));
  line("src_vocab", std::to_string(m.src_vocab));
  line("tgt_vocab", std::to_string(m.tgt_vocab));
  line("dropout", config_detail::format_real(m.dropout));
  return out;
}

inline ModelConfig parse_model_config_text(const std::string& text) {
  std::map<std::string, std::string> kv;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    kv[config_detail::trim(line.substr(0, eq))] = config_detail::trim(line.substr(eq + 1));
  }
  auto need = [&](const std::string& k) -> const std::string& {
    auto it = kv.find(k);
    if (it == kv.end()) throw Error("model description lacks '" + k + "'");
    return it->second;
  };
  using namespace config_detail;
  ModelConfig m;
  m.channels.use_emb = parse_bool("use_emb", need("use_emb"));
  m.channels.use_rnn = parse_bool("use_rnn", need("use_rnn"));
  m.channels.use_ntm = parse_bool("use_ntm", need("use_ntm"));
  m.channels.emb_dim = parse_unsigned<std::size_t>("emb_dim", need("emb_dim"));
  m.channels.hidden_dim = parse_unsigned<std::size_t>("hidden_dim", need("hidden_dim"));
  m.channels.mem_dim = parse_unsigned<std::size_t>("mem_dim", need("mem_dim"));
  m.channels.read_weighting = parse_read_weighting(need("read_weighting"));
  m.channels.stacked_bidir = parse_bool("stacked_bidir", need("stacked_bidir"));
  m.channels.emb_bias = parse_bool("emb_bias", need("emb_bias"));
  m.init_state = parse_init_state(need("init_state"));
  m.src_vocab = parse_unsigned<std::size_t>("src_vocab", need("src_vocab"));
  m.tgt_vocab = parse_unsigned<std::size_t>("tgt_vocab", need("tgt_vocab"));
  m.dropout = parse_real("dropout", need("dropout"));
  m.validate();
  return m;
}

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::uint64_t config_fingerprint(const ModelConfig& m) { return fnv1a(model_config_text(m)); }

}  // namespace mce

#endif  // MCE_CONFIG_HPP_
