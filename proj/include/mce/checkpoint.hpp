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

#ifndef MCE_CHECKPOINT_HPP_
#define MCE_CHECKPOINT_HPP_

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <optional>
#include <string>
#include <vector>

#include "mce/config.hpp"
#include "mce/model.hpp"
#include "mce/optimizer.hpp"

namespace mce {

// Binary checkpoint layout. All integers are unsigned little-endian; strings
// are a u64 byte count followed by the bytes.
//
//   magic          8 bytes  "MCECKPT\0"
//   version        u32      kCheckpointVersion
//   fingerprint    u64      FNV-1a of model_config_text(model)
//   step           u64      completed optimizer updates
//   model          string   model_config_text(model)
//   training       string   key = value lines (seed, batch_size, ...)
//   src vocab      u64 count, then count strings (ids in order)
//   tgt vocab      same
//   params         tensor table
//   has_optimizer  u8
//   [adam step u64, first-moment table, second-moment table]
//
// A tensor table is a u64 count, then per tensor: name string, u32 rank,
// rank x u64 extents, then the values as IEEE-754 binary64.

inline constexpr char kCheckpointMagic[8] = {'M', 'C', 'E', 'C', 'K', 'P', 'T', '\0'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

/// Resume bookkeeping stored next to the weights.
struct TrainingMeta {
  std::uint64_t seed = 0;
  std::size_t batch_size = 0;
  double best_loss = std::numeric_limits<double>::infinity();
  double interval_loss = 0;  // loss sum since the last cadence checkpoint
  std::uint64_t interval_steps = 0;
};

template <typename T>
struct Checkpoint {
  ModelConfig model;
  std::uint64_t step = 0;
  TrainingMeta training;
  Vocabulary src_vocab, tgt_vocab;
  ModelParams<T> params;
  std::optional<AdamState<ModelParams<T>>> optimizer;
};

namespace ckpt_detail {

class Writer {
 public:
  void u8(std::uint8_t v) { bytes_.push_back(static_cast<char>(v)); }
  void u32(std::uint32_t v) {
    for (int i = 0; i < 4; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void u64(std::uint64_t v) {
    for (int i = 0; i < 8; ++i) u8(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f64(double v) { u64(std::bit_cast<std::uint64_t>(v)); }
  void str(const std::string& s) {
    u64(s.size());
    bytes_.append(s);
  }
  void raw(const char* p, std::size_t n) { bytes_.append(p, n); }
  const std::string& bytes() const { return bytes_; }

 private:
  std::string bytes_;
};

class Reader {
 public:
  Reader(std::string bytes, std::string origin) : bytes_(std::move(bytes)), origin_(std::move(origin)) {}

  std::uint8_t u8() {
    need(1);
    return static_cast<std::uint8_t>(bytes_[pos_++]);
  }
  std::uint32_t u32() {
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(u8()) << (8 * i);
    return v;
  }
  std::uint64_t u64() {
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(u8()) << (8 * i);
    return v;
  }
  double f64() { return std::bit_cast<double>(u64()); }
  std::string str() {
    const std::uint64_t n = u64();
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::string raw(std::size_t n) {
    need(n);
    std::string s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  bool done() const { return pos_ == bytes_.size(); }
  [[noreturn]] void fail(const std::string& what) const {
    throw Error("checkpoint " + origin_ + ": " + what);
  }

 private:
  void need(std::uint64_t n) const {
    if (n > bytes_.size() - pos_) fail("truncated file");
  }
  std::string bytes_;
  std::string origin_;
  std::size_t pos_ = 0;
};

template <typename P>
void write_table(Writer& w, const P& params) {
  std::uint64_t count = 0;
  params.visit([&](std::string_view, const auto&) { ++count; });
  w.u64(count);
  params.visit([&](std::string_view name, const auto& t) {
    w.str(std::string(name));
    w.u32(static_cast<std::uint32_t>(t.rank()));
    for (auto extent : t.shape()) w.u64(extent);
    for (auto v : t.data()) w.f64(static_cast<double>(v));
  });
}

/// Reads a table into `params`, which must already have the expected layout.
template <typename P>
void read_table(Reader& r, P& params) {
  std::vector<std::pair<std::string, Tensor<double>>> entries;
  const std::uint64_t count = r.u64();
  for (std::uint64_t k = 0; k < count; ++k) {
    std::string name = r.str();
    const std::uint32_t rank = r.u32();
    if (rank == 0 || rank > 8) r.fail("bad rank for '" + name + "'");
    Shape shape(rank);
    for (auto& e : shape) {
      e = r.u64();
      if (e == 0 || e > (1ULL << 32)) r.fail("bad extent for '" + name + "'");
    }
    Tensor<double> t(shape);
    for (auto& v : t.data()) v = r.f64();
    entries.emplace_back(std::move(name), std::move(t));
  }
  std::size_t k = 0;
  params.visit([&](std::string_view name, auto& t) {
    using V = typename std::decay_t<decltype(t)>::value_type;
    if (k >= entries.size()) r.fail("missing tensor '" + std::string(name) + "'");
    const auto& [stored_name, stored] = entries[k++];
    if (stored_name != name) r.fail("expected tensor '" + std::string(name) + "', found '" + stored_name + "'");
    if (stored.shape() != t.shape()) {
      r.fail("tensor '" + stored_name + "' has shape " + shape_string(stored.shape()) + ", expected " +
             shape_string(t.shape()));
    }
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = static_cast<V>(stored[i]);
  });
  if (k != entries.size()) r.fail("unexpected extra tensor '" + entries[k].first + "'");
}

inline void write_vocab(Writer& w, const Vocabulary& v) {
  w.u64(v.size());
  for (const auto& t : v.tokens()) w.str(t);
}

inline Vocabulary read_vocab(Reader& r) {
  const std::uint64_t n = r.u64();
  if (n > (1ULL << 32)) r.fail("implausible vocabulary size");
  std::vector<std::string> tokens;
  tokens.reserve(n);
  for (std::uint64_t i = 0; i < n; ++i) tokens.push_back(r.str());
  return Vocabulary::from_token_list(tokens);
}

inline std::string training_text(const TrainingMeta& m) {
  return "seed = " + std::to_string(m.seed) + "\nbatch_size = " + std::to_string(m.batch_size) +
         "\nbest_loss = " + config_detail::format_real(m.best_loss) +
         "\ninterval_loss = " + config_detail::format_real(m.interval_loss) +
         "\ninterval_steps = " + std::to_string(m.interval_steps) + "\n";
}

inline TrainingMeta parse_training_text(const std::string& text, Reader& r) {
  TrainingMeta m;
  std::istringstream in(text);
  std::string line;
  while (std::getline(in, line)) {
    const auto eq = line.find('=');
    if (eq == std::string::npos) continue;
    const std::string key = config_detail::trim(line.substr(0, eq));
    const std::string value = config_detail::trim(line.substr(eq + 1));
    if (key == "seed") {
      m.seed = config_detail::parse_unsigned<std::uint64_t>(key, value);
    } else if (key == "batch_size") {
      m.batch_size = config_detail::parse_unsigned<std::size_t>(key, value);
    } else if (key == "best_loss") {
      m.best_loss = value == "inf" ? std::numeric_limits<double>::infinity()
                                   : config_detail::parse_real(key, value);
    } else if (key == "interval_loss") {
      m.interval_loss = config_detail::parse_real(key, value);
    } else if (key == "interval_steps") {
      m.interval_steps = config_detail::parse_unsigned<std::uint64_t>(key, value);
    } else {
      r.fail("unknown training field '" + key + "'");
    }
  }
  return m;
}

}  // namespace ckpt_detail

template <typename T>
std::string serialize_checkpoint(const Checkpoint<T>& c) {
  if (c.src_vocab.size() != c.model.src_vocab || c.tgt_vocab.size() != c.model.tgt_vocab) {
    throw Error("checkpoint: vocabulary sizes disagree with the model config");
  }
  ckpt_detail::Writer w;
  w.raw(kCheckpointMagic, sizeof(kCheckpointMagic));
  w.u32(kCheckpointVersion);
  w.u64(config_fingerprint(c.model));
  w.u64(c.step);
  w.str(model_config_text(c.model));
  w.str(ckpt_detail::training_text(c.training));
  ckpt_detail::write_vocab(w, c.src_vocab);
  ckpt_detail::write_vocab(w, c.tgt_vocab);
  ckpt_detail::write_table(w, c.params);
  w.u8(c.optimizer ? 1 : 0);
  if (c.optimizer) {
    w.u64(c.optimizer->step);
    ckpt_detail::write_table(w, c.optimizer->m);
    ckpt_detail::write_table(w, c.optimizer->v);
  }
  return w.bytes();
}

/// `expected`, when given, must have the stored fingerprint. `adam` supplies
/// the optimizer hyperparameters for restored moments.
template <typename T>
Checkpoint<T> deserialize_checkpoint(std::string bytes, const std::string& origin = "<memory>",
                                     const ModelConfig* expected = nullptr, AdamConfig adam = {}) {
  ckpt_detail::Reader r(std::move(bytes), origin);
  if (r.raw(sizeof(kCheckpointMagic)) != std::string(kCheckpointMagic, sizeof(kCheckpointMagic))) {
    r.fail("not a checkpoint file (bad magic)");
  }
  const std::uint32_t version = r.u32();
  if (version != kCheckpointVersion) r.fail("unsupported format version " + std::to_string(version));
  const std::uint64_t fingerprint = r.u64();
  Checkpoint<T> c;
  c.step = r.u64();
  const std::string model_text = r.str();
  if (fnv1a(model_text) != fingerprint) r.fail("model description does not match its fingerprint");
  c.model = parse_model_config_text(model_text);
  if (expected != nullptr && config_fingerprint(*expected) != fingerprint) {
    r.fail("config fingerprint mismatch: checkpoint was written for\n" + model_text +
           "but the current config is\n" + model_config_text(*expected));
  }
  c.training = ckpt_detail::parse_training_text(r.str(), r);
  c.src_vocab = ckpt_detail::read_vocab(r);
  c.tgt_vocab = ckpt_detail::read_vocab(r);
  if (c.src_vocab.size() != c.model.src_vocab || c.tgt_vocab.size() != c.model.tgt_vocab) {
    r.fail("vocabulary sizes disagree with the model description");
  }
  c.params = Model<T>(c.model, 0).params();
  ckpt_detail::read_table(r, c.params);
  const std::uint8_t has_optimizer = r.u8();
  if (has_optimizer > 1) r.fail("bad optimizer flag");
  if (has_optimizer) {
    adam.model_dim = static_cast<double>(c.model.channels.hidden_dim);
    AdamState<ModelParams<T>> state(adam, c.params);
    state.step = r.u64();
    ckpt_detail::read_table(r, state.m);
    ckpt_detail::read_table(r, state.v);
    c.optimizer = std::move(state);
  }
  if (!r.done()) r.fail("trailing bytes");
  return c;
}

template <typename T>
void save_checkpoint(const Checkpoint<T>& c, const std::string& path) {
  const std::string bytes = serialize_checkpoint(c);
  const std::filesystem::path target(path);
  if (target.has_parent_path()) std::filesystem::create_directories(target.parent_path());
  // Write then rename so a crash never leaves a half-written checkpoint.
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw Error("cannot write checkpoint " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw Error("failed writing checkpoint " + tmp);
  }
  std::filesystem::rename(tmp, path);
}

template <typename T>
Checkpoint<T> load_checkpoint(const std::string& path, const ModelConfig* expected = nullptr,
                              AdamConfig adam = {}) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot read checkpoint " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return deserialize_checkpoint<T>(ss.str(), path, expected, adam);
}

}  // namespace mce

#endif  // MCE_CHECKPOINT_HPP_
