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

// Drives the mce executable as a subprocess.

#include <sys/wait.h>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <sstream>
#include <string>

#include <gtest/gtest.h>
#include <json.hpp>

namespace fs = std::filesystem;

namespace {

struct Run {
  int status = -1;
  std::string out;  // stdout and stderr, interleaved
};

Run mce(const std::string& args) {
  const std::string cmd = std::string(MCE_CLI_PATH) + " " + args + " 2>&1";
  Run r;
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return r;
  char buf[4096];
  std::size_t n;
  while ((n = fread(buf, 1, sizeof buf, pipe)) > 0) r.out.append(buf, n);
  const int raw = pclose(pipe);
  r.status = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  return r;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

std::size_t line_count(const std::string& text) {
  std::size_t n = 0;
  for (char c : text) n += (c == '\n');
  return n;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    dir_ = fs::temp_directory_path() / (std::string("mce_cli_") + info->name());
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string out(const std::string& sub = "") const { return (dir_ / sub).string(); }

  // Small enough to train in well under a second.
  static constexpr const char* kTiny =
      "--task copy --task_train 40 --task_test 12 --task_max_len 6 --emb_dim 6 --hidden_dim 6 --mem_dim 6 "
      "--batch_size 8 --warmup 20 --dropout 0 --checkpoint_every 3";

  fs::path dir_;
};

TEST_F(CliTest, GradCheckPassesForSeed7) {
  const auto r = mce("grad-check --seed 7");
  EXPECT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(r.out.find("FAIL"), std::string::npos) << r.out;
  EXPECT_NE(r.out.find("loss[NTM-RNN-EMB]"), std::string::npos);
}

TEST_F(CliTest, TranslateWithoutCheckpointFailsClearly) {
  const auto r = mce("translate --output_dir " + out());
  EXPECT_NE(r.status, 0);
  EXPECT_NE(r.out.find("checkpoint"), std::string::npos) << r.out;

  const auto missing = mce("translate --checkpoint " + out("nope.bin") + " --input -");
  EXPECT_NE(missing.status, 0);
  EXPECT_NE(missing.out.find("not found"), std::string::npos) << missing.out;
}

TEST_F(CliTest, FlagsOverrideConfigFile) {
  std::ofstream(dir_ / "run.cfg") << "# base\nbeam = 2\ndropout = 0.1\nepochs = 0\n";
  const auto r = mce("train --config " + out("run.cfg") + " --beam 4 --output_dir " + out() + " " + kTiny);
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string resolved = slurp(dir_ / "config.resolved");
  EXPECT_NE(resolved.find("beam = 4\n"), std::string::npos) << resolved;
  EXPECT_NE(resolved.find("epochs = 0\n"), std::string::npos);
  // kTiny sets dropout after the file, so the flag wins there too.
  EXPECT_NE(resolved.find("dropout = 0\n"), std::string::npos);
}

TEST_F(CliTest, BadConfigIsRejected) {
  std::ofstream(dir_ / "bad.cfg") << "beam = 3\nbeem = 4\n";
  const auto r = mce("train --config " + out("bad.cfg") + " --output_dir " + out());
  EXPECT_EQ(r.status, 2);
  EXPECT_NE(r.out.find(":2:"), std::string::npos) << r.out;

  const auto dims = mce("train --system NTM-RNN --mem_dim 5 --output_dir " + out() + " " + "--task copy");
  EXPECT_EQ(dims.status, 2) << dims.out;
}

TEST_F(CliTest, TrainTranslateEvaluate) {
  auto r = mce(std::string("train --epochs 3 --output_dir ") + out() + " " + kTiny);
  ASSERT_EQ(r.status, 0) << r.out;
  for (const char* f : {"checkpoint_last.bin", "loss_trace.csv", "config.resolved", "src.vocab", "tgt.vocab",
                        "test.src", "test.tgt"}) {
    EXPECT_TRUE(fs::exists(dir_ / f)) << f;
  }

  r = mce("translate --beam 3 --scores --output_dir " + out() + " --output " + out("hyp.txt"));
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string hyp = slurp(dir_ / "hyp.txt");
  EXPECT_EQ(line_count(hyp), 12u);
  EXPECT_NE(hyp.find('\t'), std::string::npos);

  r = mce("evaluate --json --buckets --output_dir " + out());
  ASSERT_EQ(r.status, 0) << r.out;
  const auto j = nlohmann::json::parse(r.out);
  EXPECT_EQ(j["sentences"], 12);
  EXPECT_GE(j["bleu"].get<double>(), 0.0);
  EXPECT_EQ(j["buckets"].size(), 6u);
  EXPECT_TRUE(j["buckets"][0]["empty"].get<bool>());  // every source is at most 6 tokens

  // Scoring a file against itself needs no model.
  r = mce("evaluate --hypotheses " + out("test.tgt") + " --references " + out("test.tgt"));
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_NE(r.out.find("BLEU = 100.00"), std::string::npos) << r.out;
}

TEST_F(CliTest, RepeatedTrainingIsBitwiseIdentical) {
  const std::string args = std::string("--epochs 2 ") + kTiny;
  ASSERT_EQ(mce("train --output_dir " + out("a") + " " + args).status, 0);
  ASSERT_EQ(mce("train --output_dir " + out("b") + " " + args).status, 0);
  EXPECT_EQ(slurp(dir_ / "a/checkpoint_last.bin"), slurp(dir_ / "b/checkpoint_last.bin"));

  const auto r = mce("train --output_dir " + out("c") + " --resume " + out("a/checkpoint_last.bin") +
                     " --epochs 3 " + kTiny);
  ASSERT_EQ(r.status, 0) << r.out;
  ASSERT_EQ(mce("train --output_dir " + out("d") + " --epochs 3 " + kTiny).status, 0);
  EXPECT_EQ(slurp(dir_ / "c/checkpoint_last.bin"), slurp(dir_ / "d/checkpoint_last.bin"));
}

TEST_F(CliTest, SinglePrecisionTrains) {
  const auto r = mce(std::string("train --precision 32 --epochs 1 --output_dir ") + out() + " " + kTiny);
  ASSERT_EQ(r.status, 0) << r.out;
  EXPECT_EQ(mce("translate --precision 32 --output_dir " + out()).status, 0);
}

TEST_F(CliTest, AblateWritesTable) {
  const auto r = mce(std::string("ablate --epochs 1 --seeds 1,2 --systems RNN,EMB,RNN-EMB --output_dir ") + out() +
                     " " + kTiny);
  ASSERT_EQ(r.status, 0) << r.out;
  const std::string csv = slurp(dir_ / "ablation.csv");
  EXPECT_NE(csv.find("RNN-EMB"), std::string::npos) << csv;
  EXPECT_TRUE(fs::exists(dir_ / "ablation.txt"));
}

}  // namespace
