// Copyright 2026 The paravat Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.


// Drives the command-line tool as a subprocess: exit codes and
// byte-identical reruns.

#include <gtest/gtest.h>
#include <sys/wait.h>
#include <unistd.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#ifndef PARAVAT_CLI_PATH
#error "PARAVAT_CLI_PATH must point at the built tool"
#endif

namespace {

namespace fs = std::filesystem;

std::string Slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void Spit(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("paravat_cli_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "stop");
    Spit(dir_ / "corpus.txt",
         "the cat sat on the mat\n"
         "a dog ran to the park\n"
         "the bird sang a song\n"
         "a cat ran on the grass\n");
    Spit(dir_ / "stop" / "en.txt", "the\na\n");
    Spit(dir_ / "run.cfg",
         "seed = 11\n"
         "[model]\nvocab_size = 24\nd_model = 8\nlayers = 1\nheads = 2\n"
         "d_ff = 16\nmax_len = 16\n"
         "[lora]\nrank = 2\n"
         "[vat]\nepochs = 2\nbatch_size = 2\nascent_steps = 2\n"
         "[pretrain]\nepochs = 1\n"
         "[decode]\nmax_new_tokens = 6\n"
         "[data]\nvocab_max = 24\n"
         "[paths]\ncorpus = " + (dir_ / "corpus.txt").string() +
         "\nstopwords_dir = " + (dir_ / "stop").string() + "\n");
    Spit(dir_ / "eval.jsonl",
         "{\"input\": \"the cat sat on the mat\", \"references\": "
         "[\"a cat sat on a mat\"], \"lang\": \"en\"}\n"
         "{\"input\": \"a dog ran\", \"lang\": \"en\"}\n");
  }
  void TearDown() override { fs::remove_all(dir_); }

  // Runs the tool with `args`, returns its exit code.
  int Run(const std::string& args, const std::string& stdout_file = "") {
    std::string cmd = std::string(PARAVAT_CLI_PATH) + " " + args;
    cmd += " > " + (stdout_file.empty() ? std::string("/dev/null")
                                        : (dir_ / stdout_file).string());
    cmd += " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string Stderr() const { return Slurp(dir_ / "stderr.txt"); }
  std::string D(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
};

TEST_F(CliTest, UsageAndInputErrorsExitTwo) {
  EXPECT_EQ(Run("--help"), 0);
  EXPECT_EQ(Run(""), 2);
  EXPECT_EQ(Run("no-such-command"), 2);
  EXPECT_EQ(Run("train --config " + D("missing.cfg")), 2);
  EXPECT_NE(Stderr().find("missing.cfg"), std::string::npos);
  EXPECT_EQ(Run("build-vocab --corpus " + D("missing.txt") + " --out " + D("v")), 2);
  EXPECT_EQ(Run("paraphrase --checkpoint " + D("missing.ckpt")), 2);
  EXPECT_EQ(Run("train --config " + D("run.cfg") + " --set vat.nope=1"), 2);
  EXPECT_EQ(Run("train --config " + D("run.cfg") + " --set model.heads=3"), 2);
}

TEST_F(CliTest, MalformedDataExitsFour) {
  Spit(dir_ / "bad.ckpt", "paravat-checkpoint 1\ngarbage\n");
  EXPECT_EQ(Run("paraphrase --checkpoint " + D("bad.ckpt")), 4);
  ASSERT_EQ(Run("train --config " + D("run.cfg") + " --out " + D("run")), 0);
  Spit(dir_ / "bad.jsonl",
       "{\"input\": \"a\", \"lang\": \"en\"}\n{\"input\": \"b\", \"lang\": \n");
  EXPECT_EQ(Run("evaluate --checkpoint " + D("run/final.ckpt") + " --eval " +
                D("bad.jsonl") + " --out " + D("e")),
            4);
  EXPECT_NE(Stderr().find("line 2"), std::string::npos) << Stderr();
}

TEST_F(CliTest, SchemaMismatchExitsFive) {
  ASSERT_EQ(Run("train --config " + D("run.cfg") + " --out " + D("run")), 0);
  ASSERT_EQ(Run("evaluate --checkpoint " + D("run/final.ckpt") + " --eval " +
                D("eval.jsonl") + " --out " + D("m")),
            0);
  EXPECT_EQ(Run("report " + D("run/history.csv") + " " + D("m.csv") + " --out " +
                D("r")),
            5);
  EXPECT_EQ(Run("report " + D("run/history.csv") + " --out " + D("r")), 0);
  EXPECT_TRUE(fs::exists(dir_ / "r.csv"));
}

TEST_F(CliTest, LockedCheckpointDirectoryExitsTwo) {
  fs::create_directories(dir_ / "run");
  Spit(dir_ / "run" / ".lock", "");
  EXPECT_EQ(Run("train --config " + D("run.cfg") + " --out " + D("run")), 2);
  EXPECT_NE(Stderr().find("Locked"), std::string::npos) << Stderr();
}

TEST_F(CliTest, FixedSeedRerunsAreByteIdentical) {
  Spit(dir_ / "in.txt", "the cat sat on the mat\n\na bird ran\n");
  for (const char* run : {"a", "b"}) {
    const std::string r(run);
    // Same checkpoint directory both times so the stored config matches.
    fs::remove_all(dir_ / "run");
    ASSERT_EQ(Run("train --config " + D("run.cfg") + " --seed 3 --out " + D("run")), 0)
        << Stderr();
    fs::copy(dir_ / "run", dir_ / ("run_" + r));
    fs::create_directories(dir_ / ("ev_" + r));
    ASSERT_EQ(Run("paraphrase --checkpoint " + D("run/final.ckpt") + " --input " +
                  D("in.txt") + " --set decode.strategy=top-k --out " +
                  D("para_" + r + ".txt")),
              0);
    ASSERT_EQ(Run("evaluate --checkpoint " + D("run/final.ckpt") + " --eval " +
                  D("eval.jsonl") + " --out " + D("ev_" + r + "/ev")),
              0)
        << Stderr();
  }
  for (const char* f : {"final.ckpt", "epoch-001.ckpt", "history.csv"}) {
    EXPECT_EQ(Slurp(dir_ / "run_a" / f), Slurp(dir_ / "run_b" / f)) << f;
  }
  const std::string para = Slurp(dir_ / "para_a.txt");
  EXPECT_EQ(para, Slurp(dir_ / "para_b.txt"));
  EXPECT_EQ(std::count(para.begin(), para.end(), '\n'), 3);
  for (const char* ext : {".csv", ".records.csv", ".candidates.jsonl", ".txt"}) {
    EXPECT_EQ(Slurp(D(std::string("ev_a/ev") + ext)),
              Slurp(D(std::string("ev_b/ev") + ext)))
        << ext;
  }
  // A different seed changes the trained tensors.
  fs::remove_all(dir_ / "run");
  ASSERT_EQ(Run("train --config " + D("run.cfg") + " --seed 4 --out " + D("run")), 0);
  EXPECT_NE(Slurp(dir_ / "run" / "final.ckpt"), Slurp(dir_ / "run_a" / "final.ckpt"));
}

TEST_F(CliTest, ParaphraseEmptyInputGivesEmptyOutput) {
  ASSERT_EQ(Run("train --config " + D("run.cfg") + " --out " + D("run")), 0);
  Spit(dir_ / "empty.txt", "");
  ASSERT_EQ(Run("paraphrase --checkpoint " + D("run/final.ckpt") + " --input " +
                D("empty.txt") + " --out " + D("o.txt")),
            0);
  EXPECT_EQ(Slurp(dir_ / "o.txt"), "");
}

}  // namespace
