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


// Command-level behaviour on a tiny model.

#include <gtest/gtest.h>
#include <unistd.h>

#include <filesystem>
#include <functional>
#include <string>

#include "paravat/pipeline.hpp"

namespace paravat {
namespace {

namespace fs = std::filesystem;

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kInvalidArgument;
}

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("paravat_pipe_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_ / "stop");
    WriteFile((dir_ / "corpus.txt").string(),
              "the cat sat on the mat\n"
              "a dog ran to the park\n"
              "the bird sang a song\n"
              "\n"
              "a cat ran on the grass\n");
    WriteFile((dir_ / "stop" / "en.txt").string(), "the\na\n");
    config_.seed = 5;
    config_.model.vocab_size = 24;
    config_.model.d_model = 8;
    config_.model.layers = 1;
    config_.model.heads = 2;
    config_.model.d_ff = 16;
    config_.model.max_len = 16;
    config_.lora.rank = 2;
    config_.vat.epochs = 2;
    config_.vat.batch_size = 2;
    config_.vat.ascent_steps = 1;
    config_.pretrain.epochs = 1;
    config_.data.vocab_max = 24;
    config_.decode.max_new_tokens = 6;
    config_.paths.corpus = (dir_ / "corpus.txt").string();
    config_.paths.stopwords_dir = (dir_ / "stop").string();
    config_.paths.checkpoint_dir = (dir_ / "run").string();
    config_.PropagateSeed();
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string P(const std::string& name) const { return (dir_ / name).string(); }

  fs::path dir_;
  RunConfig config_;
};

TEST_F(PipelineTest, BuildVocabAndCorrupt) {
  const VocabStats stats =
      CmdBuildVocab(config_.paths.corpus, TokenizeMode::kWhitespace, 10, P("v.txt"));
  EXPECT_EQ(stats.entries, 10);
  EXPECT_EQ(stats.tokens, 23);
  EXPECT_LT(stats.covered, stats.tokens);
  config_.paths.vocab = P("v.txt");
  config_.corruption.shuffle_prob = 0.0;
  EXPECT_EQ(CmdCorrupt(config_, config_.paths.corpus, P("pairs.jsonl")), 4);
  const std::string jsonl = ReadFile(P("pairs.jsonl"));
  // Stopwords gone from the source, kept in the target.
  EXPECT_NE(jsonl.find("\"source\":\"cat <unk> on <unk>\",\"target\":\"the cat"),
            std::string::npos)
      << jsonl;
  config_.paths.vocab = P("missing.txt");
  EXPECT_EQ(KindOf([&] { CmdCorrupt(config_, config_.paths.corpus, P("x")); }),
            ErrorKind::kIo);
}

TEST_F(PipelineTest, TrainWritesCheckpointsAndIsDeterministic) {
  const TrainSummary s = CmdTrain(config_);
  EXPECT_EQ(s.epochs, 2);
  EXPECT_EQ(s.sequences, 4);
  for (const char* f : {"epoch-000.ckpt", "epoch-001.ckpt", "epoch-002.ckpt",
                        "final.ckpt", "history.csv"}) {
    EXPECT_TRUE(fs::exists(dir_ / "run" / f)) << f;
  }
  EXPECT_FALSE(fs::exists(dir_ / "run" / ".lock"));
  const std::string first = ReadFile(s.final_checkpoint);
  const std::string history = ReadFile(s.history);
  const Checkpoint fin = LoadCheckpoint(s.final_checkpoint);
  EXPECT_TRUE(fin.final);
  EXPECT_EQ(fin.epoch, 2);
  EXPECT_FALSE(LoadCheckpoint((dir_ / "run" / "epoch-002.ckpt").string()).final);

  fs::remove_all(dir_ / "run");
  const TrainSummary again = CmdTrain(config_);
  EXPECT_EQ(ReadFile(again.final_checkpoint), first);
  EXPECT_EQ(ReadFile(again.history), history);

  // Resume for zero more epochs: tensors unchanged.
  RunConfig zero = config_;
  zero.vat.epochs = 0;
  zero.paths.checkpoint_dir = P("resumed");
  const TrainSummary r = CmdTrain(zero, s.final_checkpoint);
  const Checkpoint back = LoadCheckpoint(r.final_checkpoint);
  EXPECT_TRUE(back.params.embed == fin.params.embed);
  EXPECT_TRUE(back.adapters.query[0].b == fin.adapters.query[0].b);
  EXPECT_EQ(back.epoch, 2);
}

TEST_F(PipelineTest, ZeroEpochsKeepsInitialization) {
  config_.vat.epochs = 0;
  const TrainSummary s = CmdTrain(config_);
  const Checkpoint init = LoadCheckpoint((dir_ / "run" / "epoch-000.ckpt").string());
  const Checkpoint fin = LoadCheckpoint(s.final_checkpoint);
  EXPECT_TRUE(init.adapters.value[0].a == fin.adapters.value[0].a);
  EXPECT_TRUE(fin.adapters.value[0].b.isZero(0));
}

TEST_F(PipelineTest, TrainRefusesLockedDirectoryAndMissingCorpus) {
  fs::create_directories(dir_ / "run");
  {
    DirectoryLock held((dir_ / "run").string());
    EXPECT_EQ(KindOf([&] { CmdTrain(config_); }), ErrorKind::kLocked);
  }
  config_.paths.corpus = P("nope.txt");
  EXPECT_EQ(KindOf([&] { CmdTrain(config_); }), ErrorKind::kIo);
}

TEST_F(PipelineTest, ParaphraseAndEvaluate) {
  const Checkpoint model = LoadCheckpoint(CmdTrain(config_).final_checkpoint);
  EXPECT_TRUE(CmdParaphrase(model, config_, {}).lines.empty());
  std::string too_long = "cat";
  for (int i = 0; i < 20; ++i) too_long += " cat";
  const std::vector<std::string> in = {"the cat sat", "", too_long};
  const ParaphraseResult a = CmdParaphrase(model, config_, in);
  const ParaphraseResult b = CmdParaphrase(model, config_, in);
  ASSERT_EQ(a.lines.size(), 3u);
  EXPECT_EQ(a.lines, b.lines);
  EXPECT_EQ(a.lines[1], "");
  // Too long for the model: echoed with a warning.
  EXPECT_EQ(a.lines[2], in[2]);
  ASSERT_EQ(a.warnings.size(), 1u);
  EXPECT_NE(a.warnings[0].find("line 3"), std::string::npos);

  WriteFile(P("eval.jsonl"),
            "{\"input\": \"the cat sat\", \"candidate\": \"the cat sat\", "
            "\"lang\": \"en\"}\n"
            "{\"input\": \"a dog ran\", \"references\": [\"a dog ran\"], "
            "\"lang\": \"en\"}\n"
            "{\"input\": \"the bird sang\", \"candidate\": \"the bird sang\", "
            "\"lang\": \"de\"}\n");
  const std::string table = CmdEvaluate(model, config_, P("eval.jsonl"), P("out"));
  EXPECT_FALSE(table.empty());
  const CsvTable agg = ParseCsv(ReadFile(P("out.csv")));
  ASSERT_EQ(agg.rows.size(), 2u);
  EXPECT_EQ(agg.rows[0][0], "de");
  // Identity record: self_bleu 1, self_ter 0.
  EXPECT_EQ(agg.rows[0][4], "1.000000");
  EXPECT_EQ(agg.rows[0][6], "0.000000");
  EXPECT_TRUE(fs::exists(P("out.records.csv")));
  EXPECT_TRUE(fs::exists(P("out.candidates.jsonl")));
  const std::string csv = ReadFile(P("out.csv"));
  CmdEvaluate(model, config_, P("eval.jsonl"), P("out2"));
  EXPECT_EQ(ReadFile(P("out2.csv")), csv);
  EXPECT_EQ(ReadFile(P("out2.candidates.jsonl")),
            ReadFile(P("out.candidates.jsonl")));

  WriteFile(P("bad.jsonl"), "{\"input\": \"x\", \"lang\": \"en\"}\nnot json\n");
  EXPECT_EQ(KindOf([&] { CmdEvaluate(model, config_, P("bad.jsonl"), P("o")); }),
            ErrorKind::kMalformedData);
}

TEST_F(PipelineTest, ReportMergesRunsAndChecksSchemas) {
  const std::string h1 = CmdTrain(config_).history;
  config_.paths.checkpoint_dir = P("run2");
  config_.vat.alpha = 0.0;
  const std::string h2 = CmdTrain(config_).history;

  CmdReport({h1}, P("one"));
  const CsvTable one = ParseCsv(ReadFile(P("one.csv")));
  EXPECT_EQ(one.header, (std::vector<std::string>{
                            "epoch", "phase", "loss_rec", "loss_vadv",
                            "delta_norm", "grad_norm"}));
  EXPECT_EQ(one.rows.size(), 2u);

  CmdReport({h1, h2}, P("two"));
  const CsvTable two = ParseCsv(ReadFile(P("two.csv")));
  EXPECT_EQ(two.header.size(), 11u);
  EXPECT_EQ(two.header[1], "phase_run");
  EXPECT_EQ(two.header[6], "phase_run2");

  WriteFile(P("eval.jsonl"),
            "{\"input\": \"the cat sat\", \"candidate\": \"cat sat\", "
            "\"lang\": \"en\"}\n");
  const Checkpoint model = LoadCheckpoint((dir_ / "run" / "final.ckpt").string());
  CmdEvaluate(model, config_, P("eval.jsonl"), P("m1"));
  CmdEvaluate(model, config_, P("eval.jsonl"), P("m2"));
  CmdReport({P("m1.csv"), P("m2.csv")}, P("metrics"));
  const CsvTable m = ParseCsv(ReadFile(P("metrics.csv")));
  EXPECT_EQ(m.header[0], "run");
  ASSERT_EQ(m.rows.size(), 2u);
  EXPECT_EQ(m.rows[0][0], "m1");
  EXPECT_EQ(m.rows[1][0], "m2");

  EXPECT_EQ(KindOf([&] { CmdReport({h1, P("m1.csv")}, P("x")); }),
            ErrorKind::kSchemaMismatch);
  WriteFile(P("odd.csv"), "a,b\n1,2\n");
  EXPECT_EQ(KindOf([&] { CmdReport({P("odd.csv")}, P("x")); }),
            ErrorKind::kSchemaMismatch);
  EXPECT_EQ(KindOf([&] { CmdReport({}, P("x")); }), ErrorKind::kInvalidArgument);
}

}  // namespace
}  // namespace paravat
