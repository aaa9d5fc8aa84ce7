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


// Config, checkpoint and file-format round trips.

#include <gtest/gtest.h>

#include <unistd.h>

#include <cstring>
#include <filesystem>
#include <functional>
#include <string>

#include "paravat/checkpoint.hpp"
#include "paravat/config.hpp"
#include "paravat/io.hpp"

namespace paravat {
namespace {

namespace fs = std::filesystem;

fs::path ScratchDir(const std::string& name) {
  fs::path p = fs::temp_directory_path() /
               ("paravat_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

ErrorKind KindOf(const std::function<void()>& fn) {
  try {
    fn();
  } catch (const Error& e) {
    return e.kind();
  }
  ADD_FAILURE() << "no error raised";
  return ErrorKind::kInvalidArgument;
}

TEST(Config, DefaultsRoundTrip) {
  RunConfig c;
  c.PropagateSeed();
  const std::string text = SerializeConfig(c);
  EXPECT_EQ(SerializeConfig(ParseConfig(text)), text);
}

TEST(Config, ParsesSectionsAndPropagatesSeed) {
  RunConfig c = ParseConfig(
      "# comment\n"
      "seed = 42\n"
      "[model]\n"
      "d_model = 32\n"
      "heads = 2\n"
      "[vat]\n"
      "epsilon = 0.25\n"
      "alpha = 0\n"
      "[decode]\n"
      "strategy = top-k\n"
      "[paths]\n"
      "corpus = /tmp/x.txt\n");
  EXPECT_EQ(c.model.d_model, 32);
  EXPECT_EQ(c.model.heads, 2);
  EXPECT_DOUBLE_EQ(c.vat.epsilon, 0.25);
  EXPECT_DOUBLE_EQ(c.vat.alpha, 0.0);
  EXPECT_EQ(c.decode.strategy, DecodeStrategy::kTopK);
  EXPECT_EQ(c.paths.corpus, "/tmp/x.txt");
  EXPECT_EQ(c.seed, 42u);
  EXPECT_EQ(c.vat.seed, SubstreamSeed(42, "vat"));
  EXPECT_NE(c.vat.seed, c.decode.seed);
  // Odd-looking doubles survive the text form exactly.
  c.vat.lr = 0.1 + 0.2;
  EXPECT_EQ(ParseConfig(SerializeConfig(c)).vat.lr, c.vat.lr);
}

TEST(Config, RejectsUnknownKeysAndBadValues) {
  EXPECT_EQ(KindOf([] { ParseConfig("[model]\nwidth = 3\n"); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([] { ParseConfig("[nope]\n"); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([] { ParseConfig("[model]\nd_model = abc\n"); }),
            ErrorKind::kInvalidArgument);
  EXPECT_EQ(KindOf([] { ParseConfig("lr = 3\n"); }),
            ErrorKind::kInvalidArgument);
  try {
    ParseConfig("[model]\n\nwidth = 3\n");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 3"), std::string::npos);
  }
  RunConfig c;
  c.data.vocab_max = 200;
  EXPECT_THROW(c.Validate(), Error);
  EXPECT_EQ(KindOf([] { LoadConfig("/nonexistent/paravat.cfg"); }),
            ErrorKind::kIo);
}

Checkpoint SmallCheckpoint() {
  Checkpoint c;
  c.config.model.vocab_size = 16;
  c.config.model.d_model = 8;
  c.config.model.layers = 2;
  c.config.model.heads = 2;
  c.config.model.d_ff = 16;
  c.config.model.max_len = 12;
  c.config.lora.rank = 2;
  c.config.data.vocab_max = 16;
  c.vocab = BuildVocab({"a b c", "b c d"}, TokenizeMode::kWhitespace, 16);
  Rng rng(3);
  c.params = Parameters<float>::Init(c.config.model, rng);
  c.adapters = AdapterSet<float>::Create(c.config.model, c.config.lora, rng);
  // Non-zero B so both factors carry information.
  for (auto& a : c.adapters.query) a.b.setRandom();
  c.params.embed(0, 0) = -0.0f;
  c.params.embed(0, 1) = 1e-38f;  // subnormal
  c.history = "runs/a/history.csv";
  c.epoch = 7;
  c.final = true;
  return c;
}

void ExpectBitIdentical(const Checkpoint& a, const Checkpoint& b) {
  std::vector<const Mat<float>*> ta, tb;
  a.params.ForEach([&](const std::string&, const Mat<float>& m) { ta.push_back(&m); });
  a.adapters.ForEach([&](const std::string&, const Mat<float>& m) { ta.push_back(&m); });
  b.params.ForEach([&](const std::string&, const Mat<float>& m) { tb.push_back(&m); });
  b.adapters.ForEach([&](const std::string&, const Mat<float>& m) { tb.push_back(&m); });
  ASSERT_EQ(ta.size(), tb.size());
  for (size_t i = 0; i < ta.size(); ++i) {
    ASSERT_EQ(ta[i]->rows(), tb[i]->rows());
    ASSERT_EQ(ta[i]->cols(), tb[i]->cols());
    EXPECT_EQ(std::memcmp(ta[i]->data(), tb[i]->data(),
                          sizeof(float) * ta[i]->size()),
              0)
        << "tensor " << i;
  }
}

TEST(Checkpoint, RoundTripIsBitExact) {
  const Checkpoint c = SmallCheckpoint();
  const fs::path dir = ScratchDir("ckpt");
  const std::string path = (dir / "c.ckpt").string();
  SaveCheckpoint(c, path);
  const Checkpoint d = LoadCheckpoint(path);
  ExpectBitIdentical(c, d);
  EXPECT_EQ(d.vocab, c.vocab);
  EXPECT_EQ(d.history, c.history);
  EXPECT_EQ(d.epoch, 7);
  EXPECT_TRUE(d.final);
  EXPECT_EQ(d.adapters.query[0].scale, c.adapters.query[0].scale);
  EXPECT_EQ(SerializeConfig(d.config), SerializeConfig(c.config));
  // Saving the loaded copy reproduces the file byte for byte.
  EXPECT_EQ(SerializeCheckpoint(d), ReadFile(path));
  fs::remove_all(dir);
}

TEST(Checkpoint, RejectsOtherVersionsAndDamage) {
  const std::string bytes = SerializeCheckpoint(SmallCheckpoint());
  std::string other = bytes;
  other.replace(other.find(" 1\n"), 3, " 9\n");
  EXPECT_EQ(KindOf([&] { ParseCheckpoint(other); }),
            ErrorKind::kVersionMismatch);
  EXPECT_EQ(KindOf([&] { ParseCheckpoint(bytes.substr(0, bytes.size() - 5)); }),
            ErrorKind::kMalformedData);
  EXPECT_EQ(KindOf([&] { ParseCheckpoint("hello\n"); }),
            ErrorKind::kMalformedData);
  EXPECT_EQ(KindOf([&] { ParseCheckpoint(""); }), ErrorKind::kMalformedData);
  EXPECT_EQ(KindOf([] { LoadCheckpoint("/nonexistent/x.ckpt"); }),
            ErrorKind::kIo);
}

TEST(Checkpoint, DirectoryLockIsExclusive) {
  const fs::path dir = ScratchDir("lock");
  {
    DirectoryLock first(dir.string());
    EXPECT_EQ(KindOf([&] { DirectoryLock second(dir.string()); }),
              ErrorKind::kLocked);
  }
  DirectoryLock again(dir.string());
  SUCCEED();
  fs::remove_all(dir);
}

TEST(Io, HistoryCsvRoundTrip) {
  std::vector<HistoryRow> rows = {
      {1, 1, 2.5, 0.125, 1.0, 3.25, AscentPhase::kPgd},
      {2, 2, 1.0 / 3.0, 0.01, 0.5, 1e-7, AscentPhase::kPnm}};
  const std::string csv = HistoryToCsv(rows);
  EXPECT_EQ(csv.substr(0, csv.find('\n')), kHistoryHeader);
  const auto back = ParseHistoryCsv(csv);
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[1].phase, AscentPhase::kPnm);
  EXPECT_NEAR(back[1].loss_rec, 1.0 / 3.0, 1e-9);
  EXPECT_EQ(HistoryToCsv(back), csv);
  EXPECT_EQ(KindOf([] { ParseHistoryCsv("epoch,loss\n1,2\n"); }),
            ErrorKind::kSchemaMismatch);
}

TEST(Io, EvalJsonl) {
  const std::string text =
      "{\"input\": \"a b\", \"candidate\": \"b a\", \"references\": [\"a c\"], "
      "\"lang\": \"en\"}\n"
      "\n"
      "{\"input\": \"x\", \"lang\": \"de\"}\n";
  const auto records = ParseEvalJsonl(text);
  ASSERT_EQ(records.size(), 2u);
  EXPECT_EQ(*records[0].candidate, "b a");
  EXPECT_EQ(records[0].references.size(), 1u);
  EXPECT_FALSE(records[1].candidate.has_value());
  EXPECT_EQ(records[1].lang, "de");
  EXPECT_EQ(ParseEvalJsonl(EvalRecordsToJsonl(records)).size(), 2u);

  for (const std::string bad :
       {std::string("{\"input\": \"a\", \"lang\": \"en\"}\n{oops\n"),
        std::string("{\"lang\": \"en\"}\n"),
        std::string("{\"input\": 3, \"lang\": \"en\"}\n"),
        std::string("{\"input\": \"a\", \"lang\": \"en\", \"references\": \"a\"}\n"),
        std::string("[1, 2]\n")}) {
    EXPECT_EQ(KindOf([&] { ParseEvalJsonl(bad); }), ErrorKind::kMalformedData)
        << bad;
  }
  try {
    ParseEvalJsonl("{\"input\": \"a\", \"lang\": \"en\"}\n{oops\n");
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("line 2"), std::string::npos);
  }
}

TEST(Io, WriteFileIsAtomicAndReadable) {
  const fs::path dir = ScratchDir("io");
  const std::string p = (dir / "f.txt").string();
  WriteFile(p, "one\n");
  WriteFile(p, "two\n");
  EXPECT_EQ(ReadFile(p), "two\n");
  EXPECT_EQ(KindOf([&] { ReadFile((dir / "missing").string()); }),
            ErrorKind::kIo);
  const CsvTable t = ParseCsv("a,b\n1,2\n3,4\n");
  EXPECT_EQ(t.header, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.rows.size(), 2u);
  fs::remove_all(dir);
}

}  // namespace
}  // namespace paravat
