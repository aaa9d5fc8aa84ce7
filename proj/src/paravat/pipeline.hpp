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

#ifndef PARAVAT_PIPELINE_HPP_
#define PARAVAT_PIPELINE_HPP_

#include <functional>
#include <string>
#include <vector>

#include "paravat/checkpoint.hpp"
#include "paravat/config.hpp"
#include "paravat/io.hpp"
#include "paravat/metrics.hpp"

namespace paravat {

// Progress lines for the user; the commands never print on their own.
using LogFn = std::function<void(const std::string&)>;

struct VocabStats {
  int entries = 0;
  long tokens = 0;
  long covered = 0;  // corpus tokens that map to a non-UNK id
  double Coverage() const { return tokens ? 100.0 * covered / tokens : 0.0; }
};

VocabStats CmdBuildVocab(const std::string& corpus, TokenizeMode mode,
                         int max_size, const std::string& out);

// Corrupts every corpus line into a (source, target) pair and writes JSONL.
// Requires paths.vocab so tokenization matches training.
int CmdCorrupt(const RunConfig& config, const std::string& corpus,
               const std::string& out);

struct TrainSummary {
  std::string final_checkpoint;
  std::string history;
  int epochs = 0;
  int sequences = 0;
  int skipped = 0;  // pairs longer than max_len
};

// Builds (or loads) the vocabulary, corrupts and packs the corpus,
// pretrains the base when pretrain.epochs > 0, then runs adversarial LoRA
// training. Writes epoch-NNN.ckpt after every epoch (epoch-000 is the
// initialization), final.ckpt at the end and history.csv, all under
// paths.checkpoint_dir. With `resume` set, base, adapters and vocabulary come
// from that checkpoint and pretraining is skipped.
TrainSummary CmdTrain(const RunConfig& config, const std::string& resume = "",
                      const LogFn& log = {});

struct ParaphraseResult {
  std::vector<std::string> lines;
  std::vector<std::string> warnings;
};

// One output per input line. Empty input lines stay empty; lines that fail
// are echoed unchanged with a warning.
ParaphraseResult CmdParaphrase(const Checkpoint& model, const RunConfig& config,
                               const std::vector<std::string>& inputs);

// Generates missing candidates, computes every metric and writes
// <prefix>.csv (per language), <prefix>.records.csv,
// <prefix>.candidates.jsonl and <prefix>.txt (rendered table). Returns the
// table.
std::string CmdEvaluate(const Checkpoint& model, const RunConfig& config,
                        const std::string& eval_path,
                        const std::string& out_prefix);

// Merges training histories (per-epoch means, one column group per run) or
// evaluation aggregate CSVs (one row per run and language). All inputs must
// share one schema. Writes <prefix>.csv and <prefix>.txt; returns the table.
std::string CmdReport(const std::vector<std::string>& inputs,
                      const std::string& out_prefix);

}  // namespace paravat

#endif  // PARAVAT_PIPELINE_HPP_
