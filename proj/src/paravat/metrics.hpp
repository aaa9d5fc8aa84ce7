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

#ifndef PARAVAT_METRICS_HPP_
#define PARAVAT_METRICS_HPP_

#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "paravat/corpus.hpp"
#include "paravat/lora.hpp"
#include "paravat/tinylm.hpp"

namespace paravat {

using Words = std::vector<std::string>;

// Sentence BLEU with up to max_n-grams, clipped counts over all references,
// closest-reference brevity penalty and add-one smoothing of every n >= 2
// precision when any precision is zero. Result in [0, 1].
double Bleu(const Words& candidate, const std::vector<Words>& references,
            int max_n = 4);

double SelfBleu(const Words& candidate, const Words& input);

// Unit-cost edit distance.
int Levenshtein(const Words& a, const Words& b);

struct TerStats {
  int edits = 0;   // insertions + deletions + substitutions
  int shifts = 0;  // block moves of the candidate
  double rate = 0.0;
};

// Shifted states explored by the exact TER search before it gives up and
// keeps the best result found so far.
inline constexpr size_t kTerExactStateBudget = 20000;

// Translation edit rate. A greedy block-shift pass (apply the single shift
// that most lowers the edit distance while that lowers the total cost) gives
// an upper bound; an exact breadth-first search over shift sequences then
// runs until it proves optimality or exhausts kTerExactStateBudget states.
TerStats TerDetail(const Words& candidate, const Words& reference);
double Ter(const Words& candidate, const Words& reference);
double SelfTer(const Words& candidate, const Words& input);

double IBleu(const Words& candidate, const std::vector<Words>& references,
             const Words& input, double alpha = 0.7);

// Normalized token-level Levenshtein distance, in [0, 1].
double LexicalDivergence(const Words& a, const Words& b);

// Encoder used for the embedding-similarity proxy: the final hidden states of
// the trained model.
struct SimilarityModel {
  const Parameters<float>* params = nullptr;
  const AdapterSet<float>* adapters = nullptr;
  const Vocab* vocab = nullptr;
};

// Greedy-matching F1 over cosine similarities of token hidden states.
// Inputs longer than max_len are truncated.
double EmbedSim(const Words& a, const Words& b, const SimilarityModel& model);

// Weighted harmonic mean of similarity and diversity (1 - self_bleu).
double BertIBleu(double sim, double self_bleu, double beta = 4.0);

// sim + omega * divergence(input, candidate); sim is against the best
// reference when references exist, else against the input.
double ParaScore(const Words& input, const Words& candidate,
                 const std::vector<Words>& references,
                 const SimilarityModel& model, double omega = 0.05);

struct EvalRecord {
  std::string input;
  std::optional<std::string> candidate;
  std::vector<std::string> references;
  std::string lang;
};

struct MetricConfig {
  double ibleu_alpha = 0.7;
  double bert_ibleu_beta = 4.0;
  double parascore_omega = 0.05;
  // Languages tokenized per character; everything else splits on whitespace.
  std::set<std::string> char_languages = {"ja", "zh"};

  TokenizeMode ModeFor(const std::string& lang) const;
};

inline const std::vector<std::string>& MetricColumns() {
  static const std::vector<std::string> kColumns = {
      "bleu",  "self_bleu", "ter",           "self_ter",
      "ibleu", "sim_proxy", "bert_ibleu_proxy", "parascore_proxy"};
  return kColumns;
}

// Values follow MetricColumns(); reference-based metrics are absent for
// records without references.
using MetricValues = std::vector<std::optional<double>>;

struct LanguageAggregate {
  std::string lang;
  int records = 0;
  int with_references = 0;
  MetricValues means;
};

struct MetricReport {
  std::vector<std::string> record_langs;
  std::vector<MetricValues> records;
  std::vector<LanguageAggregate> languages;  // sorted by language code
};

MetricValues EvaluateRecord(const EvalRecord& record,
                            const SimilarityModel& model,
                            const MetricConfig& config);

// Records must carry candidates. Aggregates are per-language macro averages.
MetricReport EvaluateCorpus(const std::vector<EvalRecord>& records,
                            const SimilarityModel& model,
                            const MetricConfig& config);

// Aggregate and per-record CSVs on the internal [0, 1] scale; the table is
// scaled by 100 for display.
std::string AggregateCsv(const MetricReport& report);
std::string RecordsCsv(const MetricReport& report);
std::string RenderTable(const MetricReport& report,
                        const std::string& title = "");

}  // namespace paravat

#endif  // PARAVAT_METRICS_HPP_
