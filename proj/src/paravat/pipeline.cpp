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


#include "paravat/pipeline.hpp"

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>

#include "paravat/advtrain.hpp"
#include "paravat/corpus.hpp"
#include "paravat/decode.hpp"
#include "paravat/pretrain.hpp"
#include "paravat/text.hpp"

namespace paravat {

namespace fs = std::filesystem;

namespace {

void Log(const LogFn& log, const std::string& line) {
  if (log) log(line);
}

std::string Fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", digits, v);
  return buf;
}

std::string EpochPath(const std::string& dir, int epoch) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "epoch-%03d.ckpt", epoch);
  return (fs::path(dir) / buf).string();
}

StopwordSet LoadStopwords(const std::string& dir,
                          const std::set<std::string>& langs) {
  StopwordSet set;
  if (dir.empty()) return set;
  for (const auto& lang : langs) set.LoadLanguage(dir, lang);
  return set;
}

Vocab VocabFor(const RunConfig& config, const std::vector<std::string>& lines) {
  if (!config.paths.vocab.empty() && fs::exists(config.paths.vocab)) {
    return Vocab::Load(config.paths.vocab);
  }
  return BuildVocab(lines, config.data.tokenize, config.data.vocab_max);
}

void CheckVocabFits(const Vocab& vocab, const ModelConfig& model) {
  if (vocab.size() > model.vocab_size) {
    Fail(ErrorKind::kShape, "vocabulary has " + std::to_string(vocab.size()) +
                                " entries but model.vocab_size is " +
                                std::to_string(model.vocab_size));
  }
}

}  // namespace

VocabStats CmdBuildVocab(const std::string& corpus, TokenizeMode mode,
                         int max_size, const std::string& out) {
  RequirePath(corpus, "corpus");
  const std::vector<std::string> lines = ReadLines(corpus);
  const Vocab vocab = BuildVocab(lines, mode, max_size);
  VocabStats stats;
  stats.entries = vocab.size();
  for (const auto& line : lines) {
    for (const auto& s : SplitSurfaces(line, mode)) {
      ++stats.tokens;
      if (vocab.Contains(s)) ++stats.covered;
    }
  }
  WriteFile(out, vocab.Serialize());
  return stats;
}

int CmdCorrupt(const RunConfig& config, const std::string& corpus,
               const std::string& out) {
  config.Validate();
  RequirePath(corpus, "corpus");
  RequirePath(config.paths.vocab, "vocabulary (paths.vocab)");
  const Vocab vocab = Vocab::Load(config.paths.vocab);
  const StopwordSet stopwords =
      LoadStopwords(config.paths.stopwords_dir, {config.data.lang});
  Rng rng(config.corruption.seed);
  std::vector<PairRecord> pairs;
  for (const auto& line : ReadLines(corpus)) {
    if (text::Trim(line).empty()) continue;
    const TokenSeq target = Tokenize(line, vocab, config.data.tokenize);
    const TokenSeq source =
        Corrupt(target, stopwords, config.data.lang, config.corruption, rng);
    pairs.push_back({Detokenize(source, config.data.tokenize),
                     Detokenize(target, config.data.tokenize),
                     config.data.lang});
  }
  WriteFile(out, PairsToJsonl(pairs));
  return static_cast<int>(pairs.size());
}

TrainSummary CmdTrain(const RunConfig& config, const std::string& resume,
                      const LogFn& log) {
  config.Validate();
  RequirePath(config.paths.corpus, "corpus (paths.corpus)");
  if (config.paths.checkpoint_dir.empty()) {
    Fail(ErrorKind::kInvalidArgument, "paths.checkpoint_dir is not set");
  }
  const std::string dir = config.paths.checkpoint_dir;
  fs::create_directories(dir);
  DirectoryLock lock(dir);

  std::optional<Checkpoint> start;
  if (!resume.empty()) {
    RequirePath(resume, "checkpoint to resume");
    start = LoadCheckpoint(resume);
    if (!(start->params.config == config.model)) {
      Fail(ErrorKind::kShape, "resumed checkpoint has a different model shape");
    }
  }

  const std::vector<std::string> lines = ReadLines(config.paths.corpus);
  Vocab vocab = start ? start->vocab : VocabFor(config, lines);
  CheckVocabFits(vocab, config.model);
  const StopwordSet stopwords =
      LoadStopwords(config.paths.stopwords_dir, {config.data.lang});

  Rng corrupt_rng(config.corruption.seed);
  std::vector<PackedSequence> data;
  std::vector<std::vector<TokenId>> sentences;
  TrainSummary summary;
  for (const auto& line : lines) {
    if (text::Trim(line).empty()) continue;
    const TokenSeq target = Tokenize(line, vocab, config.data.tokenize);
    const TokenSeq source =
        Corrupt(target, stopwords, config.data.lang, config.corruption,
                corrupt_rng);
    if (source.size() + target.size() + 2 >
        static_cast<size_t>(config.model.max_len)) {
      ++summary.skipped;
      continue;
    }
    data.push_back(Pack({source, target}, config.model.max_len));
    sentences.push_back(target.ids);
  }
  if (data.empty()) Fail(ErrorKind::kEmptyCorpus, "no usable training pairs");
  summary.sequences = static_cast<int>(data.size());
  Log(log, std::to_string(data.size()) + " training pairs, " +
               std::to_string(summary.skipped) + " skipped as too long, " +
               std::to_string(vocab.size()) + " vocabulary entries");

  Checkpoint ckpt;
  ckpt.config = config;
  ckpt.vocab = vocab;
  int epoch_offset = 0;
  if (start) {
    ckpt.params = start->params;
    ckpt.adapters = start->adapters;
    epoch_offset = start->epoch;
  } else {
    Rng init(SubstreamSeed(config.seed, "model"));
    ckpt.params = Parameters<float>::Init(config.model, init);
    if (config.pretrain.epochs > 0) {
      for (const auto& e :
           PretrainBase(ckpt.params, sentences, config.pretrain)) {
        Log(log, "pretrain epoch " + std::to_string(e.epoch) + " loss " +
                     Fixed(e.loss, 4));
      }
    }
    Rng lora_rng(SubstreamSeed(config.seed, "lora"));
    ckpt.adapters = AdapterSet<float>::Create(config.model, config.lora,
                                              lora_rng);
  }
  const std::string history_path = (fs::path(dir) / "history.csv").string();
  ckpt.history = history_path;
  ckpt.epoch = epoch_offset;
  SaveCheckpoint(ckpt, EpochPath(dir, epoch_offset));

  std::vector<HistoryRow> history;
  const EpochSink sink = [&](int epoch, const AdapterSet<float>& adapters,
                             const std::vector<HistoryRow>& rows) {
    history = rows;
    for (auto& r : history) r.epoch += epoch_offset;
    ckpt.adapters = adapters;
    ckpt.epoch = epoch + epoch_offset;
    SaveCheckpoint(ckpt, EpochPath(dir, ckpt.epoch));
    WriteFile(history_path, HistoryToCsv(history));
    const HistoryRow& last = rows.back();
    Log(log, "epoch " + std::to_string(ckpt.epoch) + " " +
                 AscentPhaseName(last.phase) + " loss_rec " +
                 Fixed(last.loss_rec, 4) + " loss_vadv " +
                 Fixed(last.loss_vadv, 4));
  };
  TrainResult result;
  try {
    result = Train(data, ckpt.params, ckpt.adapters, config.vat, sink);
  } catch (const Error& e) {
    if (e.kind() == ErrorKind::kDivergence) {
      Log(log, "training diverged; last good checkpoint is " +
                   EpochPath(dir, ckpt.epoch));
    }
    throw;
  }
  WriteFile(history_path, HistoryToCsv(history));
  ckpt.final = true;
  summary.final_checkpoint = (fs::path(dir) / "final.ckpt").string();
  SaveCheckpoint(ckpt, summary.final_checkpoint);
  summary.history = history_path;
  summary.epochs = result.epochs_completed;
  return summary;
}

ParaphraseResult CmdParaphrase(const Checkpoint& model, const RunConfig& config,
                               const std::vector<std::string>& inputs) {
  config.Validate();
  const StopwordSet stopwords =
      LoadStopwords(config.paths.stopwords_dir, {config.data.lang});
  ParaphraseContext ctx;
  ctx.params = &model.params;
  ctx.adapters = &model.adapters;
  ctx.vocab = &model.vocab;
  ctx.stopwords = &stopwords;
  ctx.mode = model.vocab.mode();
  ctx.corruption = config.corruption;
  ctx.decode = config.decode;
  Rng corrupt_rng(config.corruption.seed);
  Rng decode_rng(config.decode.seed);
  ParaphraseResult result;
  for (size_t i = 0; i < inputs.size(); ++i) {
    const std::string& line = inputs[i];
    if (text::Trim(line).empty()) {
      result.lines.push_back("");
      continue;
    }
    try {
      result.lines.push_back(
          Paraphrase(line, config.data.lang, ctx, corrupt_rng, decode_rng));
    } catch (const Error& e) {
      result.lines.push_back(line);
      result.warnings.push_back("line " + std::to_string(i + 1) + ": " +
                                e.what() + "; input echoed");
    }
  }
  return result;
}

std::string CmdEvaluate(const Checkpoint& model, const RunConfig& config,
                        const std::string& eval_path,
                        const std::string& out_prefix) {
  config.Validate();
  RequirePath(eval_path, "evaluation set");
  std::vector<EvalRecord> records = ParseEvalJsonl(ReadFile(eval_path));
  if (records.empty()) Fail(ErrorKind::kEmptyCorpus, "evaluation set is empty");

  std::set<std::string> langs;
  for (const auto& r : records) langs.insert(r.lang);
  const StopwordSet stopwords =
      LoadStopwords(config.paths.stopwords_dir, langs);
  ParaphraseContext ctx;
  ctx.params = &model.params;
  ctx.adapters = &model.adapters;
  ctx.vocab = &model.vocab;
  ctx.stopwords = &stopwords;
  ctx.mode = model.vocab.mode();
  ctx.corruption = config.corruption;
  ctx.decode = config.decode;
  Rng corrupt_rng(config.corruption.seed);
  Rng decode_rng(config.decode.seed);
  // Like the paraphrase command, a record whose generation fails or comes
  // out empty falls back to echoing its input.
  int fallbacks = 0;
  for (auto& r : records) {
    if (r.candidate) continue;
    std::string out;
    try {
      out = Paraphrase(r.input, r.lang, ctx, corrupt_rng, decode_rng);
    } catch (const Error&) {
      out.clear();
    }
    if (text::Trim(out).empty()) {
      out = r.input;
      ++fallbacks;
    }
    r.candidate = out;
  }
  const SimilarityModel sim{&model.params, &model.adapters, &model.vocab};
  const MetricReport report = EvaluateCorpus(records, sim, config.metrics);
  std::string table =
      RenderTable(report, fs::path(out_prefix).filename().string());
  if (fallbacks > 0) {
    table += std::to_string(fallbacks) +
             " generated candidate(s) were empty or failed; input echoed\n";
  }
  WriteFile(out_prefix + ".csv", AggregateCsv(report));
  WriteFile(out_prefix + ".records.csv", RecordsCsv(report));
  WriteFile(out_prefix + ".candidates.jsonl", EvalRecordsToJsonl(records));
  WriteFile(out_prefix + ".txt", table);
  return table;
}

namespace {

// Run label: the file stem, or the parent directory for history.csv files
// that all share one name.
std::vector<std::string> RunLabels(const std::vector<std::string>& inputs) {
  std::vector<std::string> labels;
  for (const auto& in : inputs) {
    const fs::path p(in);
    std::string label = p.stem().string();
    if (label == "history" && p.has_parent_path() &&
        !p.parent_path().filename().empty()) {
      label = p.parent_path().filename().string();
    }
    labels.push_back(label);
  }
  std::map<std::string, int> seen;
  for (const auto& l : labels) ++seen[l];
  std::map<std::string, int> used;
  for (auto& l : labels) {
    if (seen[l] > 1) l += "_" + std::to_string(++used[l]);
  }
  return labels;
}

std::string JoinCsv(const std::vector<std::string>& cells) {
  std::string out;
  for (size_t i = 0; i < cells.size(); ++i) {
    if (i) out += ',';
    out += cells[i];
  }
  return out;
}

std::string RenderGrid(const std::vector<std::string>& header,
                       const std::vector<std::vector<std::string>>& rows) {
  std::vector<size_t> width(header.size());
  for (size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
  for (const auto& r : rows) {
    for (size_t c = 0; c < r.size(); ++c) width[c] = std::max(width[c], r[c].size());
  }
  auto line = [&](const std::vector<std::string>& cells) {
    std::string out;
    for (size_t c = 0; c < cells.size(); ++c) {
      if (c) out += "  ";
      out += std::string(width[c] - cells[c].size(), ' ') + cells[c];
    }
    return out + "\n";
  };
  std::string out = line(header);
  size_t total = 0;
  for (size_t w : width) total += w;
  out += std::string(total + 2 * (width.size() - 1), '-') + "\n";
  for (const auto& r : rows) out += line(r);
  return out;
}

constexpr const char* kHistoryValueColumns[] = {"loss_rec", "loss_vadv",
                                                "delta_norm", "grad_norm"};

struct EpochMeans {
  double values[4] = {0, 0, 0, 0};
  std::string phase;
};

std::map<int, EpochMeans> PerEpoch(const std::vector<HistoryRow>& rows) {
  std::map<int, EpochMeans> out;
  std::map<int, int> counts;
  for (const auto& r : rows) {
    EpochMeans& m = out[r.epoch];
    m.values[0] += r.loss_rec;
    m.values[1] += r.loss_vadv;
    m.values[2] += r.delta_norm;
    m.values[3] += r.grad_norm;
    m.phase = AscentPhaseName(r.phase);
    ++counts[r.epoch];
  }
  for (auto& [epoch, m] : out) {
    for (double& v : m.values) v /= counts[epoch];
  }
  return out;
}

std::string Report(const std::vector<std::string>& header,
                   const std::vector<std::vector<std::string>>& rows,
                   const std::string& out_prefix) {
  std::string csv = JoinCsv(header) + "\n";
  for (const auto& r : rows) csv += JoinCsv(r) + "\n";
  const std::string table = RenderGrid(header, rows);
  WriteFile(out_prefix + ".csv", csv);
  WriteFile(out_prefix + ".txt", table);
  return table;
}

std::string HistoryReport(const std::vector<std::string>& inputs,
                          const std::vector<std::string>& texts,
                          const std::string& out_prefix) {
  const std::vector<std::string> labels = RunLabels(inputs);
  std::vector<std::map<int, EpochMeans>> runs;
  std::set<int> epochs;
  for (const auto& t : texts) {
    runs.push_back(PerEpoch(ParseHistoryCsv(t)));
    for (const auto& [e, m] : runs.back()) epochs.insert(e);
  }
  const bool single = runs.size() == 1;
  std::vector<std::string> header = {"epoch"};
  for (size_t r = 0; r < runs.size(); ++r) {
    const std::string suffix = single ? "" : "_" + labels[r];
    header.push_back("phase" + suffix);
    for (const char* c : kHistoryValueColumns) header.push_back(c + suffix);
  }
  std::vector<std::vector<std::string>> rows;
  for (int e : epochs) {
    std::vector<std::string> row = {std::to_string(e)};
    for (const auto& run : runs) {
      auto it = run.find(e);
      if (it == run.end()) {
        row.insert(row.end(), 5, "");
        continue;
      }
      row.push_back(it->second.phase);
      for (double v : it->second.values) row.push_back(Fixed(v, 6));
    }
    rows.push_back(std::move(row));
  }
  return Report(header, rows, out_prefix);
}

std::string MetricsReport(const std::vector<std::string>& inputs,
                          const std::vector<CsvTable>& tables,
                          const std::string& out_prefix) {
  const std::vector<std::string> labels = RunLabels(inputs);
  std::vector<std::string> header = {"run"};
  header.insert(header.end(), tables[0].header.begin(), tables[0].header.end());
  std::vector<std::vector<std::string>> rows;
  for (size_t t = 0; t < tables.size(); ++t) {
    for (const auto& r : tables[t].rows) {
      std::vector<std::string> row = {labels[t]};
      row.insert(row.end(), r.begin(), r.end());
      rows.push_back(std::move(row));
    }
  }
  return Report(header, rows, out_prefix);
}

}  // namespace

std::string CmdReport(const std::vector<std::string>& inputs,
                      const std::string& out_prefix) {
  if (inputs.empty()) {
    Fail(ErrorKind::kInvalidArgument, "report needs at least one input");
  }
  std::vector<std::string> texts;
  std::vector<CsvTable> tables;
  for (const auto& in : inputs) {
    RequirePath(in, "report input");
    texts.push_back(ReadFile(in));
    tables.push_back(ParseCsv(texts.back()));
  }
  const std::string first = JoinCsv(tables[0].header);
  for (size_t i = 1; i < tables.size(); ++i) {
    if (JoinCsv(tables[i].header) != first) {
      Fail(ErrorKind::kSchemaMismatch, inputs[i] + " has header '" +
                                           JoinCsv(tables[i].header) +
                                           "', expected '" + first + "'");
    }
  }
  if (first == kHistoryHeader) return HistoryReport(inputs, texts, out_prefix);
  std::vector<std::string> metric_header = {"lang", "records",
                                            "with_references"};
  for (const auto& c : MetricColumns()) metric_header.push_back(c);
  if (tables[0].header == metric_header) {
    return MetricsReport(inputs, tables, out_prefix);
  }
  Fail(ErrorKind::kSchemaMismatch,
       inputs[0] + " is neither a training history nor a metrics CSV");
}

}  // namespace paravat
