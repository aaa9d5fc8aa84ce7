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

#include "paravat/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "paravat/common.hpp"
#include "paravat/text.hpp"

namespace paravat {
namespace {

using NGramCounts = std::map<std::vector<std::string>, int>;

NGramCounts CountNGrams(const Words& words, int n) {
  NGramCounts counts;
  if (static_cast<int>(words.size()) < n) return counts;
  for (size_t i = 0; i + n <= words.size(); ++i) {
    ++counts[Words(words.begin() + i, words.begin() + i + n)];
  }
  return counts;
}

// Maps words to dense ids so the edit-distance loops compare integers.
std::pair<std::vector<int>, std::vector<int>> Intern(const Words& a,
                                                     const Words& b) {
  std::unordered_map<std::string, int> ids;
  auto map = [&](const Words& w) {
    std::vector<int> out;
    out.reserve(w.size());
    for (const auto& s : w) {
      auto [it, _] = ids.emplace(s, static_cast<int>(ids.size()));
      out.push_back(it->second);
    }
    return out;
  };
  auto x = map(a);
  auto y = map(b);
  return {std::move(x), std::move(y)};
}

int EditDistance(const std::vector<int>& a, const std::vector<int>& b,
                 std::vector<int>& row) {
  const size_t m = b.size();
  row.resize(m + 1);
  for (size_t j = 0; j <= m; ++j) row[j] = static_cast<int>(j);
  for (size_t i = 1; i <= a.size(); ++i) {
    int diag = row[0];
    row[0] = static_cast<int>(i);
    for (size_t j = 1; j <= m; ++j) {
      int up = row[j];
      int best = diag + (a[i - 1] == b[j - 1] ? 0 : 1);
      best = std::min(best, up + 1);
      best = std::min(best, row[j - 1] + 1);
      row[j] = best;
      diag = up;
    }
  }
  return row[m];
}

// Moves a[start, start+len) so it begins at index `dest` of the result.
void ApplyShift(const std::vector<int>& a, size_t start, size_t len,
                size_t dest, std::vector<int>& out) {
  out.clear();
  std::vector<int> rest;
  rest.reserve(a.size() - len);
  rest.insert(rest.end(), a.begin(), a.begin() + start);
  rest.insert(rest.end(), a.begin() + start + len, a.end());
  out.insert(out.end(), rest.begin(), rest.begin() + dest);
  out.insert(out.end(), a.begin() + start, a.begin() + start + len);
  out.insert(out.end(), rest.begin() + dest, rest.end());
}

std::string FormatValue(const std::optional<double>& v, double scale,
                        const char* fmt) {
  if (!v) return "";
  char buf[64];
  std::snprintf(buf, sizeof(buf), fmt, *v * scale);
  return buf;
}

}  // namespace

double Bleu(const Words& candidate, const std::vector<Words>& references,
            int max_n) {
  if (max_n < 1) Fail(ErrorKind::kInvalidArgument, "bleu: max_n must be >= 1");
  if (candidate.empty()) Fail(ErrorKind::kEmptySequence, "bleu: empty candidate");
  if (references.empty()) Fail(ErrorKind::kEmptySequence, "bleu: no references");
  for (const auto& ref : references) {
    if (ref.empty()) Fail(ErrorKind::kEmptySequence, "bleu: empty reference");
  }

  std::vector<double> matches(max_n), totals(max_n);
  bool any_zero = false;
  for (int n = 1; n <= max_n; ++n) {
    NGramCounts cand = CountNGrams(candidate, n);
    NGramCounts best;
    for (const auto& ref : references) {
      for (const auto& [gram, c] : CountNGrams(ref, n)) {
        int& slot = best[gram];
        slot = std::max(slot, c);
      }
    }
    int hit = 0;
    for (const auto& [gram, c] : cand) {
      auto it = best.find(gram);
      if (it != best.end()) hit += std::min(c, it->second);
    }
    int total = std::max(static_cast<int>(candidate.size()) - n + 1, 0);
    matches[n - 1] = hit;
    totals[n - 1] = total;
    if (hit == 0 || total == 0) any_zero = true;
  }
  if (matches[0] == 0) return 0.0;

  double log_sum = 0.0;
  for (int n = 1; n <= max_n; ++n) {
    double m = matches[n - 1], t = totals[n - 1];
    if (any_zero && n >= 2) {
      m += 1.0;
      t += 1.0;
    }
    log_sum += std::log(m / t);
  }

  // Closest reference length, shorter one on ties.
  const double c = static_cast<double>(candidate.size());
  size_t r = references[0].size();
  for (const auto& ref : references) {
    double d_new = std::abs(static_cast<double>(ref.size()) - c);
    double d_old = std::abs(static_cast<double>(r) - c);
    if (d_new < d_old || (d_new == d_old && ref.size() < r)) r = ref.size();
  }
  double bp = c >= static_cast<double>(r) ? 1.0 : std::exp(1.0 - r / c);
  double bleu = bp * std::exp(log_sum / max_n);
  return std::clamp(bleu, 0.0, 1.0);
}

double SelfBleu(const Words& candidate, const Words& input) {
  return Bleu(candidate, {input});
}

int Levenshtein(const Words& a, const Words& b) {
  auto [x, y] = Intern(a, b);
  std::vector<int> row;
  return EditDistance(x, y, row);
}

TerStats TerDetail(const Words& candidate, const Words& reference) {
  if (reference.empty()) Fail(ErrorKind::kEmptySequence, "ter: empty reference");
  auto [hyp, ref] = Intern(candidate, reference);
  std::vector<int> row, trial;
  const size_t n = hyp.size();

  // Greedy pass: take the shift that lowers the edit distance most, while it
  // lowers edits + shifts.
  TerStats greedy;
  std::vector<int> cur = hyp;
  int edits = EditDistance(cur, ref, row);
  while (edits > 1 && n > 1) {
    int best = edits;
    std::vector<int> best_seq;
    for (size_t start = 0; start < n; ++start) {
      for (size_t len = 1; start + len <= n; ++len) {
        for (size_t dest = 0; dest + len <= n; ++dest) {
          if (dest == start) continue;
          ApplyShift(cur, start, len, dest, trial);
          int e = EditDistance(trial, ref, row);
          if (e < best) {
            best = e;
            best_seq = trial;
          }
        }
      }
    }
    if (best + 1 >= edits) break;
    cur = std::move(best_seq);
    edits = best;
    ++greedy.shifts;
  }
  greedy.edits = edits;

  // Exact breadth-first search over shift sequences for short inputs. Shifts
  // keep the token multiset, so shifts + (bag-of-words distance) bounds every
  // descendant from below and prunes the frontier.
  TerStats best = greedy;
  int best_total = greedy.edits + greedy.shifts;
  std::map<int, int> bag;
  for (int t : hyp) ++bag[t];
  int common = 0;
  for (int t : ref) {
    auto it = bag.find(t);
    if (it != bag.end() && it->second > 0) {
      --it->second;
      ++common;
    }
  }
  const int bag_bound =
      static_cast<int>(std::max(hyp.size(), ref.size())) - common;
  std::set<std::vector<int>> seen{hyp};
  std::vector<std::vector<int>> frontier{hyp};
  size_t visited = 1;
  bool complete = true;
  for (int depth = 0; !frontier.empty(); ++depth) {
    if (depth + 1 + bag_bound >= best_total) break;
    std::vector<std::vector<int>> next;
    for (const auto& state : frontier) {
      for (size_t start = 0; start < n; ++start) {
        for (size_t len = 1; start + len <= n; ++len) {
          for (size_t dest = 0; dest + len <= n; ++dest) {
            if (dest == start) continue;
            ApplyShift(state, start, len, dest, trial);
            if (!seen.insert(trial).second) continue;
            int e = EditDistance(trial, ref, row);
            if (depth + 1 + e < best_total) {
              best_total = depth + 1 + e;
              best.shifts = depth + 1;
              best.edits = e;
            }
            next.push_back(trial);
            if (++visited > kTerExactStateBudget) complete = false;
          }
          if (!complete) break;
        }
        if (!complete) break;
      }
      if (!complete) break;
    }
    if (!complete) break;
    frontier = std::move(next);
  }

  best.rate = static_cast<double>(best.edits + best.shifts) /
              static_cast<double>(reference.size());
  return best;
}

double Ter(const Words& candidate, const Words& reference) {
  return TerDetail(candidate, reference).rate;
}

double SelfTer(const Words& candidate, const Words& input) {
  return Ter(candidate, input);
}

double IBleu(const Words& candidate, const std::vector<Words>& references,
             const Words& input, double alpha) {
  return alpha * Bleu(candidate, references) -
         (1.0 - alpha) * SelfBleu(candidate, input);
}

double LexicalDivergence(const Words& a, const Words& b) {
  size_t longest = std::max(a.size(), b.size());
  if (longest == 0) return 0.0;
  return static_cast<double>(Levenshtein(a, b)) / longest;
}

namespace {

Mat<double> HiddenStates(const Words& words, const SimilarityModel& model) {
  if (!model.params || !model.vocab) {
    Fail(ErrorKind::kInvalidArgument, "similarity model is not set");
  }
  size_t limit = static_cast<size_t>(model.params->config.max_len);
  std::vector<TokenId> ids;
  for (size_t i = 0; i < words.size() && i < limit; ++i) {
    ids.push_back(model.vocab->Lookup(words[i]));
  }
  auto trace = ForwardTokens<float>(ids, nullptr, *model.params,
                                    model.adapters);
  Mat<double> h = trace.hidden.cast<double>();
  for (Eigen::Index i = 0; i < h.rows(); ++i) {
    double norm = h.row(i).norm();
    if (norm > 0) h.row(i) /= norm;
  }
  return h;
}

}  // namespace

double EmbedSim(const Words& a, const Words& b, const SimilarityModel& model) {
  if (a.empty() || b.empty()) {
    Fail(ErrorKind::kEmptySequence, "embed_sim: empty token sequence");
  }
  Mat<double> ha = HiddenStates(a, model);
  Mat<double> hb = HiddenStates(b, model);
  Mat<double> sim = ha * hb.transpose();
  double precision = sim.rowwise().maxCoeff().mean();
  double recall = sim.colwise().maxCoeff().mean();
  if (precision + recall <= 0.0) return 0.0;
  double f1 = 2.0 * precision * recall / (precision + recall);
  return std::clamp(f1, -1.0, 1.0);
}

double BertIBleu(double sim, double self_bleu, double beta) {
  double diversity = 1.0 - self_bleu;
  if (sim <= 0.0 || diversity <= 0.0) return 0.0;
  sim = std::min(sim, 1.0);
  return (beta + 1.0) / (beta / sim + 1.0 / diversity);
}

double ParaScore(const Words& input, const Words& candidate,
                 const std::vector<Words>& references,
                 const SimilarityModel& model, double omega) {
  double sim;
  if (references.empty()) {
    sim = EmbedSim(candidate, input, model);
  } else {
    sim = -std::numeric_limits<double>::infinity();
    for (const auto& ref : references) {
      sim = std::max(sim, EmbedSim(candidate, ref, model));
    }
  }
  return sim + omega * LexicalDivergence(input, candidate);
}

TokenizeMode MetricConfig::ModeFor(const std::string& lang) const {
  return char_languages.count(lang) ? TokenizeMode::kChar
                                    : TokenizeMode::kWhitespace;
}

MetricValues EvaluateRecord(const EvalRecord& record,
                            const SimilarityModel& model,
                            const MetricConfig& config) {
  if (!record.candidate) {
    Fail(ErrorKind::kMalformedData, "record has no candidate");
  }
  if (text::Trim(record.input).empty() || text::Trim(*record.candidate).empty()) {
    Fail(ErrorKind::kEmptySequence, "record input and candidate must be non-empty");
  }
  TokenizeMode mode = config.ModeFor(record.lang);
  Words input = SplitSurfaces(record.input, mode);
  Words cand = SplitSurfaces(*record.candidate, mode);
  std::vector<Words> refs;
  for (const auto& r : record.references) refs.push_back(SplitSurfaces(r, mode));

  MetricValues v(MetricColumns().size());
  double self_bleu = SelfBleu(cand, input);
  double sim = EmbedSim(cand, input, model);
  v[1] = self_bleu;
  v[3] = SelfTer(cand, input);
  v[5] = sim;
  v[6] = BertIBleu(sim, self_bleu, config.bert_ibleu_beta);
  v[7] = ParaScore(input, cand, refs, model, config.parascore_omega);
  if (!refs.empty()) {
    double bleu = Bleu(cand, refs);
    double ter = std::numeric_limits<double>::infinity();
    for (const auto& r : refs) ter = std::min(ter, Ter(cand, r));
    v[0] = bleu;
    v[2] = ter;
    v[4] = config.ibleu_alpha * bleu - (1.0 - config.ibleu_alpha) * self_bleu;
  }
  return v;
}

MetricReport EvaluateCorpus(const std::vector<EvalRecord>& records,
                            const SimilarityModel& model,
                            const MetricConfig& config) {
  if (records.empty()) Fail(ErrorKind::kEmptyCorpus, "no evaluation records");
  MetricReport report;
  const size_t cols = MetricColumns().size();
  struct Acc {
    int records = 0, with_refs = 0;
    std::vector<double> sum;
    std::vector<int> count;
  };
  std::map<std::string, Acc> by_lang;
  for (const auto& rec : records) {
    MetricValues v = EvaluateRecord(rec, model, config);
    Acc& acc = by_lang[rec.lang];
    if (acc.sum.empty()) {
      acc.sum.assign(cols, 0.0);
      acc.count.assign(cols, 0);
    }
    ++acc.records;
    if (!rec.references.empty()) ++acc.with_refs;
    for (size_t c = 0; c < cols; ++c) {
      if (v[c]) {
        acc.sum[c] += *v[c];
        ++acc.count[c];
      }
    }
    report.record_langs.push_back(rec.lang);
    report.records.push_back(std::move(v));
  }
  for (const auto& [lang, acc] : by_lang) {
    LanguageAggregate agg;
    agg.lang = lang;
    agg.records = acc.records;
    agg.with_references = acc.with_refs;
    agg.means.resize(cols);
    for (size_t c = 0; c < cols; ++c) {
      if (acc.count[c] > 0) agg.means[c] = acc.sum[c] / acc.count[c];
    }
    report.languages.push_back(std::move(agg));
  }
  return report;
}

std::string AggregateCsv(const MetricReport& report) {
  std::ostringstream out;
  out << "lang,records,with_references";
  for (const auto& c : MetricColumns()) out << ',' << c;
  out << '\n';
  for (const auto& agg : report.languages) {
    out << agg.lang << ',' << agg.records << ',' << agg.with_references;
    for (const auto& v : agg.means) out << ',' << FormatValue(v, 1.0, "%.6f");
    out << '\n';
  }
  return out.str();
}

std::string RecordsCsv(const MetricReport& report) {
  std::ostringstream out;
  out << "index,lang";
  for (const auto& c : MetricColumns()) out << ',' << c;
  out << '\n';
  for (size_t i = 0; i < report.records.size(); ++i) {
    out << i << ',' << report.record_langs[i];
    for (const auto& v : report.records[i]) {
      out << ',' << FormatValue(v, 1.0, "%.6f");
    }
    out << '\n';
  }
  return out.str();
}

std::string RenderTable(const MetricReport& report, const std::string& title) {
  const auto& cols = MetricColumns();
  std::vector<std::string> header = {"lang", "n"};
  header.insert(header.end(), cols.begin(), cols.end());
  std::vector<std::vector<std::string>> rows;
  for (const auto& agg : report.languages) {
    std::vector<std::string> row = {agg.lang, std::to_string(agg.records)};
    for (const auto& v : agg.means) {
      std::string s = FormatValue(v, 100.0, "%.2f");
      row.push_back(s.empty() ? "-" : s);
    }
    rows.push_back(std::move(row));
  }
  std::vector<size_t> width(header.size());
  for (size_t c = 0; c < header.size(); ++c) {
    width[c] = header[c].size();
    for (const auto& r : rows) width[c] = std::max(width[c], r[c].size());
  }
  std::ostringstream out;
  if (!title.empty()) out << title << '\n';
  auto emit = [&](const std::vector<std::string>& r) {
    for (size_t c = 0; c < r.size(); ++c) {
      if (c) out << "  ";
      std::string pad(width[c] - r[c].size(), ' ');
      out << (c == 0 ? r[c] + pad : pad + r[c]);
    }
    out << '\n';
  };
  emit(header);
  size_t total = 0;
  for (auto w : width) total += w;
  out << std::string(total + 2 * (width.size() - 1), '-') << '\n';
  for (const auto& r : rows) emit(r);
  return out.str();
}

}  // namespace paravat
