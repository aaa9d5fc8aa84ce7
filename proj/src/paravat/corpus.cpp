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

#include "paravat/corpus.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <utility>

#include "paravat/text.hpp"

namespace paravat {

TokenizeMode ParseTokenizeMode(std::string_view name) {
  if (name == "whitespace") return TokenizeMode::kWhitespace;
  if (name == "char") return TokenizeMode::kChar;
  Fail(ErrorKind::kInvalidArgument,
       "unknown tokenize mode '" + std::string(name) + "'");
}

const char* TokenizeModeName(TokenizeMode mode) {
  return mode == TokenizeMode::kChar ? "char" : "whitespace";
}

Vocab::Vocab(TokenizeMode mode, std::vector<std::string> surfaces,
             std::vector<int64_t> counts)
    : mode_(mode) {
  if (surfaces.size() != counts.size()) {
    Fail(ErrorKind::kInvalidArgument, "vocab surfaces/counts length mismatch");
  }
  surfaces_ = {std::string(kUnkSurface), std::string(kSepSurface),
               std::string(kEosSurface), std::string(kPadSurface)};
  counts_.assign(kNumReserved, 0);
  for (size_t i = 0; i < surfaces.size(); ++i) {
    surfaces_.push_back(std::move(surfaces[i]));
    counts_.push_back(counts[i]);
  }
  for (size_t id = kNumReserved; id < surfaces_.size(); ++id) {
    const auto& s = surfaces_[id];
    if (s.empty()) Fail(ErrorKind::kInvalidArgument, "empty vocab surface");
    if (!index_.emplace(s, static_cast<TokenId>(id)).second) {
      Fail(ErrorKind::kInvalidArgument, "duplicate vocab surface '" + s + "'");
    }
  }
}

TokenId Vocab::Lookup(std::string_view surface) const {
  auto it = index_.find(std::string(surface));
  return it == index_.end() ? kUnk : it->second;
}

bool Vocab::Contains(std::string_view surface) const {
  return index_.count(std::string(surface)) > 0;
}

const std::string& Vocab::Surface(TokenId id) const {
  if (id < 0 || id >= size()) {
    Fail(ErrorKind::kVocabOverflow, "token id " + std::to_string(id) +
                                        " outside vocab of size " +
                                        std::to_string(size()));
  }
  return surfaces_[id];
}

std::string Vocab::Serialize() const {
  std::ostringstream out;
  out << "paravat-vocab 1\n";
  out << "mode " << TokenizeModeName(mode_) << "\n";
  out << "entries " << (surfaces_.size() - kNumReserved) << "\n";
  for (size_t id = kNumReserved; id < surfaces_.size(); ++id) {
    out << surfaces_[id] << '\t' << counts_[id] << '\n';
  }
  return out.str();
}

Vocab Vocab::Parse(std::string_view text) {
  std::istringstream in{std::string(text)};
  std::string line;
  auto bad = [](const std::string& why) {
    Fail(ErrorKind::kMalformedData, "vocab: " + why);
  };
  if (!std::getline(in, line) || line != "paravat-vocab 1") {
    bad("missing or unsupported header");
  }
  if (!std::getline(in, line) || line.rfind("mode ", 0) != 0) bad("no mode");
  const TokenizeMode mode = ParseTokenizeMode(line.substr(5));
  if (!std::getline(in, line) || line.rfind("entries ", 0) != 0) {
    bad("no entry count");
  }
  const size_t entries = std::stoull(line.substr(8));
  std::vector<std::string> surfaces;
  std::vector<int64_t> counts;
  for (size_t i = 0; i < entries; ++i) {
    if (!std::getline(in, line)) bad("truncated entry list");
    const auto tab = line.rfind('\t');
    if (tab == std::string::npos || tab == 0) bad("bad entry line");
    surfaces.push_back(line.substr(0, tab));
    counts.push_back(std::stoll(line.substr(tab + 1)));
  }
  return Vocab(mode, std::move(surfaces), std::move(counts));
}

void Vocab::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
  out << Serialize();
  if (!out) Fail(ErrorKind::kIo, "write failed for " + path);
}

Vocab Vocab::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return Parse(buf.str());
}

std::vector<std::string> SplitSurfaces(std::string_view text,
                                       TokenizeMode mode) {
  const std::vector<char32_t> cps = text::DecodeUtf8(text);
  std::vector<std::string> out;
  if (mode == TokenizeMode::kChar) {
    for (char32_t cp : cps) {
      if (text::IsSpace(cp)) continue;
      std::string s;
      text::AppendUtf8(cp, s);
      out.push_back(std::move(s));
    }
    return out;
  }
  size_t i = 0;
  while (i < cps.size()) {
    while (i < cps.size() && text::IsSpace(cps[i])) ++i;
    size_t end = i;
    while (end < cps.size() && !text::IsSpace(cps[end])) ++end;
    if (i == end) break;
    // Peel punctuation off both ends of the word, one token per character.
    size_t lo = i;
    size_t hi = end;
    while (lo < hi && text::IsPunct(cps[lo])) ++lo;
    while (hi > lo && text::IsPunct(cps[hi - 1])) --hi;
    for (size_t k = i; k < lo; ++k) {
      out.push_back(text::EncodeUtf8({cps[k]}));
    }
    if (lo < hi) {
      out.push_back(text::EncodeUtf8(
          std::vector<char32_t>(cps.begin() + lo, cps.begin() + hi)));
    }
    for (size_t k = hi; k < end; ++k) {
      out.push_back(text::EncodeUtf8({cps[k]}));
    }
    i = end;
  }
  return out;
}

TokenSeq Tokenize(std::string_view text, const Vocab& vocab,
                  TokenizeMode mode) {
  std::vector<std::string> surfaces = SplitSurfaces(text, mode);
  if (surfaces.empty()) {
    Fail(ErrorKind::kEmptyInput, "input is empty after trimming");
  }
  TokenSeq seq;
  for (auto& s : surfaces) {
    const TokenId id = vocab.Lookup(s);
    seq.push_back(id, std::move(s));
  }
  return seq;
}

Vocab BuildVocab(const std::vector<std::string>& lines, TokenizeMode mode,
                 int max_size) {
  if (max_size < Vocab::kNumReserved + 1) {
    Fail(ErrorKind::kInvalidArgument,
         "max_size must be at least " +
             std::to_string(Vocab::kNumReserved + 1));
  }
  std::unordered_map<std::string, int64_t> freq;
  for (const auto& line : lines) {
    for (auto& s : SplitSurfaces(line, mode)) ++freq[std::move(s)];
  }
  if (freq.empty()) Fail(ErrorKind::kEmptyCorpus, "corpus has no tokens");
  std::vector<std::pair<std::string, int64_t>> ranked(freq.begin(),
                                                      freq.end());
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });
  const size_t keep = std::min<size_t>(
      ranked.size(), static_cast<size_t>(max_size - Vocab::kNumReserved));
  std::vector<std::string> surfaces;
  std::vector<int64_t> counts;
  for (size_t i = 0; i < keep; ++i) {
    surfaces.push_back(ranked[i].first);
    counts.push_back(ranked[i].second);
  }
  return Vocab(mode, std::move(surfaces), std::move(counts));
}

void StopwordSet::Add(const std::string& lang, std::string_view surface) {
  sets_[lang].insert(text::ToLower(surface));
}

bool StopwordSet::Contains(const std::string& lang,
                           std::string_view surface) const {
  auto it = sets_.find(lang);
  if (it == sets_.end() || it->second.empty()) return false;
  return it->second.count(text::ToLower(surface)) > 0;
}

size_t StopwordSet::Size(const std::string& lang) const {
  auto it = sets_.find(lang);
  return it == sets_.end() ? 0 : it->second.size();
}

bool StopwordSet::LoadLanguage(const std::string& dir,
                               const std::string& lang) {
  std::ifstream in(dir + "/" + lang + ".txt", std::ios::binary);
  sets_[lang];
  if (!in) return false;
  std::string line;
  while (std::getline(in, line)) {
    const auto word = text::Trim(line);
    if (!word.empty()) Add(lang, word);
  }
  return true;
}

void CorruptionConfig::Validate() const {
  if (!(shuffle_prob >= 0.0 && shuffle_prob <= 1.0)) {
    Fail(ErrorKind::kInvalidArgument, "shuffle_prob must lie in [0, 1]");
  }
}

TokenSeq Corrupt(const TokenSeq& target, const StopwordSet& stopwords,
                 const std::string& lang, const CorruptionConfig& config,
                 Rng& rng) {
  config.Validate();
  if (target.empty()) Fail(ErrorKind::kEmptyInput, "empty target");
  TokenSeq kept;
  for (size_t i = 0; i < target.size(); ++i) {
    if (!stopwords.Contains(lang, target.surfaces[i])) {
      kept.push_back(target.ids[i], target.surfaces[i]);
    }
  }
  // The shuffle draw happens regardless of the fallback so that the stream
  // position after each sentence does not depend on the stopword list.
  const bool shuffle = rng.Bernoulli(config.shuffle_prob);
  if (kept.empty()) return target;
  if (shuffle) {
    for (size_t i = kept.size(); i > 1; --i) {
      const size_t j = rng.Index(i);
      std::swap(kept.ids[i - 1], kept.ids[j]);
      std::swap(kept.surfaces[i - 1], kept.surfaces[j]);
    }
  }
  return kept;
}

std::vector<uint8_t> PackedSequence::PredictionRows() const {
  std::vector<uint8_t> rows(tokens.size(), 0);
  for (size_t i = 0; i + 1 < tokens.size(); ++i) rows[i] = loss_mask[i + 1];
  return rows;
}

std::vector<TokenId> PackedSequence::Source() const {
  return {tokens.begin(), tokens.begin() + static_cast<long>(sep_index)};
}

std::vector<TokenId> PackedSequence::Target() const {
  return {tokens.begin() + static_cast<long>(sep_index) + 1, tokens.end() - 1};
}

PackedSequence Pack(const TrainingPair& pair, int max_len) {
  const size_t required = pair.source.size() + pair.target.size() + 2;
  if (required > static_cast<size_t>(max_len)) {
    Fail(ErrorKind::kSequenceTooLong,
         "packed sequence needs " + std::to_string(required) +
             " positions, max_len is " + std::to_string(max_len));
  }
  PackedSequence packed;
  packed.tokens = pair.source.ids;
  packed.sep_index = packed.tokens.size();
  packed.tokens.push_back(Vocab::kSep);
  packed.tokens.insert(packed.tokens.end(), pair.target.ids.begin(),
                       pair.target.ids.end());
  packed.tokens.push_back(Vocab::kEos);
  packed.loss_mask.assign(packed.tokens.size(), 0);
  for (size_t i = packed.sep_index + 1; i < packed.tokens.size(); ++i) {
    packed.loss_mask[i] = 1;
  }
  return packed;
}

std::vector<TokenId> PromptFor(const TokenSeq& source) {
  std::vector<TokenId> prompt = source.ids;
  prompt.push_back(Vocab::kSep);
  return prompt;
}

std::vector<std::string> ReadLines(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path);
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

}  // namespace paravat
