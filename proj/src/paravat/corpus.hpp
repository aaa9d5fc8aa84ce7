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

#ifndef PARAVAT_CORPUS_HPP_
#define PARAVAT_CORPUS_HPP_

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "paravat/common.hpp"

namespace paravat {

enum class TokenizeMode { kWhitespace, kChar };

TokenizeMode ParseTokenizeMode(std::string_view name);
const char* TokenizeModeName(TokenizeMode mode);

// Token table with four reserved entries at fixed ids. Immutable once built.
class Vocab {
 public:
  static constexpr TokenId kUnk = 0;
  static constexpr TokenId kSep = 1;
  static constexpr TokenId kEos = 2;
  static constexpr TokenId kPad = 3;
  static constexpr int kNumReserved = 4;

  static constexpr std::string_view kUnkSurface = "<unk>";
  static constexpr std::string_view kSepSurface = "\n";
  static constexpr std::string_view kEosSurface = "<eos>";
  static constexpr std::string_view kPadSurface = "<pad>";

  // `surfaces` are the non-reserved entries in id order (ids start at 4).
  Vocab(TokenizeMode mode, std::vector<std::string> surfaces,
        std::vector<int64_t> counts);

  TokenizeMode mode() const { return mode_; }
  int size() const { return static_cast<int>(surfaces_.size()); }
  TokenId Lookup(std::string_view surface) const;
  bool Contains(std::string_view surface) const;
  const std::string& Surface(TokenId id) const;
  int64_t Count(TokenId id) const { return counts_.at(id); }
  static bool IsReserved(TokenId id) { return id >= 0 && id < kNumReserved; }

  std::string Serialize() const;
  static Vocab Parse(std::string_view text);
  void Save(const std::string& path) const;
  static Vocab Load(const std::string& path);

  friend bool operator==(const Vocab& a, const Vocab& b) {
    return a.mode_ == b.mode_ && a.surfaces_ == b.surfaces_ &&
           a.counts_ == b.counts_;
  }

 private:
  TokenizeMode mode_;
  std::vector<std::string> surfaces_;
  std::vector<int64_t> counts_;
  std::unordered_map<std::string, TokenId> index_;
};

// A sentence as vocabulary ids with the original surfaces kept alongside.
struct TokenSeq {
  std::vector<TokenId> ids;
  std::vector<std::string> surfaces;

  size_t size() const { return ids.size(); }
  bool empty() const { return ids.empty(); }
  void push_back(TokenId id, std::string surface) {
    ids.push_back(id);
    surfaces.push_back(std::move(surface));
  }
  friend bool operator==(const TokenSeq&, const TokenSeq&) = default;
};

// Splits a line into surfaces without consulting a vocabulary.
std::vector<std::string> SplitSurfaces(std::string_view text, TokenizeMode mode);

// Throws EmptyInput when nothing but whitespace remains.
TokenSeq Tokenize(std::string_view text, const Vocab& vocab, TokenizeMode mode);

// Most frequent surfaces up to max_size - 4, ties broken by byte order.
Vocab BuildVocab(const std::vector<std::string>& lines, TokenizeMode mode,
                 int max_size);

// Per-language stopword lists, matched on lowercased surfaces.
class StopwordSet {
 public:
  void Add(const std::string& lang, std::string_view surface);
  bool Contains(const std::string& lang, std::string_view surface) const;
  size_t Size(const std::string& lang) const;
  // Reads `<dir>/<lang>.txt`, one surface per line. A missing file leaves the
  // language empty and returns false.
  bool LoadLanguage(const std::string& dir, const std::string& lang);

 private:
  std::map<std::string, std::unordered_set<std::string>> sets_;
};

struct CorruptionConfig {
  double shuffle_prob = 0.33;
  uint64_t seed = 0;

  void Validate() const;
};

// Removes stopwords, then with probability shuffle_prob applies one uniform
// permutation to the whole remainder. If removal leaves nothing the target is
// returned unmodified.
TokenSeq Corrupt(const TokenSeq& target, const StopwordSet& stopwords,
                 const std::string& lang, const CorruptionConfig& config,
                 Rng& rng);

struct TrainingPair {
  TokenSeq source;
  TokenSeq target;
};

// tokens = source ++ [SEP] ++ target ++ [EOS]. loss_mask[i] is set for every
// position after the separator; those are the tokens the model must predict.
struct PackedSequence {
  std::vector<TokenId> tokens;
  size_t sep_index = 0;
  std::vector<uint8_t> loss_mask;

  size_t size() const { return tokens.size(); }
  // Mask over logit rows: row i predicts token i + 1, so row i is active when
  // loss_mask[i + 1] is set. Length equals size().
  std::vector<uint8_t> PredictionRows() const;
  std::vector<TokenId> Source() const;
  // Target tokens without the trailing EOS.
  std::vector<TokenId> Target() const;
};

PackedSequence Pack(const TrainingPair& pair, int max_len);

// Prompt used at inference: source ++ [SEP].
std::vector<TokenId> PromptFor(const TokenSeq& source);

std::vector<std::string> ReadLines(const std::string& path);

}  // namespace paravat

#endif  // PARAVAT_CORPUS_HPP_
