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

#ifndef PARAVAT_DECODE_HPP_
#define PARAVAT_DECODE_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "paravat/common.hpp"
#include "paravat/corpus.hpp"
#include "paravat/lora.hpp"
#include "paravat/tinylm.hpp"

namespace paravat {

enum class DecodeStrategy { kGreedy, kTopK };

DecodeStrategy ParseDecodeStrategy(std::string_view name);
const char* DecodeStrategyName(DecodeStrategy strategy);

struct DecodeConfig {
  DecodeStrategy strategy = DecodeStrategy::kGreedy;
  int top_k = 5;
  double temperature = 1.0;
  int max_new_tokens = 24;
  uint64_t seed = 0;
  // Ids at or above this are never produced; 0 means the whole model
  // vocabulary. Lets a model carry spare rows beyond the vocab file.
  int vocab_limit = 0;

  void Validate() const;
};

// Extends `prompt` (which must end with SEP) until EOS or the token budget
// and returns only the continuation, without the EOS. SEP and PAD are never
// produced.
template <typename T>
std::vector<TokenId> Generate(const Parameters<T>& params,
                              const AdapterSet<T>* adapters,
                              std::span<const TokenId> prompt,
                              const DecodeConfig& config, Rng& rng);

TokenSeq FromIds(std::span<const TokenId> ids, const Vocab& vocab);

// Whitespace mode joins with single spaces except around punctuation
// (closing punctuation attaches left, opening punctuation attaches right);
// char mode concatenates. UNK renders as "<unk>".
std::string Detokenize(const TokenSeq& tokens, TokenizeMode mode);

struct ParaphraseContext {
  const Parameters<float>* params = nullptr;
  const AdapterSet<float>* adapters = nullptr;
  const Vocab* vocab = nullptr;
  const StopwordSet* stopwords = nullptr;
  TokenizeMode mode = TokenizeMode::kWhitespace;
  CorruptionConfig corruption;
  DecodeConfig decode;
};

// tokenize -> corrupt -> prompt with SEP -> generate -> detokenize. The
// token budget is capped so prompt plus continuation fits the model.
std::string Paraphrase(std::string_view text, const std::string& lang,
                       const ParaphraseContext& ctx, Rng& corrupt_rng,
                       Rng& decode_rng);

}  // namespace paravat

#endif  // PARAVAT_DECODE_HPP_
