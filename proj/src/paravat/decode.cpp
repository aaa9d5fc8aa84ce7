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

#include "paravat/decode.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "paravat/text.hpp"

namespace paravat {

DecodeStrategy ParseDecodeStrategy(std::string_view name) {
  if (name == "greedy") return DecodeStrategy::kGreedy;
  if (name == "top-k" || name == "topk" || name == "top_k") {
    return DecodeStrategy::kTopK;
  }
  Fail(ErrorKind::kInvalidArgument,
       "unknown decode strategy '" + std::string(name) + "'");
}

const char* DecodeStrategyName(DecodeStrategy strategy) {
  return strategy == DecodeStrategy::kTopK ? "top-k" : "greedy";
}

void DecodeConfig::Validate() const {
  if (top_k < 1) Fail(ErrorKind::kInvalidArgument, "top_k must be >= 1");
  if (!(temperature > 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "temperature must be > 0");
  }
  if (max_new_tokens < 1) {
    Fail(ErrorKind::kInvalidArgument, "max_new_tokens must be >= 1");
  }
  if (vocab_limit < 0 ||
      (vocab_limit > 0 && vocab_limit <= Vocab::kNumReserved)) {
    Fail(ErrorKind::kInvalidArgument,
         "vocab_limit must be 0 or exceed the reserved ids");
  }
}

namespace {

bool Banned(TokenId id) { return id == Vocab::kSep || id == Vocab::kPad; }

template <typename T>
TokenId PickToken(const Eigen::Ref<const RowVec<T>>& logits,
                  const DecodeConfig& config, Rng& rng) {
  const Eigen::Index vocab =
      config.vocab_limit > 0
          ? std::min<Eigen::Index>(logits.cols(), config.vocab_limit)
          : logits.cols();
  if (config.strategy == DecodeStrategy::kGreedy) {
    TokenId best = -1;
    for (Eigen::Index j = 0; j < vocab; ++j) {
      if (Banned(static_cast<TokenId>(j))) continue;
      if (best < 0 || logits(j) > logits(best)) best = static_cast<TokenId>(j);
    }
    return best;
  }
  std::vector<TokenId> ids;
  for (Eigen::Index j = 0; j < vocab; ++j) {
    if (!Banned(static_cast<TokenId>(j))) ids.push_back(static_cast<TokenId>(j));
  }
  const size_t k = std::min<size_t>(ids.size(), config.top_k);
  std::partial_sort(ids.begin(), ids.begin() + static_cast<long>(k), ids.end(),
                    [&](TokenId a, TokenId b) {
                      if (logits(a) != logits(b)) return logits(a) > logits(b);
                      return a < b;
                    });
  ids.resize(k);
  std::vector<double> weights(k);
  const double top = static_cast<double>(logits(ids[0])) / config.temperature;
  for (size_t i = 0; i < k; ++i) {
    weights[i] =
        std::exp(static_cast<double>(logits(ids[i])) / config.temperature - top);
  }
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  double u = rng.Uniform() * total;
  for (size_t i = 0; i < k; ++i) {
    u -= weights[i];
    if (u < 0.0) return ids[i];
  }
  return ids[k - 1];
}

}  // namespace

template <typename T>
std::vector<TokenId> Generate(const Parameters<T>& params,
                              const AdapterSet<T>* adapters,
                              std::span<const TokenId> prompt,
                              const DecodeConfig& config, Rng& rng) {
  config.Validate();
  if (prompt.empty() || prompt.back() != Vocab::kSep) {
    Fail(ErrorKind::kInvalidArgument, "prompt must end with the separator");
  }
  const size_t needed = prompt.size() + static_cast<size_t>(config.max_new_tokens);
  if (needed > static_cast<size_t>(params.config.max_len)) {
    Fail(ErrorKind::kSequenceTooLong,
         "prompt of " + std::to_string(prompt.size()) + " plus " +
             std::to_string(config.max_new_tokens) +
             " new tokens exceeds max_len " +
             std::to_string(params.config.max_len));
  }
  std::vector<TokenId> seq(prompt.begin(), prompt.end());
  std::vector<TokenId> out;
  for (int step = 0; step < config.max_new_tokens; ++step) {
    const ForwardTrace<T> tr = ForwardTokens<T>(seq, nullptr, params, adapters);
    const TokenId next =
        PickToken<T>(tr.logits.row(tr.logits.rows() - 1), config, rng);
    if (next == Vocab::kEos) break;
    out.push_back(next);
    seq.push_back(next);
  }
  return out;
}

TokenSeq FromIds(std::span<const TokenId> ids, const Vocab& vocab) {
  TokenSeq seq;
  for (TokenId id : ids) seq.push_back(id, vocab.Surface(id));
  return seq;
}

std::string Detokenize(const TokenSeq& tokens, TokenizeMode mode) {
  std::string out;
  bool glue_next = false;
  for (size_t i = 0; i < tokens.size(); ++i) {
    const std::string& surface = tokens.ids[i] == Vocab::kUnk
                                     ? std::string(Vocab::kUnkSurface)
                                     : tokens.surfaces[i];
    if (mode == TokenizeMode::kChar) {
      out += surface;
      continue;
    }
    const std::vector<char32_t> cps = text::DecodeUtf8(surface);
    const bool single_punct = cps.size() == 1 && text::IsPunct(cps[0]);
    const bool opening = single_punct && text::IsOpeningPunct(cps[0]);
    const bool closing = single_punct && !opening;
    if (!out.empty() && !glue_next && !closing) out.push_back(' ');
    out += surface;
    glue_next = opening;
  }
  return out;
}

std::string Paraphrase(std::string_view text, const std::string& lang,
                       const ParaphraseContext& ctx, Rng& corrupt_rng,
                       Rng& decode_rng) {
  if (ctx.params == nullptr || ctx.vocab == nullptr) {
    Fail(ErrorKind::kInvalidArgument, "paraphrase context is incomplete");
  }
  if (ctx.params->config.vocab_size < ctx.vocab->size()) {
    Fail(ErrorKind::kShape, "model vocabulary size " +
                                std::to_string(ctx.params->config.vocab_size) +
                                " is smaller than vocab file size " +
                                std::to_string(ctx.vocab->size()));
  }
  static const StopwordSet kNoStopwords;
  const StopwordSet& stopwords =
      ctx.stopwords != nullptr ? *ctx.stopwords : kNoStopwords;
  const TokenSeq tokens = Tokenize(text, *ctx.vocab, ctx.mode);
  const TokenSeq source =
      Corrupt(tokens, stopwords, lang, ctx.corruption, corrupt_rng);
  const std::vector<TokenId> prompt = PromptFor(source);
  DecodeConfig decode = ctx.decode;
  decode.vocab_limit = ctx.vocab->size();
  const int room = ctx.params->config.max_len - static_cast<int>(prompt.size());
  if (room < 1) {
    Fail(ErrorKind::kSequenceTooLong,
         "input of " + std::to_string(tokens.size()) +
             " tokens leaves no room to generate");
  }
  decode.max_new_tokens = std::min(decode.max_new_tokens, room);
  const std::vector<TokenId> ids =
      Generate<float>(*ctx.params, ctx.adapters, prompt, decode, decode_rng);
  return Detokenize(FromIds(ids, *ctx.vocab), ctx.mode);
}

template std::vector<TokenId> Generate<float>(const Parameters<float>&,
                                              const AdapterSet<float>*,
                                              std::span<const TokenId>,
                                              const DecodeConfig&, Rng&);
template std::vector<TokenId> Generate<double>(const Parameters<double>&,
                                               const AdapterSet<double>*,
                                               std::span<const TokenId>,
                                               const DecodeConfig&, Rng&);

}  // namespace paravat
