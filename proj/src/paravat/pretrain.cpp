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

#include "paravat/pretrain.hpp"

#include <cmath>
#include <numeric>
#include <string>
#include <utility>

namespace paravat {

void PretrainConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) Fail(ErrorKind::kInvalidArgument, "pretrain config: " + what);
  };
  require(epochs >= 0, "epochs must be >= 0");
  require(lr > 0.0, "lr must be > 0");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1 must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2 must lie in [0, 1)");
  require(adam_eps > 0.0, "adam_eps must be > 0");
  require(batch_size >= 1, "batch_size must be >= 1");
  require(repeat_prob >= 0.0 && repeat_prob <= 1.0,
          "repeat_prob must lie in [0, 1]");
  require(word_shuffle_prob >= 0.0 && word_shuffle_prob <= 1.0,
          "word_shuffle_prob must lie in [0, 1]");
}

std::vector<PackedSequence> BuildPretrainDocuments(
    std::span<const std::vector<TokenId>> sentences,
    const PretrainConfig& config, int max_len, Rng& rng) {
  config.Validate();
  std::vector<PackedSequence> docs;
  if (sentences.empty()) return docs;
  for (size_t i = 0; i < sentences.size(); ++i) {
    std::vector<TokenId> first = sentences[i];
    if (rng.Bernoulli(config.word_shuffle_prob)) {
      for (size_t k = first.size(); k > 1; --k) {
        std::swap(first[k - 1], first[rng.Index(k)]);
      }
    }
    const bool repeat = rng.Bernoulli(config.repeat_prob);
    const auto& second =
        repeat ? first : sentences[rng.Index(sentences.size())];
    const size_t n = first.size() + second.size() + 2;
    if (first.empty() || second.empty() || n > static_cast<size_t>(max_len)) {
      continue;
    }
    PackedSequence doc;
    doc.tokens = first;
    doc.tokens.push_back(Vocab::kSep);
    doc.tokens.insert(doc.tokens.end(), second.begin(), second.end());
    doc.tokens.push_back(Vocab::kEos);
    doc.sep_index = first.size();
    doc.loss_mask.assign(doc.tokens.size(), 1);
    doc.loss_mask[0] = 0;
    docs.push_back(std::move(doc));
  }
  return docs;
}

std::vector<PretrainEpoch> PretrainBase(
    Parameters<float>& params, std::span<const std::vector<TokenId>> sentences,
    const PretrainConfig& config) {
  config.Validate();
  std::vector<PretrainEpoch> log;
  if (config.epochs == 0) return log;

  Parameters<float> m = Parameters<float>::Zeros(params.config);
  Parameters<float> v = Parameters<float>::Zeros(params.config);
  Rng rng(SubstreamSeed(config.seed, "pretrain-shuffle"));
  Rng doc_rng(SubstreamSeed(config.seed, "pretrain-docs"));
  int64_t t = 0;
  BackwardOptions params_only;
  params_only.adapters = false;

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const std::vector<PackedSequence> docs =
        BuildPretrainDocuments(sentences, config, params.config.max_len, doc_rng);
    if (docs.empty()) Fail(ErrorKind::kEmptyCorpus, "no pretraining documents");
    std::vector<size_t> order(docs.size());
    std::iota(order.begin(), order.end(), size_t{0});
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[rng.Index(i)]);
    }
    double epoch_loss = 0.0;
    for (size_t start = 0; start < order.size();
         start += static_cast<size_t>(config.batch_size)) {
      const size_t end = std::min(order.size(),
                                  start + static_cast<size_t>(config.batch_size));
      const float inv = 1.0f / static_cast<float>(end - start);
      Parameters<float> grad = Parameters<float>::Zeros(params.config);
      for (size_t i = start; i < end; ++i) {
        const PackedSequence& doc = docs[order[i]];
        auto tr = ForwardTokens<float>(doc.tokens, nullptr, params, nullptr);
        auto loss = LossRec<float>(tr.logits, doc);
        if (!std::isfinite(loss.value)) {
          Fail(ErrorKind::kDivergence,
               "non-finite pretraining loss at epoch " + std::to_string(epoch));
        }
        epoch_loss += loss.value;
        auto g = Backward<float>(tr, loss.dlogits, params_only);
        std::vector<const Mat<float>*> src;
        g.params.ForEach(
            [&](const std::string&, const Mat<float>& x) { src.push_back(&x); });
        size_t k = 0;
        grad.ForEach([&](const std::string&, Mat<float>& x) {
          x += inv * *src[k++];
        });
      }
      ++t;
      const double c1 = 1.0 - std::pow(config.beta1, static_cast<double>(t));
      const double c2 = 1.0 - std::pow(config.beta2, static_cast<double>(t));
      std::vector<Mat<float>*> gs, ms, vs;
      grad.ForEach([&](const std::string&, Mat<float>& x) { gs.push_back(&x); });
      m.ForEach([&](const std::string&, Mat<float>& x) { ms.push_back(&x); });
      v.ForEach([&](const std::string&, Mat<float>& x) { vs.push_back(&x); });
      size_t k = 0;
      const float b1 = static_cast<float>(config.beta1);
      const float b2 = static_cast<float>(config.beta2);
      const float step = static_cast<float>(config.lr / c1);
      const float vscale = static_cast<float>(1.0 / c2);
      const float eps = static_cast<float>(config.adam_eps);
      params.ForEach([&](const std::string&, Mat<float>& p) {
        Mat<float>& g = *gs[k];
        Mat<float>& mm = *ms[k];
        Mat<float>& vv = *vs[k];
        ++k;
        mm = b1 * mm + (1.0f - b1) * g;
        vv = b2 * vv + (1.0f - b2) * g.cwiseProduct(g);
        p.array() -= step * mm.array() / ((vv.array() * vscale).sqrt() + eps);
      });
      params.Touch();
    }
    log.push_back({epoch, epoch_loss / static_cast<double>(docs.size())});
  }
  return log;
}

}  // namespace paravat
