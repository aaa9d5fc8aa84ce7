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

#ifndef PARAVAT_PRETRAIN_HPP_
#define PARAVAT_PRETRAIN_HPP_

#include <cstdint>
#include <span>
#include <vector>

#include "paravat/common.hpp"
#include "paravat/corpus.hpp"
#include "paravat/tinylm.hpp"

namespace paravat {

// Full-parameter language-model training that produces the frozen base the
// adapters are later fitted on.
struct PretrainConfig {
  int epochs = 0;
  double lr = 3e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double adam_eps = 1e-8;
  int batch_size = 16;
  // Probability that a document's second sentence repeats its first.
  double repeat_prob = 0.5;
  // Probability that the first sentence's words are put in random order.
  // Fresh orders every epoch keep the base from memorising the corpus
  // instead of learning to copy.
  double word_shuffle_prob = 0.5;
  uint64_t seed = 0;

  void Validate() const;
};

// Two-line documents  a SEP b EOS  (SEP renders as a newline). a is a corpus
// sentence, its words shuffled with probability word_shuffle_prob; b == a with
// probability repeat_prob and a different random sentence otherwise. Pairs too
// long for max_len are skipped. The loss mask covers every position after
// the first.
std::vector<PackedSequence> BuildPretrainDocuments(
    std::span<const std::vector<TokenId>> sentences,
    const PretrainConfig& config, int max_len, Rng& rng);

struct PretrainEpoch {
  int epoch = 0;
  double loss = 0.0;
};

// Adam on the next-token loss. Documents are drawn anew from the sentences
// every epoch, all randomness coming from the config seed.
std::vector<PretrainEpoch> PretrainBase(
    Parameters<float>& params, std::span<const std::vector<TokenId>> sentences,
    const PretrainConfig& config);

}  // namespace paravat

#endif  // PARAVAT_PRETRAIN_HPP_
