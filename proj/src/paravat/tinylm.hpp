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

#ifndef PARAVAT_TINYLM_HPP_
#define PARAVAT_TINYLM_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "paravat/common.hpp"
#include "paravat/corpus.hpp"
#include "paravat/lora.hpp"
#include "paravat/model_config.hpp"

namespace paravat {

// Pre-norm decoder block. Row-vector convention: y = x * W, so every d x d
// projection maps model-dim inputs to model-dim outputs. Gains and biases are
// stored as 1 x n matrices.
template <typename T>
struct LayerParams {
  Mat<T> ln1_gain, ln1_bias;
  Mat<T> wq, wk, wv, wo;
  Mat<T> ln2_gain, ln2_bias;
  Mat<T> w1, b1, w2, b2;
};

// Base model weights. The output head reuses the embedding table.
template <typename T>
struct Parameters {
  ModelConfig config;
  Mat<T> embed;
  std::vector<LayerParams<T>> layers;
  Mat<T> lnf_gain, lnf_bias;
  // Bumped on every in-place update so stale forward traces can be detected.
  uint64_t revision = 0;

  static Parameters Zeros(const ModelConfig& config);
  static Parameters Init(const ModelConfig& config, Rng& rng);

  void Touch() { ++revision; }
  int64_t NumScalars() const;

  template <typename F>
  void ForEach(F&& fn) {
    fn(std::string("embed"), embed);
    for (size_t i = 0; i < layers.size(); ++i) {
      const std::string p = "layers." + std::to_string(i) + ".";
      LayerParams<T>& l = layers[i];
      fn(p + "ln1_gain", l.ln1_gain);
      fn(p + "ln1_bias", l.ln1_bias);
      fn(p + "wq", l.wq);
      fn(p + "wk", l.wk);
      fn(p + "wv", l.wv);
      fn(p + "wo", l.wo);
      fn(p + "ln2_gain", l.ln2_gain);
      fn(p + "ln2_bias", l.ln2_bias);
      fn(p + "w1", l.w1);
      fn(p + "b1", l.b1);
      fn(p + "w2", l.w2);
      fn(p + "b2", l.b2);
    }
    fn(std::string("lnf_gain"), lnf_gain);
    fn(std::string("lnf_bias"), lnf_bias);
  }
  template <typename F>
  void ForEach(F&& fn) const {
    const_cast<Parameters*>(this)->ForEach(
        [&](const std::string& name, Mat<T>& m) {
          fn(name, static_cast<const Mat<T>&>(m));
        });
  }

  template <typename U>
  Parameters<U> Cast() const {
    Parameters<U> out = Parameters<U>::Zeros(config);
    std::vector<const Mat<T>*> src;
    ForEach([&](const std::string&, const Mat<T>& m) { src.push_back(&m); });
    size_t i = 0;
    out.ForEach([&](const std::string&, Mat<U>& m) {
      m = src[i++]->template cast<U>();
    });
    return out;
  }
};

// Cached activations of one decoder block.
template <typename T>
struct LayerCache {
  Mat<T> input;
  Mat<T> ln1_norm, ln1_out;
  RowVec<T> ln1_rstd;
  Mat<T> wq_eff, wv_eff;
  Mat<T> q, k, v;
  std::vector<Mat<T>> probs;  // one n x n causal attention matrix per head
  Mat<T> attn;                // concatenated head outputs
  Mat<T> mid;                 // residual stream after attention
  Mat<T> ln2_norm, ln2_out;
  RowVec<T> ln2_rstd;
  Mat<T> ff_pre, ff_act;
};

template <typename T>
struct ForwardTrace {
  const Parameters<T>* params = nullptr;
  uint64_t params_revision = 0;
  const AdapterSet<T>* adapters = nullptr;
  uint64_t adapters_revision = 0;
  // Token ids when the forward started from a lookup; empty otherwise.
  std::vector<TokenId> tokens;
  std::vector<LayerCache<T>> layers;
  Mat<T> final_norm;
  RowVec<T> final_rstd;
  Mat<T> hidden;  // final layer-norm output, n x d
  Mat<T> logits;  // n x V

  int length() const { return static_cast<int>(logits.rows()); }
};

template <typename T>
struct Gradients {
  Parameters<T> params;
  AdapterSet<T> adapters;
  // Gradient with respect to the block input, which equals the gradient with
  // respect to both the embeddings and an additive perturbation.
  Mat<T> input;
  bool has_params = false;
  bool has_adapters = false;
};

struct BackwardOptions {
  bool params = true;
  bool adapters = true;
};

template <typename T>
struct LossResult {
  T value = T(0);
  Mat<T> dlogits;
};

Mat<double> PositionalEncoding(int length, int d_model);

// Row i = embed[token_i] + positional encoding of position i.
template <typename T>
Mat<T> Embed(std::span<const TokenId> tokens, const Parameters<T>& params);

// Runs the decoder on embeddings (+ perturbation when non-null). Adapters, if
// given, modify the query and value projections.
template <typename T>
ForwardTrace<T> Forward(const Mat<T>& embeddings, const Mat<T>* perturbation,
                        const Parameters<T>& params,
                        const AdapterSet<T>* adapters);

// Embed + Forward, keeping the token ids so Backward also accumulates the
// lookup gradient into the embedding table.
template <typename T>
ForwardTrace<T> ForwardTokens(std::span<const TokenId> tokens,
                              const Mat<T>* perturbation,
                              const Parameters<T>& params,
                              const AdapterSet<T>* adapters);

// Mean next-token cross-entropy over the target rows of `packed`.
template <typename T>
LossResult<T> LossRec(const Mat<T>& logits, const PackedSequence& packed);

// Mean over active rows of KL(softmax(p) || softmax(q)). q is a constant:
// the returned gradient is with respect to p only.
template <typename T>
LossResult<T> KlDiv(const Mat<T>& logits_p, const Mat<T>& logits_q,
                    std::span<const uint8_t> row_mask);

// Reverse pass of the trace for upstream gradient `dlogits`.
template <typename T>
Gradients<T> Backward(const ForwardTrace<T>& trace, const Mat<T>& dlogits,
                      const BackwardOptions& options = {});

template <typename T>
Mat<T> SoftmaxRows(const Mat<T>& logits);

// Copy of `params` with every adapter folded into its query/value weight.
template <typename T>
Parameters<T> MergeAdapters(const Parameters<T>& params,
                            const AdapterSet<T>& adapters);

}  // namespace paravat

#endif  // PARAVAT_TINYLM_HPP_
