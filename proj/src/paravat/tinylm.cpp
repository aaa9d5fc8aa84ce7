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

#include "paravat/tinylm.hpp"

#include <cmath>
#include <limits>
#include <numbers>

namespace paravat {

void ModelConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) Fail(ErrorKind::kInvalidArgument, "model config: " + what);
  };
  require(vocab_size >= Vocab::kNumReserved + 1, "vocab_size must be >= 5");
  require(d_model >= 1, "d_model must be >= 1");
  require(layers >= 1, "layers must be >= 1");
  require(heads >= 1, "heads must be >= 1");
  require(d_ff >= 1, "d_ff must be >= 1");
  require(max_len >= 2, "max_len must be >= 2");
  require(d_model % heads == 0, "d_model must be divisible by heads");
  require(dropout == 0.0, "dropout is not supported; set it to 0");
}

namespace {

constexpr double kLayerNormEps = 1e-5;

template <typename T>
Mat<T> Filled(Eigen::Index rows, Eigen::Index cols, T value) {
  return Mat<T>::Constant(rows, cols, value);
}

template <typename T>
void FillNormal(Mat<T>& m, double std, Rng& rng) {
  for (Eigen::Index i = 0; i < m.size(); ++i) {
    m.data()[i] = static_cast<T>(std * rng.Normal());
  }
}

// Row-wise layer norm; keeps the normalized input and inverse std for the
// reverse pass.
template <typename T>
void LayerNormForward(const Mat<T>& x, const Mat<T>& gain, const Mat<T>& bias,
                      Mat<T>& norm, RowVec<T>& rstd, Mat<T>& out) {
  const Eigen::Index n = x.rows();
  const Eigen::Index d = x.cols();
  norm.resize(n, d);
  rstd.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const T mean = x.row(i).mean();
    const auto centered = (x.row(i).array() - mean).matrix();
    const T var = centered.squaredNorm() / static_cast<T>(d);
    const T r = T(1) / std::sqrt(var + static_cast<T>(kLayerNormEps));
    rstd(i) = r;
    norm.row(i) = centered * r;
  }
  out = (norm.array().rowwise() * gain.row(0).array()).rowwise() +
        bias.row(0).array();
}

template <typename T>
Mat<T> LayerNormBackward(const Mat<T>& dout, const Mat<T>& norm,
                         const RowVec<T>& rstd, const Mat<T>& gain,
                         Mat<T>* dgain, Mat<T>* dbias) {
  if (dgain != nullptr) {
    *dgain += (dout.array() * norm.array()).colwise().sum().matrix();
    *dbias += dout.colwise().sum();
  }
  const Eigen::Index n = dout.rows();
  const T d = static_cast<T>(dout.cols());
  Mat<T> dx(n, dout.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const RowVec<T> dnorm =
        (dout.row(i).array() * gain.row(0).array()).matrix();
    const T mean_dnorm = dnorm.sum() / d;
    const T mean_dnorm_norm = dnorm.dot(norm.row(i)) / d;
    dx.row(i) = rstd(i) * (dnorm.array() - mean_dnorm -
                           norm.row(i).array() * mean_dnorm_norm)
                              .matrix();
  }
  return dx;
}

template <typename T>
T GeluScalar(T u) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T inner = c * (u + T(0.044715) * u * u * u);
  return T(0.5) * u * (T(1) + std::tanh(inner));
}

template <typename T>
T GeluGrad(T u) {
  const T c = static_cast<T>(std::sqrt(2.0 / std::numbers::pi));
  const T inner = c * (u + T(0.044715) * u * u * u);
  const T t = std::tanh(inner);
  return T(0.5) * (T(1) + t) +
         T(0.5) * u * (T(1) - t * t) * c * (T(1) + T(3 * 0.044715) * u * u);
}

template <typename T>
void RequireShape(const Mat<T>& m, Eigen::Index rows, Eigen::Index cols,
                  const char* what) {
  if (m.rows() != rows || m.cols() != cols) {
    Fail(ErrorKind::kShape, std::string(what) + " is " +
                                std::to_string(m.rows()) + "x" +
                                std::to_string(m.cols()) + ", expected " +
                                std::to_string(rows) + "x" +
                                std::to_string(cols));
  }
}

}  // namespace

template <typename T>
Mat<T> SoftmaxRows(const Mat<T>& logits) {
  Mat<T> out(logits.rows(), logits.cols());
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const T mx = logits.row(i).maxCoeff();
    out.row(i) = (logits.row(i).array() - mx).exp().matrix();
    out.row(i) /= out.row(i).sum();
  }
  return out;
}

template <typename T>
Parameters<T> Parameters<T>::Zeros(const ModelConfig& config) {
  config.Validate();
  const int d = config.d_model;
  Parameters p;
  p.config = config;
  p.embed = Mat<T>::Zero(config.vocab_size, d);
  p.layers.resize(config.layers);
  for (auto& l : p.layers) {
    l.ln1_gain = Mat<T>::Zero(1, d);
    l.ln1_bias = Mat<T>::Zero(1, d);
    l.wq = Mat<T>::Zero(d, d);
    l.wk = Mat<T>::Zero(d, d);
    l.wv = Mat<T>::Zero(d, d);
    l.wo = Mat<T>::Zero(d, d);
    l.ln2_gain = Mat<T>::Zero(1, d);
    l.ln2_bias = Mat<T>::Zero(1, d);
    l.w1 = Mat<T>::Zero(d, config.d_ff);
    l.b1 = Mat<T>::Zero(1, config.d_ff);
    l.w2 = Mat<T>::Zero(config.d_ff, d);
    l.b2 = Mat<T>::Zero(1, d);
  }
  p.lnf_gain = Mat<T>::Zero(1, d);
  p.lnf_bias = Mat<T>::Zero(1, d);
  return p;
}

template <typename T>
Parameters<T> Parameters<T>::Init(const ModelConfig& config, Rng& rng) {
  Parameters p = Zeros(config);
  const double d = config.d_model;
  const double residual_scale = 1.0 / std::sqrt(2.0 * config.layers);
  FillNormal(p.embed, 0.5, rng);
  for (auto& l : p.layers) {
    l.ln1_gain.setOnes();
    l.ln2_gain.setOnes();
    FillNormal(l.wq, 1.0 / std::sqrt(d), rng);
    FillNormal(l.wk, 1.0 / std::sqrt(d), rng);
    FillNormal(l.wv, 1.0 / std::sqrt(d), rng);
    FillNormal(l.wo, residual_scale / std::sqrt(d), rng);
    FillNormal(l.w1, 1.0 / std::sqrt(d), rng);
    FillNormal(l.w2, residual_scale / std::sqrt(config.d_ff), rng);
  }
  p.lnf_gain.setOnes();
  return p;
}

template <typename T>
int64_t Parameters<T>::NumScalars() const {
  int64_t n = 0;
  ForEach([&](const std::string&, const Mat<T>& m) { n += m.size(); });
  return n;
}

Mat<double> PositionalEncoding(int length, int d_model) {
  Mat<double> pe(length, d_model);
  for (int pos = 0; pos < length; ++pos) {
    for (int i = 0; i < d_model; ++i) {
      const int pair = i / 2;
      const double freq =
          std::pow(10000.0, -2.0 * pair / static_cast<double>(d_model));
      pe(pos, i) = (i % 2 == 0) ? std::sin(pos * freq) : std::cos(pos * freq);
    }
  }
  return pe;
}

template <typename T>
Mat<T> Embed(std::span<const TokenId> tokens, const Parameters<T>& params) {
  const int n = static_cast<int>(tokens.size());
  const int d = params.config.d_model;
  if (n > params.config.max_len) {
    Fail(ErrorKind::kSequenceTooLong,
         "sequence of " + std::to_string(n) + " tokens exceeds max_len " +
             std::to_string(params.config.max_len));
  }
  Mat<T> out = PositionalEncoding(n, d).cast<T>();
  for (int i = 0; i < n; ++i) {
    const TokenId id = tokens[i];
    if (id < 0 || id >= params.config.vocab_size) {
      Fail(ErrorKind::kVocabOverflow,
           "token id " + std::to_string(id) + " >= vocab size " +
               std::to_string(params.config.vocab_size));
    }
    out.row(i) += params.embed.row(id);
  }
  return out;
}

template <typename T>
ForwardTrace<T> Forward(const Mat<T>& embeddings, const Mat<T>* perturbation,
                        const Parameters<T>& params,
                        const AdapterSet<T>* adapters) {
  const ModelConfig& cfg = params.config;
  const Eigen::Index n = embeddings.rows();
  const int d = cfg.d_model;
  const int dh = cfg.head_dim();
  if (n < 1) Fail(ErrorKind::kShape, "empty input");
  if (n > cfg.max_len) {
    Fail(ErrorKind::kSequenceTooLong,
         "sequence of " + std::to_string(n) + " exceeds max_len " +
             std::to_string(cfg.max_len));
  }
  RequireShape(embeddings, n, d, "embeddings");
  if (perturbation != nullptr) RequireShape(*perturbation, n, d, "perturbation");
  if (adapters != nullptr && adapters->num_layers() != cfg.layers) {
    Fail(ErrorKind::kShape, "adapter set does not match layer count");
  }

  ForwardTrace<T> tr;
  tr.params = &params;
  tr.params_revision = params.revision;
  tr.adapters = adapters;
  tr.adapters_revision = adapters != nullptr ? adapters->revision : 0;
  tr.layers.resize(cfg.layers);

  Mat<T> x = embeddings;
  if (perturbation != nullptr) x += *perturbation;
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));

  for (int li = 0; li < cfg.layers; ++li) {
    const LayerParams<T>& lp = params.layers[li];
    LayerCache<T>& c = tr.layers[li];
    c.input = x;
    LayerNormForward(x, lp.ln1_gain, lp.ln1_bias, c.ln1_norm, c.ln1_rstd,
                     c.ln1_out);
    if (adapters != nullptr) {
      c.wq_eff = EffectiveWeight(lp.wq, adapters->query[li]);
      c.wv_eff = EffectiveWeight(lp.wv, adapters->value[li]);
    } else {
      c.wq_eff = lp.wq;
      c.wv_eff = lp.wv;
    }
    c.q.noalias() = c.ln1_out * c.wq_eff;
    c.k.noalias() = c.ln1_out * lp.wk;
    c.v.noalias() = c.ln1_out * c.wv_eff;
    c.attn.resize(n, d);
    c.probs.resize(cfg.heads);
    for (int h = 0; h < cfg.heads; ++h) {
      Mat<T> scores = c.q.middleCols(h * dh, dh) *
                      c.k.middleCols(h * dh, dh).transpose() * scale;
      Mat<T>& p = c.probs[h];
      p = Mat<T>::Zero(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const T mx = scores.row(i).head(i + 1).maxCoeff();
        T total = T(0);
        for (Eigen::Index j = 0; j <= i; ++j) {
          p(i, j) = std::exp(scores(i, j) - mx);
          total += p(i, j);
        }
        p.row(i).head(i + 1) /= total;
      }
      c.attn.middleCols(h * dh, dh).noalias() = p * c.v.middleCols(h * dh, dh);
    }
    c.mid = x;
    c.mid.noalias() += c.attn * lp.wo;
    LayerNormForward(c.mid, lp.ln2_gain, lp.ln2_bias, c.ln2_norm, c.ln2_rstd,
                     c.ln2_out);
    c.ff_pre = c.ln2_out * lp.w1;
    c.ff_pre.rowwise() += lp.b1.row(0);
    c.ff_act = c.ff_pre.unaryExpr([](T u) { return GeluScalar(u); });
    x = c.mid;
    x.noalias() += c.ff_act * lp.w2;
    x.rowwise() += lp.b2.row(0);
  }
  LayerNormForward(x, params.lnf_gain, params.lnf_bias, tr.final_norm,
                   tr.final_rstd, tr.hidden);
  tr.logits.noalias() = tr.hidden * params.embed.transpose();
  return tr;
}

template <typename T>
ForwardTrace<T> ForwardTokens(std::span<const TokenId> tokens,
                              const Mat<T>* perturbation,
                              const Parameters<T>& params,
                              const AdapterSet<T>* adapters) {
  ForwardTrace<T> tr =
      Forward(Embed(tokens, params), perturbation, params, adapters);
  tr.tokens.assign(tokens.begin(), tokens.end());
  return tr;
}

template <typename T>
LossResult<T> LossRec(const Mat<T>& logits, const PackedSequence& packed) {
  const Eigen::Index n = logits.rows();
  if (static_cast<size_t>(n) != packed.size()) {
    Fail(ErrorKind::kShape, "logits rows do not match packed length");
  }
  const std::vector<uint8_t> rows = packed.PredictionRows();
  int count = 0;
  for (uint8_t r : rows) count += r != 0;
  if (count == 0) Fail(ErrorKind::kEmptyLossMask, "no target positions");
  LossResult<T> res;
  res.dlogits = Mat<T>::Zero(n, logits.cols());
  const T inv = T(1) / static_cast<T>(count);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (!rows[i]) continue;
    const TokenId target = packed.tokens[i + 1];
    if (target < 0 || target >= logits.cols()) {
      Fail(ErrorKind::kVocabOverflow, "target id outside logits");
    }
    const T mx = logits.row(i).maxCoeff();
    const auto shifted = (logits.row(i).array() - mx);
    const T lse = std::log(shifted.exp().sum());
    res.value += (lse - shifted(target)) * inv;
    res.dlogits.row(i) = (shifted - lse).exp().matrix() * inv;
    res.dlogits(i, target) -= inv;
  }
  return res;
}

template <typename T>
LossResult<T> KlDiv(const Mat<T>& logits_p, const Mat<T>& logits_q,
                    std::span<const uint8_t> row_mask) {
  if (logits_p.rows() != logits_q.rows() ||
      logits_p.cols() != logits_q.cols() ||
      static_cast<size_t>(logits_p.rows()) != row_mask.size()) {
    Fail(ErrorKind::kShape, "KL inputs have mismatched shapes");
  }
  int count = 0;
  for (uint8_t r : row_mask) count += r != 0;
  if (count == 0) Fail(ErrorKind::kEmptyLossMask, "no active rows");
  LossResult<T> res;
  res.dlogits = Mat<T>::Zero(logits_p.rows(), logits_p.cols());
  const T inv = T(1) / static_cast<T>(count);
  for (Eigen::Index i = 0; i < logits_p.rows(); ++i) {
    if (!row_mask[i]) continue;
    const auto sp = logits_p.row(i).array() - logits_p.row(i).maxCoeff();
    const auto sq = logits_q.row(i).array() - logits_q.row(i).maxCoeff();
    const auto log_p = (sp - std::log(sp.exp().sum())).eval();
    const auto log_q = (sq - std::log(sq.exp().sum())).eval();
    const auto p = log_p.exp().eval();
    const auto diff = (log_p - log_q).eval();
    const T kl = (p * diff).sum();
    res.value += kl * inv;
    // d/dz_j sum_i p_i (log p_i - log q_i) = p_j (log p_j - log q_j - KL).
    res.dlogits.row(i) = (p * (diff - kl)).matrix() * inv;
  }
  return res;
}

template <typename T>
Gradients<T> Backward(const ForwardTrace<T>& trace, const Mat<T>& dlogits,
                      const BackwardOptions& options) {
  if (trace.params == nullptr) Fail(ErrorKind::kTraceMismatch, "empty trace");
  const Parameters<T>& params = *trace.params;
  if (params.revision != trace.params_revision ||
      (trace.adapters != nullptr &&
       trace.adapters->revision != trace.adapters_revision)) {
    Fail(ErrorKind::kTraceMismatch,
         "parameters changed since the forward pass");
  }
  if (dlogits.rows() != trace.logits.rows() ||
      dlogits.cols() != trace.logits.cols()) {
    Fail(ErrorKind::kTraceMismatch, "upstream gradient shape differs");
  }
  const ModelConfig& cfg = params.config;
  const int dh = cfg.head_dim();
  const T scale = T(1) / std::sqrt(static_cast<T>(dh));
  const bool want_adapters = options.adapters && trace.adapters != nullptr;
  // Dense gradients of the effective query/value weights are needed for the
  // adapter factors even when base gradients are not requested.
  const bool want_weights = options.params || want_adapters;

  Gradients<T> g;
  g.has_params = options.params;
  g.has_adapters = want_adapters;
  if (options.params) g.params = Parameters<T>::Zeros(cfg);
  if (want_adapters) g.adapters = AdapterSet<T>::ZerosLike(*trace.adapters);

  Mat<T> dx;
  {
    Mat<T> dhidden = dlogits * params.embed;
    if (options.params) g.params.embed.noalias() += dlogits.transpose() * trace.hidden;
    dx = LayerNormBackward(dhidden, trace.final_norm, trace.final_rstd,
                           params.lnf_gain,
                           options.params ? &g.params.lnf_gain : nullptr,
                           options.params ? &g.params.lnf_bias : nullptr);
  }

  for (int li = cfg.layers - 1; li >= 0; --li) {
    const LayerParams<T>& lp = params.layers[li];
    const LayerCache<T>& c = trace.layers[li];
    LayerParams<T>* gl = options.params ? &g.params.layers[li] : nullptr;

    // Feed-forward sublayer: x = mid + gelu(ln2(mid) W1 + b1) W2 + b2.
    if (gl != nullptr) {
      gl->w2.noalias() += c.ff_act.transpose() * dx;
      gl->b2 += dx.colwise().sum();
    }
    Mat<T> dact = dx * lp.w2.transpose();
    Mat<T> dpre = dact.cwiseProduct(
        c.ff_pre.unaryExpr([](T u) { return GeluGrad(u); }));
    if (gl != nullptr) {
      gl->w1.noalias() += c.ln2_out.transpose() * dpre;
      gl->b1 += dpre.colwise().sum();
    }
    Mat<T> dln2 = dpre * lp.w1.transpose();
    Mat<T> dmid = dx + LayerNormBackward(dln2, c.ln2_norm, c.ln2_rstd,
                                         lp.ln2_gain,
                                         gl ? &gl->ln2_gain : nullptr,
                                         gl ? &gl->ln2_bias : nullptr);

    // Attention sublayer: mid = input + attn Wo.
    if (gl != nullptr) gl->wo.noalias() += c.attn.transpose() * dmid;
    Mat<T> dattn = dmid * lp.wo.transpose();
    const Eigen::Index n = dattn.rows();
    Mat<T> dq(n, cfg.d_model), dk(n, cfg.d_model), dv(n, cfg.d_model);
    for (int h = 0; h < cfg.heads; ++h) {
      const Mat<T>& p = c.probs[h];
      const auto dout = dattn.middleCols(h * dh, dh);
      Mat<T> dp = dout * c.v.middleCols(h * dh, dh).transpose();
      dv.middleCols(h * dh, dh).noalias() = p.transpose() * dout;
      // Softmax reverse: ds = p * (dp - rowsum(dp * p)).
      Mat<T> ds(n, n);
      for (Eigen::Index i = 0; i < n; ++i) {
        const T dot = p.row(i).dot(dp.row(i));
        ds.row(i) = (p.row(i).array() * (dp.row(i).array() - dot)).matrix();
      }
      ds *= scale;
      dq.middleCols(h * dh, dh).noalias() = ds * c.k.middleCols(h * dh, dh);
      dk.middleCols(h * dh, dh).noalias() =
          ds.transpose() * c.q.middleCols(h * dh, dh);
    }
    if (want_weights) {
      Mat<T> dwq = c.ln1_out.transpose() * dq;
      Mat<T> dwv = c.ln1_out.transpose() * dv;
      if (gl != nullptr) {
        gl->wq += dwq;
        gl->wv += dwv;
        gl->wk.noalias() += c.ln1_out.transpose() * dk;
      }
      if (want_adapters) {
        const LoraAdapter<T>& aq = trace.adapters->query[li];
        const LoraAdapter<T>& av = trace.adapters->value[li];
        LoraAdapter<T>& gq = g.adapters.query[li];
        LoraAdapter<T>& gv = g.adapters.value[li];
        gq.b.noalias() += aq.scale * dwq * aq.a.transpose();
        gq.a.noalias() += aq.scale * aq.b.transpose() * dwq;
        gv.b.noalias() += av.scale * dwv * av.a.transpose();
        gv.a.noalias() += av.scale * av.b.transpose() * dwv;
      }
    }
    Mat<T> dln1 = dq * c.wq_eff.transpose();
    dln1.noalias() += dk * lp.wk.transpose();
    dln1.noalias() += dv * c.wv_eff.transpose();
    dx = dmid + LayerNormBackward(dln1, c.ln1_norm, c.ln1_rstd, lp.ln1_gain,
                                  gl ? &gl->ln1_gain : nullptr,
                                  gl ? &gl->ln1_bias : nullptr);
  }

  if (options.params) {
    for (size_t i = 0; i < trace.tokens.size(); ++i) {
      g.params.embed.row(trace.tokens[i]) += dx.row(static_cast<Eigen::Index>(i));
    }
  }
  g.input = std::move(dx);
  return g;
}

template <typename T>
Parameters<T> MergeAdapters(const Parameters<T>& params,
                            const AdapterSet<T>& adapters) {
  if (adapters.num_layers() != params.config.layers) {
    Fail(ErrorKind::kShape, "adapter set does not match layer count");
  }
  Parameters<T> merged = params;
  for (int i = 0; i < params.config.layers; ++i) {
    merged.layers[i].wq = Merge(adapters.query[i], params.layers[i].wq);
    merged.layers[i].wv = Merge(adapters.value[i], params.layers[i].wv);
  }
  merged.revision = 0;
  return merged;
}

#define PARAVAT_INSTANTIATE_TINYLM(T)                                         \
  template struct Parameters<T>;                                              \
  template Mat<T> SoftmaxRows<T>(const Mat<T>&);                              \
  template Mat<T> Embed<T>(std::span<const TokenId>, const Parameters<T>&);   \
  template ForwardTrace<T> Forward<T>(const Mat<T>&, const Mat<T>*,           \
                                      const Parameters<T>&,                   \
                                      const AdapterSet<T>*);                  \
  template ForwardTrace<T> ForwardTokens<T>(std::span<const TokenId>,         \
                                            const Mat<T>*,                    \
                                            const Parameters<T>&,             \
                                            const AdapterSet<T>*);            \
  template LossResult<T> LossRec<T>(const Mat<T>&, const PackedSequence&);    \
  template LossResult<T> KlDiv<T>(const Mat<T>&, const Mat<T>&,               \
                                  std::span<const uint8_t>);                  \
  template Gradients<T> Backward<T>(const ForwardTrace<T>&, const Mat<T>&,    \
                                    const BackwardOptions&);                  \
  template Parameters<T> MergeAdapters<T>(const Parameters<T>&,               \
                                          const AdapterSet<T>&);

PARAVAT_INSTANTIATE_TINYLM(float)
PARAVAT_INSTANTIATE_TINYLM(double)

#undef PARAVAT_INSTANTIATE_TINYLM

}  // namespace paravat
