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

#include "paravat/advtrain.hpp"

#include <cmath>
#include <numeric>
#include <utility>

namespace paravat {

void VatConfig::Validate() const {
  auto require = [](bool ok, const std::string& what) {
    if (!ok) Fail(ErrorKind::kInvalidArgument, "vat config: " + what);
  };
  require(epsilon > 0.0, "epsilon must be > 0");
  require(lr > 0.0, "lr must be > 0");
  require(eta > 0.0, "eta must be > 0");
  require(ascent_steps >= 1, "ascent_steps must be >= 1");
  require(epochs >= 0, "epochs must be >= 0");
  require(PgdEpochs() <= epochs, "pgd_epochs must lie in [0, epochs]");
  require(init_scale >= 0.0, "init_scale must be >= 0");
  require(init_std > 0.0, "init_std must be > 0");
  require(damping > 0.0, "damping must be > 0");
  require(alpha >= 0.0, "alpha must be >= 0");
  require(hessian_probes >= 1, "hessian_probes must be >= 1");
  require(hessian_step > 0.0, "hessian_step must be > 0");
  require(max_backtracks >= 0, "max_backtracks must be >= 0");
  require(batch_size >= 1, "batch_size must be >= 1");
}

const char* AscentPhaseName(AscentPhase phase) {
  return phase == AscentPhase::kPnm ? "pnm" : "pgd";
}

namespace {

template <typename T>
double FrobeniusNormImpl(const Eigen::Ref<const Mat<T>>& m) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < m.rows(); ++i) {
    for (Eigen::Index j = 0; j < m.cols(); ++j) {
      const double v = static_cast<double>(m(i, j));
      sum += v * v;
    }
  }
  return std::sqrt(sum);
}

}  // namespace

double FrobeniusNorm(const Eigen::Ref<const Mat<float>>& m) {
  return FrobeniusNormImpl<float>(m);
}
double FrobeniusNorm(const Eigen::Ref<const Mat<double>>& m) {
  return FrobeniusNormImpl<double>(m);
}

template <typename T>
double WeightedNorm(const Mat<T>& v, const Mat<T>& h) {
  if (v.rows() != h.rows() || v.cols() != h.cols()) {
    Fail(ErrorKind::kShape, "weighted norm: shape mismatch");
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < v.rows(); ++i) {
    for (Eigen::Index j = 0; j < v.cols(); ++j) {
      const double x = static_cast<double>(v(i, j));
      sum += static_cast<double>(h(i, j)) * (x * x);
    }
  }
  return std::sqrt(sum);
}

template <typename T>
Mat<T> SamplePerturbation(int rows, int cols, double gamma, double sigma,
                          Rng& rng) {
  if (rows < 1 || cols < 1) {
    Fail(ErrorKind::kInvalidArgument, "perturbation needs rows, cols >= 1");
  }
  Mat<T> delta(rows, cols);
  for (Eigen::Index i = 0; i < delta.size(); ++i) {
    delta.data()[i] = static_cast<T>(gamma * sigma * rng.Normal());
  }
  return delta;
}

template <typename T>
Mat<T> InitPerturbation(int rows, int cols, double gamma, double sigma,
                        double epsilon, Rng& rng) {
  return ProjectBall(SamplePerturbation<T>(rows, cols, gamma, sigma, rng),
                     epsilon);
}

template <typename T>
Mat<T> ProjectBall(const Mat<T>& delta, double epsilon) {
  if (!(epsilon > 0.0)) Fail(ErrorKind::kInvalidArgument, "epsilon must be > 0");
  const double norm = FrobeniusNorm(delta);
  if (norm <= epsilon) return delta;
  return delta * static_cast<T>(epsilon / norm);
}

template <typename T>
Mat<T> ProjectWeightedBall(const Mat<T>& delta, const HessianDiag<T>& h,
                           double epsilon) {
  if (!(epsilon > 0.0)) Fail(ErrorKind::kInvalidArgument, "epsilon must be > 0");
  const double norm = WeightedNorm(delta, h.values);
  if (norm <= epsilon) return delta;
  return delta * static_cast<T>(epsilon / norm);
}

template <typename T>
Mat<T> AscentStepPgd(const Mat<T>& delta, const Mat<T>& grad, double eta,
                     double epsilon) {
  if (delta.rows() != grad.rows() || delta.cols() != grad.cols()) {
    Fail(ErrorKind::kShape, "ascent step: gradient shape differs");
  }
  const double gnorm = FrobeniusNorm(grad);
  if (gnorm < kMinAscentGradNorm) return delta;
  const Mat<T> direction = grad / static_cast<T>(gnorm);
  const Mat<T> moved = delta + static_cast<T>(eta) * direction;
  return ProjectBall(moved, epsilon);
}

template <typename T>
Mat<T> AscentStepPnm(const Mat<T>& delta, const Mat<T>& grad,
                     const HessianDiag<T>& h, double eta, double epsilon) {
  if (delta.rows() != grad.rows() || delta.cols() != grad.cols() ||
      h.values.rows() != grad.rows() || h.values.cols() != grad.cols()) {
    Fail(ErrorKind::kShape, "ascent step: gradient or Hessian shape differs");
  }
  const double gnorm = FrobeniusNorm(grad);
  if (gnorm < kMinAscentGradNorm) return delta;
  const Mat<T> direction =
      ((grad / static_cast<T>(gnorm)).array() / h.values.array()).matrix();
  const Mat<T> moved = delta + static_cast<T>(eta) * direction;
  return ProjectWeightedBall(moved, h, epsilon);
}

template <typename T>
HessianDiag<T> EstimateHessianDiag(
    const std::function<Mat<T>(const Mat<T>&)>& grad_fn, const Mat<T>& delta,
    const Mat<T>& grad_at_delta, int probes, double step, double damping,
    Rng& rng) {
  if (probes < 1) Fail(ErrorKind::kInvalidArgument, "probes must be >= 1");
  Mat<double> acc = Mat<double>::Zero(delta.rows(), delta.cols());
  for (int p = 0; p < probes; ++p) {
    Mat<T> z(delta.rows(), delta.cols());
    for (Eigen::Index i = 0; i < z.size(); ++i) {
      z.data()[i] = static_cast<T>(rng.Rademacher());
    }
    const Mat<T> shifted = delta + static_cast<T>(step) * z;
    const Mat<T> g = grad_fn(shifted);
    acc += (z.template cast<double>().array() *
            (g - grad_at_delta).template cast<double>().array() / step)
               .matrix();
  }
  acc /= static_cast<double>(probes);
  if (!acc.allFinite()) {
    Fail(ErrorKind::kHessianEstimateFailed, "non-finite curvature estimate");
  }
  HessianDiag<T> h;
  h.values = acc.cwiseAbs().cwiseMax(damping).template cast<T>();
  // Rounding to T must not undercut the floor.
  h.values = h.values.cwiseMax(static_cast<T>(damping));
  return h;
}

namespace {

// Gradient of the virtual adversarial loss with respect to the perturbation.
template <typename T>
Mat<T> VadvInputGrad(const Parameters<T>& params, const AdapterSet<T>& adapters,
                     const PackedSequence& seq, const Mat<T>& clean,
                     const std::vector<uint8_t>& rows, const Mat<T>& delta) {
  auto tr = ForwardTokens<T>(seq.tokens, &delta, params, &adapters);
  auto kl = KlDiv<T>(tr.logits, clean, rows);
  BackwardOptions input_only;
  input_only.params = false;
  input_only.adapters = false;
  return Backward(tr, kl.dlogits, input_only).input;
}

}  // namespace

template <typename T>
HessianDiag<T> EstimateHessianDiag(const Parameters<T>& params,
                                   const AdapterSet<T>& adapters,
                                   const PackedSequence& sequence,
                                   const Mat<T>& clean_logits,
                                   const Mat<T>& delta, int probes,
                                   double step, double damping, Rng& rng) {
  const std::vector<uint8_t> rows = sequence.PredictionRows();
  std::function<Mat<T>(const Mat<T>&)> grad_fn = [&](const Mat<T>& d) {
    return VadvInputGrad(params, adapters, sequence, clean_logits, rows, d);
  };
  return EstimateHessianDiag<T>(grad_fn, delta, grad_fn(delta), probes, step,
                                damping, rng);
}

template <typename T>
StepReport MinibatchStep(const Parameters<T>& params, AdapterSet<T>& adapters,
                         std::span<const PackedSequence> batch,
                         const VatConfig& config, int epoch, Rng& rng,
                         const PerturbationObserver<T>* observer) {
  if (batch.empty()) Fail(ErrorKind::kInvalidArgument, "empty minibatch");
  const int K = config.ascent_steps;
  const int d = params.config.d_model;
  const AscentPhase phase =
      epoch <= config.PgdEpochs() ? AscentPhase::kPgd : AscentPhase::kPnm;
  const T weight = static_cast<T>(1.0 / (K * static_cast<double>(batch.size())));

  StepReport report;
  report.phase = phase;
  AdapterSet<T> accum = AdapterSet<T>::ZerosLike(adapters);
  BackwardOptions adapters_only;
  adapters_only.params = false;
  BackwardOptions input_only;
  input_only.params = false;
  input_only.adapters = false;

  auto check_finite = [&](double v, const char* what, size_t seq) {
    if (!std::isfinite(v)) {
      Fail(ErrorKind::kDivergence, std::string("non-finite ") + what +
                                       " at epoch " + std::to_string(epoch) +
                                       ", sequence " + std::to_string(seq));
    }
  };

  for (size_t s = 0; s < batch.size(); ++s) {
    const PackedSequence& seq = batch[s];
    const std::vector<uint8_t> rows = seq.PredictionRows();
    // Virtual labels: the clean pass at the current parameters, held fixed.
    const Mat<T> clean =
        ForwardTokens<T>(seq.tokens, nullptr, params, &adapters).logits;

    Mat<T> delta = InitPerturbation<T>(static_cast<int>(seq.size()), d,
                                       config.init_scale, config.init_std,
                                       config.epsilon, rng);
    if (observer != nullptr) (*observer)(s, 0, delta);
    ForwardTrace<T> trace =
        ForwardTokens<T>(seq.tokens, &delta, params, &adapters);
    LossResult<T> vadv = KlDiv<T>(trace.logits, clean, rows);
    check_finite(vadv.value, "virtual adversarial loss", s);
    report.loss_vadv_init += vadv.value;

    for (int m = 1; m <= K; ++m) {
      const LossResult<T> rec = LossRec<T>(trace.logits, seq);
      check_finite(rec.value, "reconstruction loss", s);
      report.loss_rec += rec.value;
      report.loss_vadv += vadv.value;

      const Mat<T> combined =
          rec.dlogits + static_cast<T>(config.alpha) * vadv.dlogits;
      const Gradients<T> g_theta = Backward(trace, combined, adapters_only);
      for (int li = 0; li < adapters.num_layers(); ++li) {
        accum.query[li].a += weight * g_theta.adapters.query[li].a;
        accum.query[li].b += weight * g_theta.adapters.query[li].b;
        accum.value[li].a += weight * g_theta.adapters.value[li].a;
        accum.value[li].b += weight * g_theta.adapters.value[li].b;
      }

      // The perturbation follows the adversarial term alone.
      const Mat<T> g_adv = Backward(trace, vadv.dlogits, input_only).input;
      if (FrobeniusNorm(g_adv) >= kMinAscentGradNorm) {
        HessianDiag<T> h;
        if (phase == AscentPhase::kPnm) {
          std::function<Mat<T>(const Mat<T>&)> grad_fn =
              [&](const Mat<T>& dd) {
                return VadvInputGrad(params, adapters, seq, clean, rows, dd);
              };
          h = EstimateHessianDiag<T>(grad_fn, delta, g_adv,
                                     config.hessian_probes,
                                     config.hessian_step, config.damping, rng);
        }
        double eta = config.eta;
        for (int attempt = 0; attempt <= config.max_backtracks; ++attempt) {
          Mat<T> candidate =
              phase == AscentPhase::kPgd
                  ? AscentStepPgd<T>(delta, g_adv, eta, config.epsilon)
                  : AscentStepPnm<T>(delta, g_adv, h, eta, config.epsilon);
          ForwardTrace<T> cand_trace =
              ForwardTokens<T>(seq.tokens, &candidate, params, &adapters);
          LossResult<T> cand_vadv = KlDiv<T>(cand_trace.logits, clean, rows);
          check_finite(cand_vadv.value, "virtual adversarial loss", s);
          if (cand_vadv.value >= vadv.value) {
            delta = std::move(candidate);
            trace = std::move(cand_trace);
            vadv = std::move(cand_vadv);
            break;
          }
          ++report.backtracks;
          eta *= 0.5;
        }
      }
      if (observer != nullptr) (*observer)(s, m, delta);
    }
    report.loss_vadv_final += vadv.value;
    report.delta_norm += FrobeniusNorm(delta);
  }

  double gsq = 0.0;
  accum.ForEach([&](const std::string&, const Mat<T>& m) {
    const double n = FrobeniusNorm(m);
    gsq += n * n;
  });
  report.grad_norm = std::sqrt(gsq);
  if (!std::isfinite(report.grad_norm)) {
    Fail(ErrorKind::kDivergence,
         "non-finite adapter gradient at epoch " + std::to_string(epoch));
  }

  const T lr = static_cast<T>(config.lr);
  std::vector<Mat<T>*> grads;
  accum.ForEach([&](const std::string&, Mat<T>& m) { grads.push_back(&m); });
  size_t gi = 0;
  adapters.ForEach([&](const std::string&, Mat<T>& m) {
    m -= lr * *grads[gi++];
  });
  adapters.Touch();

  const double nb = static_cast<double>(batch.size());
  report.loss_rec /= nb * K;
  report.loss_vadv /= nb * K;
  report.loss_vadv_init /= nb;
  report.loss_vadv_final /= nb;
  report.delta_norm /= nb;
  return report;
}

TrainResult Train(std::span<const PackedSequence> data,
                  const Parameters<float>& params, AdapterSet<float>& adapters,
                  const VatConfig& config, const EpochSink& sink) {
  config.Validate();
  TrainResult result;
  if (config.epochs == 0) return result;
  if (data.empty()) Fail(ErrorKind::kEmptyCorpus, "no training sequences");

  Rng shuffle_rng(SubstreamSeed(config.seed, "shuffle"));
  Rng perturb_rng(SubstreamSeed(config.seed, "perturbation"));
  std::vector<size_t> order(data.size());
  std::iota(order.begin(), order.end(), size_t{0});

  for (int epoch = 1; epoch <= config.epochs; ++epoch) {
    const AdapterSet<float> epoch_start = adapters;
    for (size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[shuffle_rng.Index(i)]);
    }
    std::vector<HistoryRow> rows;
    int step = 0;
    try {
      for (size_t start = 0; start < order.size();
           start += static_cast<size_t>(config.batch_size)) {
        const size_t end =
            std::min(order.size(), start + static_cast<size_t>(config.batch_size));
        std::vector<PackedSequence> batch;
        batch.reserve(end - start);
        for (size_t i = start; i < end; ++i) batch.push_back(data[order[i]]);
        const StepReport r =
            MinibatchStep<float>(params, adapters, batch, config, epoch,
                                 perturb_rng);
        HistoryRow row;
        row.epoch = epoch;
        row.step = ++step;
        row.loss_rec = r.loss_rec;
        row.loss_vadv = r.loss_vadv;
        row.delta_norm = r.delta_norm;
        row.grad_norm = r.grad_norm;
        row.phase = r.phase;
        rows.push_back(row);
      }
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::kDivergence) {
        adapters = epoch_start;
        adapters.Touch();
        result.history.insert(result.history.end(), rows.begin(), rows.end());
        throw Error(ErrorKind::kDivergence,
                    std::string(e.what()) + " (step " +
                        std::to_string(step + 1) +
                        "); adapters restored to the end of epoch " +
                        std::to_string(epoch - 1));
      }
      throw;
    }
    result.history.insert(result.history.end(), rows.begin(), rows.end());
    result.epochs_completed = epoch;
    if (sink) sink(epoch, adapters, result.history);
  }
  return result;
}

#define PARAVAT_INSTANTIATE_ADVTRAIN(T)                                       \
  template double WeightedNorm<T>(const Mat<T>&, const Mat<T>&);              \
  template Mat<T> SamplePerturbation<T>(int, int, double, double, Rng&);      \
  template Mat<T> InitPerturbation<T>(int, int, double, double, double,       \
                                      Rng&);                                  \
  template Mat<T> ProjectBall<T>(const Mat<T>&, double);                      \
  template Mat<T> ProjectWeightedBall<T>(const Mat<T>&, const HessianDiag<T>&,\
                                         double);                             \
  template Mat<T> AscentStepPgd<T>(const Mat<T>&, const Mat<T>&, double,      \
                                   double);                                   \
  template Mat<T> AscentStepPnm<T>(const Mat<T>&, const Mat<T>&,              \
                                   const HessianDiag<T>&, double, double);    \
  template HessianDiag<T> EstimateHessianDiag<T>(                             \
      const std::function<Mat<T>(const Mat<T>&)>&, const Mat<T>&,             \
      const Mat<T>&, int, double, double, Rng&);                              \
  template HessianDiag<T> EstimateHessianDiag<T>(                             \
      const Parameters<T>&, const AdapterSet<T>&, const PackedSequence&,      \
      const Mat<T>&, const Mat<T>&, int, double, double, Rng&);               \
  template StepReport MinibatchStep<T>(                                       \
      const Parameters<T>&, AdapterSet<T>&, std::span<const PackedSequence>,  \
      const VatConfig&, int, Rng&, const PerturbationObserver<T>*);

PARAVAT_INSTANTIATE_ADVTRAIN(float)
PARAVAT_INSTANTIATE_ADVTRAIN(double)

#undef PARAVAT_INSTANTIATE_ADVTRAIN

}  // namespace paravat
