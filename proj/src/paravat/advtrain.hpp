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

#ifndef PARAVAT_ADVTRAIN_HPP_
#define PARAVAT_ADVTRAIN_HPP_

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "paravat/common.hpp"
#include "paravat/corpus.hpp"
#include "paravat/lora.hpp"
#include "paravat/tinylm.hpp"

namespace paravat {

struct VatConfig {
  double epsilon = 1.0;      // perturbation bound
  double lr = 1e-3;          // global learning rate for the descent step
  double alpha = 1.0;        // weight of the virtual adversarial term
  double eta = 0.1;          // ascent step size
  int ascent_steps = 3;      // K
  int epochs = 1;            // N
  int pgd_epochs = -1;       // e*; negative means N / 2
  double init_scale = 0.1;   // gamma
  double init_std = 1.0;     // sigma
  double damping = 1e-3;     // lambda, floor of the Hessian diagonal
  int hessian_probes = 1;
  double hessian_step = 1e-3;
  int max_backtracks = 3;    // eta halvings when an ascent step loses ground
  int batch_size = 16;
  uint64_t seed = 0;

  int PgdEpochs() const { return pgd_epochs < 0 ? epochs / 2 : pgd_epochs; }
  void Validate() const;
};

enum class AscentPhase { kPgd, kPnm };
const char* AscentPhaseName(AscentPhase phase);

// Per-coordinate curvature estimate; every entry is >= the damping floor.
template <typename T>
struct HessianDiag {
  Mat<T> values;
};

double FrobeniusNorm(const Eigen::Ref<const Mat<float>>& m);
double FrobeniusNorm(const Eigen::Ref<const Mat<double>>& m);

// sqrt(sum_i h_i v_i^2).
template <typename T>
double WeightedNorm(const Mat<T>& v, const Mat<T>& h);

// gamma * sigma * N(0, 1) entries, before any projection.
template <typename T>
Mat<T> SamplePerturbation(int rows, int cols, double gamma, double sigma,
                          Rng& rng);

// Sample, then project into the epsilon ball.
template <typename T>
Mat<T> InitPerturbation(int rows, int cols, double gamma, double sigma,
                        double epsilon, Rng& rng);

// Scales delta onto the Frobenius epsilon ball when it lies outside.
template <typename T>
Mat<T> ProjectBall(const Mat<T>& delta, double epsilon);

// Scales delta onto the H-weighted epsilon ball when it lies outside.
template <typename T>
Mat<T> ProjectWeightedBall(const Mat<T>& delta, const HessianDiag<T>& h,
                           double epsilon);

// Gradient norms below this are treated as zero and the step is skipped.
inline constexpr double kMinAscentGradNorm = 1e-12;

// project_ball(delta + eta * g / ||g||_F, epsilon).
template <typename T>
Mat<T> AscentStepPgd(const Mat<T>& delta, const Mat<T>& grad, double eta,
                     double epsilon);

// Newton-style step: delta + eta * H^-1 (g / ||g||_F), then projection onto
// the epsilon ball of the H-weighted norm.
template <typename T>
Mat<T> AscentStepPnm(const Mat<T>& delta, const Mat<T>& grad,
                     const HessianDiag<T>& h, double eta, double epsilon);

// Hutchinson-style diagonal estimate from finite differences of a gradient
// oracle: mean over Rademacher probes z of z * (grad(delta + mu z) -
// grad(delta)) / mu, in absolute value, floored at `damping`.
template <typename T>
HessianDiag<T> EstimateHessianDiag(
    const std::function<Mat<T>(const Mat<T>&)>& grad_fn, const Mat<T>& delta,
    const Mat<T>& grad_at_delta, int probes, double step, double damping,
    Rng& rng);

// Diagonal Hessian of the virtual adversarial loss of one sequence with
// respect to its perturbation.
template <typename T>
HessianDiag<T> EstimateHessianDiag(const Parameters<T>& params,
                                   const AdapterSet<T>& adapters,
                                   const PackedSequence& sequence,
                                   const Mat<T>& clean_logits,
                                   const Mat<T>& delta, int probes,
                                   double step, double damping, Rng& rng);

struct StepReport {
  double loss_rec = 0.0;        // mean over sequences and ascent steps
  double loss_vadv = 0.0;       // same, at the pre-update perturbations
  double loss_vadv_init = 0.0;  // mean at the initial perturbations
  double loss_vadv_final = 0.0; // mean after the last ascent step
  double delta_norm = 0.0;      // mean Frobenius norm after the last step
  double grad_norm = 0.0;       // norm of the accumulated adapter gradient
  int backtracks = 0;
  AscentPhase phase = AscentPhase::kPgd;
};

// Called with (sequence index, ascent step, perturbation) after each ascent
// step; step 0 is the initial perturbation.
template <typename T>
using PerturbationObserver =
    std::function<void(size_t, int, const Mat<T>&)>;

// One minibatch of virtual adversarial training: K ascent steps on a
// per-sequence perturbation while accumulating (1/K)-weighted adapter
// gradients, then a single SGD step on the adapters. Base parameters are
// read-only. Throws DivergenceDetected on a non-finite loss, leaving the
// adapters untouched.
template <typename T>
StepReport MinibatchStep(const Parameters<T>& params, AdapterSet<T>& adapters,
                         std::span<const PackedSequence> batch,
                         const VatConfig& config, int epoch, Rng& rng,
                         const PerturbationObserver<T>* observer = nullptr);

struct HistoryRow {
  int epoch = 0;
  int step = 0;
  double loss_rec = 0.0;
  double loss_vadv = 0.0;
  double delta_norm = 0.0;
  double grad_norm = 0.0;
  AscentPhase phase = AscentPhase::kPgd;
};

struct TrainResult {
  std::vector<HistoryRow> history;
  int epochs_completed = 0;
};

// Invoked after every finished epoch with the adapters at that point.
using EpochSink = std::function<void(int epoch, const AdapterSet<float>&,
                                     const std::vector<HistoryRow>&)>;

// Full training loop: per-epoch seeded shuffle, PGD for epochs <= e*, PNM
// after. On divergence the adapters are restored to the last completed epoch
// and the error is rethrown.
TrainResult Train(std::span<const PackedSequence> data,
                  const Parameters<float>& params, AdapterSet<float>& adapters,
                  const VatConfig& config, const EpochSink& sink = {});

}  // namespace paravat

#endif  // PARAVAT_ADVTRAIN_HPP_
