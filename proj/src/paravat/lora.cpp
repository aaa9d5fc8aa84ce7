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

#include "paravat/lora.hpp"

namespace paravat {

void LoraConfig::Validate(const ModelConfig& model) const {
  if (rank < 1) Fail(ErrorKind::kInvalidArgument, "lora rank must be >= 1");
  // Square d x d projections: r << min(d, k) is enforced as r <= d / 2.
  if (2 * rank > model.d_model) {
    Fail(ErrorKind::kInvalidArgument,
         "lora rank " + std::to_string(rank) + " exceeds d_model / 2");
  }
  if (!(alpha > 0.0)) Fail(ErrorKind::kInvalidArgument, "lora alpha must be > 0");
  if (!(init_std >= 0.0)) {
    Fail(ErrorKind::kInvalidArgument, "lora init_std must be >= 0");
  }
}

template <typename T>
AdapterSet<T> AdapterSet<T>::Create(const ModelConfig& model,
                                    const LoraConfig& lora, Rng& rng) {
  model.Validate();
  lora.Validate(model);
  const int d = model.d_model;
  auto make = [&] {
    LoraAdapter<T> a;
    a.a.resize(lora.rank, d);
    for (Eigen::Index i = 0; i < a.a.size(); ++i) {
      a.a.data()[i] = static_cast<T>(lora.init_std * rng.Normal());
    }
    a.b = Mat<T>::Zero(d, lora.rank);
    a.scale = static_cast<T>(lora.Scale());
    return a;
  };
  AdapterSet set;
  for (int i = 0; i < model.layers; ++i) {
    set.query.push_back(make());
    set.value.push_back(make());
  }
  return set;
}

template <typename T>
AdapterSet<T> AdapterSet<T>::ZerosLike(const AdapterSet& other) {
  AdapterSet set;
  auto zero = [](const LoraAdapter<T>& a) {
    LoraAdapter<T> z;
    z.a = Mat<T>::Zero(a.a.rows(), a.a.cols());
    z.b = Mat<T>::Zero(a.b.rows(), a.b.cols());
    z.scale = a.scale;
    return z;
  };
  for (const auto& a : other.query) set.query.push_back(zero(a));
  for (const auto& a : other.value) set.value.push_back(zero(a));
  return set;
}

template <typename T>
int64_t AdapterSet<T>::NumScalars() const {
  int64_t n = 0;
  ForEach([&](const std::string&, const Mat<T>& m) { n += m.size(); });
  return n;
}

namespace {

template <typename T>
void CheckCompatible(const Mat<T>& w, const LoraAdapter<T>& adapter) {
  const auto& a = adapter.a;
  const auto& b = adapter.b;
  if (b.rows() != w.rows() || a.cols() != w.cols() || b.cols() != a.rows()) {
    Fail(ErrorKind::kShape,
         "adapter B " + std::to_string(b.rows()) + "x" +
             std::to_string(b.cols()) + ", A " + std::to_string(a.rows()) +
             "x" + std::to_string(a.cols()) + " incompatible with W " +
             std::to_string(w.rows()) + "x" + std::to_string(w.cols()));
  }
}

}  // namespace

template <typename T>
Mat<T> EffectiveWeight(const Mat<T>& w, const LoraAdapter<T>& adapter) {
  CheckCompatible(w, adapter);
  Mat<T> out = w;
  out.noalias() += adapter.scale * (adapter.b * adapter.a);
  return out;
}

template <typename T>
Mat<T> Merge(const LoraAdapter<T>& adapter, const Mat<T>& w) {
  return EffectiveWeight(w, adapter);
}

int64_t TrainableCount(const ModelConfig& config, int rank) {
  const int64_t d = config.d_model;
  const int64_t k = config.d_model;
  return 2LL * config.layers * rank * (d + k);
}

int64_t FullCount(const ModelConfig& config) {
  const int64_t d = config.d_model;
  return 2LL * config.layers * d * d;
}

template struct AdapterSet<float>;
template struct AdapterSet<double>;
template Mat<float> EffectiveWeight(const Mat<float>&, const LoraAdapter<float>&);
template Mat<double> EffectiveWeight(const Mat<double>&,
                                     const LoraAdapter<double>&);
template Mat<float> Merge(const LoraAdapter<float>&, const Mat<float>&);
template Mat<double> Merge(const LoraAdapter<double>&, const Mat<double>&);

}  // namespace paravat
