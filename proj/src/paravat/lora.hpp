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

#ifndef PARAVAT_LORA_HPP_
#define PARAVAT_LORA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "paravat/common.hpp"
#include "paravat/model_config.hpp"

namespace paravat {

struct LoraConfig {
  int rank = 4;
  // Update scale is alpha / rank.
  double alpha = 8.0;
  double init_std = 0.02;

  double Scale() const { return alpha / rank; }
  void Validate(const ModelConfig& model) const;
};

// Low-rank update B * A for a d x k weight: B is d x r (zero at creation),
// A is r x k (Gaussian at creation).
template <typename T>
struct LoraAdapter {
  Mat<T> a;
  Mat<T> b;
  T scale = T(1);

  int rank() const { return static_cast<int>(a.rows()); }
};

enum class AdapterTarget { kQuery, kValue };

// One adapter per (layer, {query, value}) projection.
template <typename T>
struct AdapterSet {
  std::vector<LoraAdapter<T>> query;
  std::vector<LoraAdapter<T>> value;
  // Bumped on every in-place update so stale forward traces can be detected.
  uint64_t revision = 0;

  static AdapterSet Create(const ModelConfig& model, const LoraConfig& lora,
                           Rng& rng);
  static AdapterSet ZerosLike(const AdapterSet& other);

  int num_layers() const { return static_cast<int>(query.size()); }
  size_t size() const { return query.size() + value.size(); }
  int rank() const { return query.empty() ? 0 : query.front().rank(); }
  LoraAdapter<T>& Get(int layer, AdapterTarget target) {
    return target == AdapterTarget::kQuery ? query.at(layer)
                                           : value.at(layer);
  }
  const LoraAdapter<T>& Get(int layer, AdapterTarget target) const {
    return target == AdapterTarget::kQuery ? query.at(layer)
                                           : value.at(layer);
  }
  void Touch() { ++revision; }
  int64_t NumScalars() const;

  // Visits every trainable factor as ("layers.<i>.<query|value>.<A|B>", m).
  template <typename F>
  void ForEach(F&& fn) {
    for (size_t i = 0; i < query.size(); ++i) {
      const std::string p = "layers." + std::to_string(i) + ".";
      fn(p + "query.A", query[i].a);
      fn(p + "query.B", query[i].b);
      fn(p + "value.A", value[i].a);
      fn(p + "value.B", value[i].b);
    }
  }
  template <typename F>
  void ForEach(F&& fn) const {
    const_cast<AdapterSet*>(this)->ForEach(
        [&](const std::string& name, Mat<T>& m) {
          fn(name, static_cast<const Mat<T>&>(m));
        });
  }

  template <typename U>
  AdapterSet<U> Cast() const {
    AdapterSet<U> out;
    auto cast = [](const LoraAdapter<T>& a) {
      LoraAdapter<U> c;
      c.a = a.a.template cast<U>();
      c.b = a.b.template cast<U>();
      c.scale = static_cast<U>(a.scale);
      return c;
    };
    for (const auto& a : query) out.query.push_back(cast(a));
    for (const auto& a : value) out.value.push_back(cast(a));
    return out;
  }
};

// W + scale * B * A. W is not modified.
template <typename T>
Mat<T> EffectiveWeight(const Mat<T>& w, const LoraAdapter<T>& adapter);

// Folds the adapter into a dense matrix. Not idempotent: merging the same
// adapter twice adds its update twice.
template <typename T>
Mat<T> Merge(const LoraAdapter<T>& adapter, const Mat<T>& w);

// Trainable scalars when adapting the query and value projections of every
// layer: 2L * r * (d + k) with k = d.
int64_t TrainableCount(const ModelConfig& config, int rank);
// Scalars in the dense matrices those adapters replace: 2L * d * k.
int64_t FullCount(const ModelConfig& config);

}  // namespace paravat

#endif  // PARAVAT_LORA_HPP_
