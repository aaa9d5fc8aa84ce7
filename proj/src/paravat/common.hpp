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

#ifndef PARAVAT_COMMON_HPP_
#define PARAVAT_COMMON_HPP_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <string_view>

#include <Eigen/Core>

namespace paravat {

// Every failure surfaced by the library carries one of these kinds. The C API
// maps them onto status codes, which the CLI uses as process exit codes.
enum class ErrorKind {
  kInvalidArgument,
  kIo,
  kEmptyInput,
  kEmptyCorpus,
  kSequenceTooLong,
  kVocabOverflow,
  kShape,
  kEmptyLossMask,
  kTraceMismatch,
  kHessianEstimateFailed,
  kDivergence,
  kEmptySequence,
  kMalformedData,
  kSchemaMismatch,
  kVersionMismatch,
  kLocked,
};

const char* ErrorKindName(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const { return kind_; }

 private:
  ErrorKind kind_;
};

[[noreturn]] void Fail(ErrorKind kind, const std::string& what);

template <typename T>
using Mat = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
template <typename T>
using RowVec = Eigen::Matrix<T, 1, Eigen::Dynamic>;

using TokenId = int32_t;

// Seeded random stream. std::mt19937_64 output is fixed by the standard but
// the std distributions are not, so sampling is done here on top of the raw
// engine output to keep seeded runs identical across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  uint64_t NextU64();
  // Uniform in [0, 1).
  double Uniform();
  // Uniform integer in [0, n). n must be > 0.
  uint64_t Index(uint64_t n);
  bool Bernoulli(double p);
  double Normal();
  // +1 or -1 with equal probability.
  double Rademacher();

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

// Stable 64-bit hash used for seed sub-streams.
uint64_t Fnv1a64(std::string_view text);

// Seed of the named component stream derived from a global seed.
uint64_t SubstreamSeed(uint64_t global_seed, std::string_view component);

}  // namespace paravat

#endif  // PARAVAT_COMMON_HPP_
