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

#include "paravat/common.hpp"

#include <cmath>
#include <numbers>

namespace paravat {

const char* ErrorKindName(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "InvalidArgument";
    case ErrorKind::kIo: return "IoError";
    case ErrorKind::kEmptyInput: return "EmptyInput";
    case ErrorKind::kEmptyCorpus: return "EmptyCorpus";
    case ErrorKind::kSequenceTooLong: return "SequenceTooLong";
    case ErrorKind::kVocabOverflow: return "VocabOverflow";
    case ErrorKind::kShape: return "ShapeError";
    case ErrorKind::kEmptyLossMask: return "EmptyLossMask";
    case ErrorKind::kTraceMismatch: return "TraceMismatch";
    case ErrorKind::kHessianEstimateFailed: return "HessianEstimateFailed";
    case ErrorKind::kDivergence: return "DivergenceDetected";
    case ErrorKind::kEmptySequence: return "EmptySequence";
    case ErrorKind::kMalformedData: return "MalformedData";
    case ErrorKind::kSchemaMismatch: return "SchemaMismatch";
    case ErrorKind::kVersionMismatch: return "VersionMismatch";
    case ErrorKind::kLocked: return "Locked";
  }
  return "Unknown";
}

void Fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, std::string(ErrorKindName(kind)) + ": " + what);
}

Rng::Rng(uint64_t seed) : engine_(seed) {}

uint64_t Rng::NextU64() { return engine_(); }

double Rng::Uniform() {
  return static_cast<double>(NextU64() >> 11) * 0x1.0p-53;
}

uint64_t Rng::Index(uint64_t n) {
  // Rejection sampling removes modulo bias.
  const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
  uint64_t x;
  do {
    x = NextU64();
  } while (x >= limit);
  return x % n;
}

bool Rng::Bernoulli(double p) { return Uniform() < p; }

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  // Box-Muller; 1 - u keeps the log argument in (0, 1].
  const double u1 = 1.0 - Uniform();
  const double u2 = Uniform();
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

double Rng::Rademacher() { return (NextU64() >> 63) ? 1.0 : -1.0; }

uint64_t Fnv1a64(std::string_view text) {
  uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

uint64_t SubstreamSeed(uint64_t global_seed, std::string_view component) {
  // splitmix64 finalizer over the combined value.
  uint64_t z = global_seed ^ Fnv1a64(component);
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

}  // namespace paravat
