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

#ifndef PARAVAT_CONFIG_HPP_
#define PARAVAT_CONFIG_HPP_

#include <cstdint>
#include <string>
#include <string_view>

#include "paravat/advtrain.hpp"
#include "paravat/corpus.hpp"
#include "paravat/decode.hpp"
#include "paravat/lora.hpp"
#include "paravat/metrics.hpp"
#include "paravat/model_config.hpp"
#include "paravat/pretrain.hpp"

namespace paravat {

struct PathConfig {
  std::string corpus;
  std::string stopwords_dir;
  std::string checkpoint_dir;
  std::string eval_set;
  std::string vocab;
};

struct DataConfig {
  std::string lang = "en";
  TokenizeMode tokenize = TokenizeMode::kWhitespace;
  // Upper bound on vocabulary entries including the 4 reserved ids. Must
  // not exceed model vocab_size; spare model rows are never decoded.
  int vocab_max = 70;
};

// Everything a command needs, read from a flat `[section]` / `key = value`
// file. Keys outside any section are global (only `seed`).
struct RunConfig {
  ModelConfig model;
  LoraConfig lora;
  VatConfig vat;
  PretrainConfig pretrain;
  CorruptionConfig corruption;
  DecodeConfig decode;
  MetricConfig metrics;
  PathConfig paths;
  DataConfig data;
  uint64_t seed = 0;

  // Copies the component seeds from the global seed: each stream seed is
  // SubstreamSeed(seed, "<component>").
  void PropagateSeed();
  // Checks every component invariant. Path existence is checked separately
  // because each command needs a different subset.
  void Validate() const;
};

RunConfig ParseConfig(std::string_view text);
RunConfig LoadConfig(const std::string& path);

// Canonical text form: sections in fixed order, keys sorted, doubles
// printed round-trip exact. ParseConfig(SerializeConfig(c)) reproduces c.
std::string SerializeConfig(const RunConfig& config);

// Throws kIo naming `what` when `path` is empty or does not exist.
void RequirePath(const std::string& path, const std::string& what);

}  // namespace paravat

#endif  // PARAVAT_CONFIG_HPP_
