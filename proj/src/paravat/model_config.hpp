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

#ifndef PARAVAT_MODEL_CONFIG_HPP_
#define PARAVAT_MODEL_CONFIG_HPP_

namespace paravat {

struct ModelConfig {
  int vocab_size = 70;
  int d_model = 64;
  int layers = 2;
  int heads = 4;
  int d_ff = 128;
  int max_len = 32;
  // Only 0 is supported; kept so configs can state it explicitly.
  double dropout = 0.0;

  int head_dim() const { return d_model / heads; }
  void Validate() const;
  friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

}  // namespace paravat

#endif  // PARAVAT_MODEL_CONFIG_HPP_
