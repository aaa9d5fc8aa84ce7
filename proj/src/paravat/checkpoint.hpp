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

#ifndef PARAVAT_CHECKPOINT_HPP_
#define PARAVAT_CHECKPOINT_HPP_

#include <string>

#include "paravat/config.hpp"
#include "paravat/corpus.hpp"
#include "paravat/lora.hpp"
#include "paravat/tinylm.hpp"

namespace paravat {

inline constexpr int kCheckpointVersion = 1;

// Text header (format version, config snapshot, vocabulary, tensor
// directory with name, shape and byte offset) followed by raw little-endian
// float32 tensors in row-major order.
struct Checkpoint {
  RunConfig config;
  Vocab vocab{TokenizeMode::kWhitespace, {}, {}};
  Parameters<float> params;
  AdapterSet<float> adapters;
  std::string history;  // path of the training history CSV, may be empty
  int epoch = 0;
  bool final = false;
};

std::string SerializeCheckpoint(const Checkpoint& ckpt);
Checkpoint ParseCheckpoint(const std::string& bytes);

// Writes to a temporary file in the same directory, then renames.
void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path);
Checkpoint LoadCheckpoint(const std::string& path);

// Exclusive lock on a directory through `<dir>/.lock`, created with
// O_EXCL. A second holder gets kLocked. Released on destruction.
class DirectoryLock {
 public:
  explicit DirectoryLock(const std::string& dir);
  ~DirectoryLock();
  DirectoryLock(const DirectoryLock&) = delete;
  DirectoryLock& operator=(const DirectoryLock&) = delete;

 private:
  std::string path_;
};

}  // namespace paravat

#endif  // PARAVAT_CHECKPOINT_HPP_
