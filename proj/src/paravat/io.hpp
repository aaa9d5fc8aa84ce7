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

#ifndef PARAVAT_IO_HPP_
#define PARAVAT_IO_HPP_

#include <string>
#include <vector>

#include "paravat/advtrain.hpp"
#include "paravat/metrics.hpp"

namespace paravat {

std::string ReadFile(const std::string& path);
// Writes through a temporary file and a rename.
void WriteFile(const std::string& path, const std::string& contents);

struct PairRecord {
  std::string source;
  std::string target;
  std::string lang;
};

// One JSON object per line with fields source, target, lang.
std::string PairsToJsonl(const std::vector<PairRecord>& pairs);

// Blank lines are skipped. Malformed lines raise kMalformedData naming the
// 1-based line number.
std::vector<EvalRecord> ParseEvalJsonl(const std::string& text);
std::string EvalRecordsToJsonl(const std::vector<EvalRecord>& records);

inline const char* kHistoryHeader =
    "epoch,step,loss_rec,loss_vadv,delta_norm,grad_norm,phase";

std::string HistoryToCsv(const std::vector<HistoryRow>& rows);
// Header must match kHistoryHeader exactly, else kSchemaMismatch.
std::vector<HistoryRow> ParseHistoryCsv(const std::string& text);

// Simple comma-separated table without quoting (all fields produced here
// are numeric or identifiers).
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};
CsvTable ParseCsv(const std::string& text);

}  // namespace paravat

#endif  // PARAVAT_IO_HPP_
