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

#include "paravat/io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "paravat/common.hpp"
#include "paravat/text.hpp"

namespace paravat {
namespace {

using json = nlohmann::json;

std::vector<std::string> SplitComma(const std::string& line) {
  std::vector<std::string> out;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) out.push_back(cell);
  if (!line.empty() && line.back() == ',') out.push_back("");
  return out;
}

std::string Num(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.9g", v);
  return buf;
}

}  // namespace

std::string ReadFile(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void WriteFile(const std::string& path, const std::string& contents) {
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + path);
    out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
    if (!out) Fail(ErrorKind::kIo, "write failed for " + path);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot write " + path);
}

std::string PairsToJsonl(const std::vector<PairRecord>& pairs) {
  std::string out;
  for (const auto& p : pairs) {
    json j;
    j["source"] = p.source;
    j["target"] = p.target;
    j["lang"] = p.lang;
    out += j.dump() + "\n";
  }
  return out;
}

std::vector<EvalRecord> ParseEvalJsonl(const std::string& text) {
  std::vector<EvalRecord> out;
  std::istringstream in(text);
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (text::Trim(line).empty()) continue;
    auto bad = [&](const std::string& why) {
      Fail(ErrorKind::kMalformedData,
           "eval set line " + std::to_string(line_no) + ": " + why);
    };
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      bad("invalid JSON");
    }
    if (!j.is_object()) bad("expected an object");
    EvalRecord rec;
    if (!j.contains("input") || !j["input"].is_string()) bad("missing string 'input'");
    rec.input = j["input"].get<std::string>();
    if (text::Trim(rec.input).empty()) bad("empty 'input'");
    if (j.contains("candidate") && !j["candidate"].is_null()) {
      if (!j["candidate"].is_string()) bad("'candidate' must be a string");
      rec.candidate = j["candidate"].get<std::string>();
    }
    if (j.contains("references")) {
      if (!j["references"].is_array()) bad("'references' must be an array");
      for (const auto& r : j["references"]) {
        if (!r.is_string()) bad("references must be strings");
        std::string s = r.get<std::string>();
        if (text::Trim(s).empty()) bad("empty reference");
        rec.references.push_back(std::move(s));
      }
    }
    if (!j.contains("lang") || !j["lang"].is_string()) bad("missing string 'lang'");
    rec.lang = j["lang"].get<std::string>();
    if (rec.lang.empty()) bad("empty 'lang'");
    out.push_back(std::move(rec));
  }
  return out;
}

std::string EvalRecordsToJsonl(const std::vector<EvalRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    json j;
    j["input"] = r.input;
    if (r.candidate) j["candidate"] = *r.candidate;
    j["references"] = r.references;
    j["lang"] = r.lang;
    out += j.dump() + "\n";
  }
  return out;
}

std::string HistoryToCsv(const std::vector<HistoryRow>& rows) {
  std::string out = std::string(kHistoryHeader) + "\n";
  for (const auto& r : rows) {
    out += std::to_string(r.epoch) + "," + std::to_string(r.step) + "," +
           Num(r.loss_rec) + "," + Num(r.loss_vadv) + "," + Num(r.delta_norm) +
           "," + Num(r.grad_norm) + "," + AscentPhaseName(r.phase) + "\n";
  }
  return out;
}

std::vector<HistoryRow> ParseHistoryCsv(const std::string& text) {
  CsvTable t = ParseCsv(text);
  if (t.header != SplitComma(kHistoryHeader)) {
    Fail(ErrorKind::kSchemaMismatch, "history header differs from '" +
                                         std::string(kHistoryHeader) + "'");
  }
  std::vector<HistoryRow> rows;
  for (size_t i = 0; i < t.rows.size(); ++i) {
    const auto& c = t.rows[i];
    try {
      if (c.size() != 7) throw std::invalid_argument("width");
      HistoryRow r;
      r.epoch = std::stoi(c[0]);
      r.step = std::stoi(c[1]);
      r.loss_rec = std::stod(c[2]);
      r.loss_vadv = std::stod(c[3]);
      r.delta_norm = std::stod(c[4]);
      r.grad_norm = std::stod(c[5]);
      if (c[6] != "pgd" && c[6] != "pnm") throw std::invalid_argument("phase");
      r.phase = c[6] == "pnm" ? AscentPhase::kPnm : AscentPhase::kPgd;
      rows.push_back(r);
    } catch (const std::exception&) {
      Fail(ErrorKind::kMalformedData,
           "history row " + std::to_string(i + 2) + " is malformed");
    }
  }
  return rows;
}

CsvTable ParseCsv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (first) {
      t.header = SplitComma(line);
      first = false;
    } else {
      t.rows.push_back(SplitComma(line));
    }
  }
  return t;
}

}  // namespace paravat
