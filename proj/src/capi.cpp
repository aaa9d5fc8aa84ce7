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


#include "paravat/paravat.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <vector>

#include "paravat/checkpoint.hpp"
#include "paravat/config.hpp"
#include "paravat/pipeline.hpp"

struct paravat_config {
  paravat::RunConfig config;
};

struct paravat_model {
  paravat::Checkpoint checkpoint;
};

namespace {

using paravat::ErrorKind;

thread_local std::string g_last_error;

paravat_status StatusFor(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kDivergence:
    case ErrorKind::kHessianEstimateFailed:
      return PARAVAT_ERR_DIVERGENCE;
    case ErrorKind::kMalformedData:
      return PARAVAT_ERR_MALFORMED;
    case ErrorKind::kSchemaMismatch:
      return PARAVAT_ERR_SCHEMA;
    case ErrorKind::kTraceMismatch:
      return PARAVAT_ERR_INTERNAL;
    default:
      return PARAVAT_ERR_INPUT;
  }
}

template <typename F>
paravat_status Guard(F&& fn) {
  g_last_error.clear();
  try {
    fn();
    return PARAVAT_OK;
  } catch (const paravat::Error& e) {
    g_last_error = e.what();
    return StatusFor(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = std::string("internal error: ") + e.what();
  } catch (...) {
    g_last_error = "internal error";
  }
  return PARAVAT_ERR_INTERNAL;
}

void Require(const void* p, const char* what) {
  if (p == nullptr) {
    paravat::Fail(ErrorKind::kInvalidArgument, std::string(what) + " is NULL");
  }
}

char* Dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.data(), s.size() + 1);
  return out;
}

std::vector<std::string> SplitLines(const std::string& text) {
  std::vector<std::string> lines;
  size_t start = 0;
  while (start < text.size()) {
    size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

std::string JoinLines(const std::vector<std::string>& lines) {
  std::string out;
  for (const auto& l : lines) out += l + "\n";
  return out;
}

}  // namespace

extern "C" {

const char* paravat_version(void) { return "0.1.0"; }

const char* paravat_last_error(void) { return g_last_error.c_str(); }

void paravat_string_free(char* s) { std::free(s); }

paravat_status paravat_config_default(paravat_config** out) {
  return Guard([&] {
    Require(out, "out");
    auto* c = new paravat_config;
    c->config.PropagateSeed();
    *out = c;
  });
}

paravat_status paravat_config_load(const char* path, paravat_config** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    paravat::RunConfig config = paravat::LoadConfig(path);
    config.Validate();
    *out = new paravat_config{std::move(config)};
  });
}

paravat_status paravat_config_set(paravat_config* config, const char* key,
                                  const char* value) {
  return Guard([&] {
    Require(config, "config");
    Require(key, "key");
    Require(value, "value");
    const std::string k(key);
    const size_t dot = k.find('.');
    std::string text = paravat::SerializeConfig(config->config);
    if (dot == std::string::npos) {
      // Global keys go before the first section.
      text = k + " = " + value + "\n" + text.substr(text.find('['));
    } else {
      text += "[" + k.substr(0, dot) + "]\n" + k.substr(dot + 1) + " = " +
              value + "\n";
    }
    paravat::RunConfig updated = paravat::ParseConfig(text);
    updated.Validate();
    config->config = std::move(updated);
  });
}

paravat_status paravat_config_set_seed(paravat_config* config, uint64_t seed) {
  return Guard([&] {
    Require(config, "config");
    config->config.seed = seed;
    config->config.PropagateSeed();
  });
}

paravat_status paravat_config_serialize(const paravat_config* config,
                                        char** out) {
  return Guard([&] {
    Require(config, "config");
    Require(out, "out");
    *out = Dup(paravat::SerializeConfig(config->config));
  });
}

void paravat_config_free(paravat_config* config) { delete config; }

paravat_status paravat_build_vocab(const char* corpus_path, const char* mode,
                                   int max_size, const char* out_path,
                                   int* entries, double* coverage_percent) {
  return Guard([&] {
    Require(corpus_path, "corpus_path");
    Require(out_path, "out_path");
    const paravat::TokenizeMode m = paravat::ParseTokenizeMode(
        mode != nullptr ? mode : "whitespace");
    const paravat::VocabStats stats =
        paravat::CmdBuildVocab(corpus_path, m, max_size, out_path);
    if (entries != nullptr) *entries = stats.entries;
    if (coverage_percent != nullptr) *coverage_percent = stats.Coverage();
  });
}

paravat_status paravat_corrupt(const paravat_config* config,
                               const char* corpus_path, const char* out_path,
                               int* pairs) {
  return Guard([&] {
    Require(config, "config");
    Require(corpus_path, "corpus_path");
    Require(out_path, "out_path");
    const int n = paravat::CmdCorrupt(config->config, corpus_path, out_path);
    if (pairs != nullptr) *pairs = n;
  });
}

paravat_status paravat_train(const paravat_config* config, const char* resume,
                             paravat_log_fn log, void* user,
                             char** final_checkpoint) {
  return Guard([&] {
    Require(config, "config");
    paravat::LogFn fn;
    if (log != nullptr) {
      fn = [log, user](const std::string& line) { log(line.c_str(), user); };
    }
    const paravat::TrainSummary s = paravat::CmdTrain(
        config->config, resume != nullptr ? resume : "", fn);
    if (final_checkpoint != nullptr) *final_checkpoint = Dup(s.final_checkpoint);
  });
}

paravat_status paravat_model_load(const char* path, paravat_model** out) {
  return Guard([&] {
    Require(path, "path");
    Require(out, "out");
    *out = new paravat_model{paravat::LoadCheckpoint(path)};
  });
}

paravat_status paravat_model_config(const paravat_model* model,
                                    paravat_config** out) {
  return Guard([&] {
    Require(model, "model");
    Require(out, "out");
    *out = new paravat_config{model->checkpoint.config};
  });
}

void paravat_model_free(paravat_model* model) { delete model; }

paravat_status paravat_paraphrase(const paravat_model* model,
                                  const paravat_config* config,
                                  const char* input, char** output,
                                  char** warnings) {
  return Guard([&] {
    Require(model, "model");
    Require(input, "input");
    Require(output, "output");
    const paravat::RunConfig& c =
        config != nullptr ? config->config : model->checkpoint.config;
    const paravat::ParaphraseResult r =
        paravat::CmdParaphrase(model->checkpoint, c, SplitLines(input));
    char* out = Dup(JoinLines(r.lines));
    if (warnings != nullptr) {
      try {
        *warnings = Dup(JoinLines(r.warnings));
      } catch (...) {
        std::free(out);
        throw;
      }
    }
    *output = out;
  });
}

paravat_status paravat_evaluate(const paravat_model* model,
                                const paravat_config* config,
                                const char* eval_path, const char* out_prefix,
                                char** table) {
  return Guard([&] {
    Require(model, "model");
    Require(out_prefix, "out_prefix");
    const paravat::RunConfig& c =
        config != nullptr ? config->config : model->checkpoint.config;
    const std::string t = paravat::CmdEvaluate(
        model->checkpoint, c, eval_path != nullptr ? eval_path : c.paths.eval_set,
        out_prefix);
    if (table != nullptr) *table = Dup(t);
  });
}

paravat_status paravat_report(const char* const* inputs, size_t count,
                              const char* out_prefix, char** table) {
  return Guard([&] {
    Require(out_prefix, "out_prefix");
    if (count > 0) Require(inputs, "inputs");
    std::vector<std::string> paths;
    for (size_t i = 0; i < count; ++i) {
      Require(inputs[i], "inputs[i]");
      paths.emplace_back(inputs[i]);
    }
    const std::string t = paravat::CmdReport(paths, out_prefix);
    if (table != nullptr) *table = Dup(t);
  });
}

}  // extern "C"
