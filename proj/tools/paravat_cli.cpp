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


// Command-line front end. Talks to the library only through the C API.

#include <cstdio>
#include <fstream>
#include <iostream>
#include <iterator>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "paravat/paravat.h"

namespace {

// Exit code for command-line usage problems; same as PARAVAT_ERR_INPUT.
constexpr int kUsage = PARAVAT_ERR_INPUT;

struct Common {
  std::string config;
  std::optional<uint64_t> seed;
  std::vector<std::string> sets;  // key=value overrides
  std::string out;
};

int Report(paravat_status st) {
  if (st != PARAVAT_OK) {
    std::cerr << "paravat: " << paravat_last_error() << "\n";
  }
  return static_cast<int>(st);
}

class ConfigHandle {
 public:
  ~ConfigHandle() { paravat_config_free(ptr_); }
  paravat_config* get() const { return ptr_; }
  paravat_config** out() { return &ptr_; }

 private:
  paravat_config* ptr_ = nullptr;
};

class ModelHandle {
 public:
  ~ModelHandle() { paravat_model_free(ptr_); }
  paravat_model* get() const { return ptr_; }
  paravat_model** out() { return &ptr_; }

 private:
  paravat_model* ptr_ = nullptr;
};

// Owned C string from the library.
class CString {
 public:
  ~CString() { paravat_string_free(ptr_); }
  char** out() { return &ptr_; }
  std::string str() const { return ptr_ ? ptr_ : ""; }

 private:
  char* ptr_ = nullptr;
};

// Applies --seed and --set on top of an already loaded configuration.
paravat_status ApplyOverrides(const Common& c, paravat_config* config) {
  for (const auto& kv : c.sets) {
    const size_t eq = kv.find('=');
    if (eq == std::string::npos) {
      std::cerr << "paravat: --set expects key=value, got '" << kv << "'\n";
      return PARAVAT_ERR_INPUT;
    }
    const paravat_status st = paravat_config_set(
        config, kv.substr(0, eq).c_str(), kv.substr(eq + 1).c_str());
    if (st != PARAVAT_OK) return st;
  }
  if (c.seed) return paravat_config_set_seed(config, *c.seed);
  return PARAVAT_OK;
}

paravat_status LoadConfig(const Common& c, ConfigHandle& config) {
  const paravat_status st =
      c.config.empty() ? paravat_config_default(config.out())
                       : paravat_config_load(c.config.c_str(), config.out());
  if (st != PARAVAT_OK) return st;
  return ApplyOverrides(c, config.get());
}

// Config for commands that run a checkpoint: --config wins, otherwise the
// configuration stored in the checkpoint.
paravat_status ModelConfig(const Common& c, const ModelHandle& model,
                           ConfigHandle& config) {
  const paravat_status st =
      c.config.empty() ? paravat_model_config(model.get(), config.out())
                       : paravat_config_load(c.config.c_str(), config.out());
  if (st != PARAVAT_OK) return st;
  return ApplyOverrides(c, config.get());
}

// Returns the --out option so callers can mark it required.
CLI::Option* AddCommon(CLI::App* cmd, Common& c, bool with_config,
                       bool with_seed, const std::string& out_help) {
  if (with_config) {
    cmd->add_option("--config", c.config, "Configuration file");
    cmd->add_option("--set", c.sets,
                    "Override a config value, e.g. --set vat.alpha=0");
  }
  if (with_seed) cmd->add_option("--seed", c.seed, "Global seed");
  return cmd->add_option("--out", c.out, out_help);
}

void LogLine(const char* line, void*) { std::cerr << line << "\n"; }

bool ReadInput(const std::string& path, std::string& text) {
  if (path.empty() || path == "-") {
    text.assign(std::istreambuf_iterator<char>(std::cin),
                std::istreambuf_iterator<char>());
    return true;
  }
  std::ifstream in(path, std::ios::binary);
  if (!in) return false;
  std::ostringstream buf;
  buf << in.rdbuf();
  text = buf.str();
  return true;
}

bool WriteOutput(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text;
    return static_cast<bool>(std::cout.flush());
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  out << text;
  return static_cast<bool>(out);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"paravat: adversarially regularized LoRA paraphrasing"};
  app.require_subcommand(1);
  app.set_version_flag("--version", paravat_version());

  Common vocab_opts;
  std::string vocab_corpus;
  std::string vocab_mode = "whitespace";
  int vocab_max = 70;
  auto* build_vocab = app.add_subcommand("build-vocab", "Build a vocabulary file");
  build_vocab->add_option("--corpus", vocab_corpus, "Corpus, one sentence per line")
      ->required();
  build_vocab->add_option("--mode", vocab_mode, "whitespace or char");
  build_vocab->add_option("--max-size", vocab_max,
                          "Maximum entries including reserved ids");
  AddCommon(build_vocab, vocab_opts, false, false, "Vocabulary output path")
      ->required();

  Common corrupt_opts;
  std::string corrupt_corpus;
  auto* corrupt = app.add_subcommand("corrupt", "Write corrupted training pairs as JSONL");
  corrupt->add_option("--corpus", corrupt_corpus, "Corpus, one sentence per line")
      ->required();
  AddCommon(corrupt, corrupt_opts, true, true, "JSONL output path")->required();

  Common train_opts;
  std::string resume;
  auto* train = app.add_subcommand("train", "Pretrain the base and train adapters");
  train->add_option("--resume", resume, "Continue from this checkpoint");
  AddCommon(train, train_opts, true, true,
            "Checkpoint directory (overrides paths.checkpoint_dir)");

  Common para_opts;
  std::string para_ckpt;
  std::string para_input;
  auto* paraphrase = app.add_subcommand("paraphrase", "Paraphrase one line at a time");
  paraphrase->add_option("--checkpoint", para_ckpt, "Model checkpoint")->required();
  paraphrase->add_option("--input", para_input, "Input file, '-' for stdin");
  AddCommon(paraphrase, para_opts, true, true, "Output file, '-' for stdout");

  Common eval_opts;
  std::string eval_ckpt;
  std::string eval_set;
  auto* evaluate = app.add_subcommand("evaluate", "Score paraphrases of an eval set");
  evaluate->add_option("--checkpoint", eval_ckpt, "Model checkpoint")->required();
  evaluate->add_option("--eval", eval_set, "Evaluation JSONL (defaults to paths.eval_set)");
  AddCommon(evaluate, eval_opts, true, true, "Output prefix")->required();

  Common report_opts;
  std::vector<std::string> report_inputs;
  auto* report = app.add_subcommand("report", "Merge histories or metric CSVs");
  report->add_option("inputs", report_inputs, "history.csv or metric CSV files")
      ->required();
  AddCommon(report, report_opts, false, false, "Output prefix")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::Success& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  if (*build_vocab) {
    int entries = 0;
    double coverage = 0.0;
    const paravat_status st =
        paravat_build_vocab(vocab_corpus.c_str(), vocab_mode.c_str(), vocab_max,
                            vocab_opts.out.c_str(), &entries, &coverage);
    if (st == PARAVAT_OK) {
      std::fprintf(stderr, "%d entries, %.2f%% token coverage\n", entries,
                   coverage);
    }
    return Report(st);
  }

  if (*corrupt) {
    ConfigHandle config;
    paravat_status st = LoadConfig(corrupt_opts, config);
    int pairs = 0;
    if (st == PARAVAT_OK) {
      st = paravat_corrupt(config.get(), corrupt_corpus.c_str(),
                           corrupt_opts.out.c_str(), &pairs);
    }
    if (st == PARAVAT_OK) std::cerr << pairs << " pairs\n";
    return Report(st);
  }

  if (*train) {
    ConfigHandle config;
    paravat_status st = LoadConfig(train_opts, config);
    if (st == PARAVAT_OK && !train_opts.out.empty()) {
      st = paravat_config_set(config.get(), "paths.checkpoint_dir",
                              train_opts.out.c_str());
    }
    CString final_ckpt;
    if (st == PARAVAT_OK) {
      st = paravat_train(config.get(), resume.empty() ? nullptr : resume.c_str(),
                         LogLine, nullptr, final_ckpt.out());
    }
    if (st == PARAVAT_OK) std::cout << final_ckpt.str() << "\n";
    return Report(st);
  }

  if (*paraphrase) {
    ModelHandle model;
    ConfigHandle config;
    paravat_status st = paravat_model_load(para_ckpt.c_str(), model.out());
    if (st == PARAVAT_OK) st = ModelConfig(para_opts, model, config);
    if (st != PARAVAT_OK) return Report(st);
    std::string text;
    if (!ReadInput(para_input, text)) {
      std::cerr << "paravat: cannot read " << para_input << "\n";
      return PARAVAT_ERR_INPUT;
    }
    CString output;
    CString warnings;
    st = paravat_paraphrase(model.get(), config.get(), text.c_str(),
                            output.out(), warnings.out());
    if (st != PARAVAT_OK) return Report(st);
    std::cerr << warnings.str();
    if (!WriteOutput(para_opts.out, output.str())) {
      std::cerr << "paravat: cannot write " << para_opts.out << "\n";
      return PARAVAT_ERR_INPUT;
    }
    return 0;
  }

  if (*evaluate) {
    ModelHandle model;
    ConfigHandle config;
    paravat_status st = paravat_model_load(eval_ckpt.c_str(), model.out());
    if (st == PARAVAT_OK) st = ModelConfig(eval_opts, model, config);
    if (st != PARAVAT_OK) return Report(st);
    CString table;
    st = paravat_evaluate(model.get(), config.get(),
                          eval_set.empty() ? nullptr : eval_set.c_str(),
                          eval_opts.out.c_str(), table.out());
    if (st == PARAVAT_OK) std::cout << table.str();
    return Report(st);
  }

  if (*report) {
    std::vector<const char*> inputs;
    for (const auto& p : report_inputs) inputs.push_back(p.c_str());
    CString table;
    const paravat_status st = paravat_report(inputs.data(), inputs.size(),
                                             report_opts.out.c_str(), table.out());
    if (st == PARAVAT_OK) std::cout << table.str();
    return Report(st);
  }
  return kUsage;
}
