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

#include "paravat/config.hpp"

#include <charconv>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>
#include <vector>

#include "paravat/common.hpp"
#include "paravat/text.hpp"

namespace paravat {
namespace {

std::string FormatDouble(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

[[noreturn]] void BadValue(const std::string& key, std::string_view value,
                           const char* want) {
  Fail(ErrorKind::kInvalidArgument, "config: " + key + " = '" +
                                        std::string(value) + "' is not " + want);
}

double ToDouble(const std::string& key, std::string_view v) {
  std::string s(v);
  char* end = nullptr;
  double out = std::strtod(s.c_str(), &end);
  if (s.empty() || end != s.c_str() + s.size()) BadValue(key, v, "a number");
  return out;
}

template <typename I>
I ToInt(const std::string& key, std::string_view v) {
  I out{};
  auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    BadValue(key, v, "an integer");
  }
  return out;
}

// One accessor per key: parse from text and print back.
struct Field {
  std::function<void(RunConfig&, const std::string&, std::string_view)> set;
  std::function<std::string(const RunConfig&)> get;
};

template <typename M>
Field DoubleField(M member) {
  return {[member](RunConfig& c, const std::string& k, std::string_view v) {
            member(c) = ToDouble(k, v);
          },
          [member](const RunConfig& c) {
            return FormatDouble(member(const_cast<RunConfig&>(c)));
          }};
}

template <typename M>
Field IntField(M member) {
  return {[member](RunConfig& c, const std::string& k, std::string_view v) {
            member(c) = ToInt<int>(k, v);
          },
          [member](const RunConfig& c) {
            return std::to_string(member(const_cast<RunConfig&>(c)));
          }};
}

template <typename M>
Field StringField(M member) {
  return {[member](RunConfig& c, const std::string&, std::string_view v) {
            member(c) = std::string(v);
          },
          [member](const RunConfig& c) {
            return member(const_cast<RunConfig&>(c));
          }};
}

#define PV_D(expr) DoubleField([](RunConfig& c) -> double& { return expr; })
#define PV_I(expr) IntField([](RunConfig& c) -> int& { return expr; })
#define PV_S(expr) StringField([](RunConfig& c) -> std::string& { return expr; })

// Section name -> key -> field. std::map keeps keys sorted for output.
const std::map<std::string, std::map<std::string, Field>>& Schema() {
  static const auto* schema = new std::map<std::string, std::map<std::string, Field>>{
      {"model",
       {{"vocab_size", PV_I(c.model.vocab_size)},
        {"d_model", PV_I(c.model.d_model)},
        {"layers", PV_I(c.model.layers)},
        {"heads", PV_I(c.model.heads)},
        {"d_ff", PV_I(c.model.d_ff)},
        {"max_len", PV_I(c.model.max_len)},
        {"dropout", PV_D(c.model.dropout)}}},
      {"lora",
       {{"rank", PV_I(c.lora.rank)},
        {"alpha", PV_D(c.lora.alpha)},
        {"init_std", PV_D(c.lora.init_std)}}},
      {"vat",
       {{"epsilon", PV_D(c.vat.epsilon)},
        {"lr", PV_D(c.vat.lr)},
        {"alpha", PV_D(c.vat.alpha)},
        {"eta", PV_D(c.vat.eta)},
        {"ascent_steps", PV_I(c.vat.ascent_steps)},
        {"epochs", PV_I(c.vat.epochs)},
        {"pgd_epochs", PV_I(c.vat.pgd_epochs)},
        {"init_scale", PV_D(c.vat.init_scale)},
        {"init_std", PV_D(c.vat.init_std)},
        {"damping", PV_D(c.vat.damping)},
        {"hessian_probes", PV_I(c.vat.hessian_probes)},
        {"hessian_step", PV_D(c.vat.hessian_step)},
        {"max_backtracks", PV_I(c.vat.max_backtracks)},
        {"batch_size", PV_I(c.vat.batch_size)}}},
      {"pretrain",
       {{"epochs", PV_I(c.pretrain.epochs)},
        {"lr", PV_D(c.pretrain.lr)},
        {"beta1", PV_D(c.pretrain.beta1)},
        {"beta2", PV_D(c.pretrain.beta2)},
        {"adam_eps", PV_D(c.pretrain.adam_eps)},
        {"batch_size", PV_I(c.pretrain.batch_size)},
        {"repeat_prob", PV_D(c.pretrain.repeat_prob)},
        {"word_shuffle_prob", PV_D(c.pretrain.word_shuffle_prob)}}},
      {"corruption", {{"shuffle_prob", PV_D(c.corruption.shuffle_prob)}}},
      {"decode",
       {{"strategy",
         {[](RunConfig& c, const std::string&, std::string_view v) {
            c.decode.strategy = ParseDecodeStrategy(v);
          },
          [](const RunConfig& c) {
            return std::string(DecodeStrategyName(c.decode.strategy));
          }}},
        {"top_k", PV_I(c.decode.top_k)},
        {"temperature", PV_D(c.decode.temperature)},
        {"max_new_tokens", PV_I(c.decode.max_new_tokens)}}},
      {"metrics",
       {{"ibleu_alpha", PV_D(c.metrics.ibleu_alpha)},
        {"bert_ibleu_beta", PV_D(c.metrics.bert_ibleu_beta)},
        {"parascore_omega", PV_D(c.metrics.parascore_omega)},
        {"char_languages",
         {[](RunConfig& c, const std::string&, std::string_view v) {
            c.metrics.char_languages.clear();
            std::string item;
            std::istringstream in{std::string(v)};
            while (std::getline(in, item, ',')) {
              std::string t(text::Trim(item));
              if (!t.empty()) c.metrics.char_languages.insert(t);
            }
          },
          [](const RunConfig& c) {
            std::string out;
            for (const auto& l : c.metrics.char_languages) {
              if (!out.empty()) out += ',';
              out += l;
            }
            return out;
          }}}}},
      {"paths",
       {{"corpus", PV_S(c.paths.corpus)},
        {"stopwords_dir", PV_S(c.paths.stopwords_dir)},
        {"checkpoint_dir", PV_S(c.paths.checkpoint_dir)},
        {"eval_set", PV_S(c.paths.eval_set)},
        {"vocab", PV_S(c.paths.vocab)}}},
      {"data",
       {{"lang", PV_S(c.data.lang)},
        {"tokenize",
         {[](RunConfig& c, const std::string&, std::string_view v) {
            c.data.tokenize = ParseTokenizeMode(v);
          },
          [](const RunConfig& c) {
            return std::string(TokenizeModeName(c.data.tokenize));
          }}},
        {"vocab_max", PV_I(c.data.vocab_max)}}},
  };
  return *schema;
}

#undef PV_D
#undef PV_I
#undef PV_S

const std::vector<std::string>& SectionOrder() {
  static const std::vector<std::string> order = {
      "model", "lora",  "vat",     "pretrain", "corruption",
      "decode", "metrics", "paths", "data"};
  return order;
}

}  // namespace

void RunConfig::PropagateSeed() {
  vat.seed = SubstreamSeed(seed, "vat");
  pretrain.seed = SubstreamSeed(seed, "pretrain");
  corruption.seed = SubstreamSeed(seed, "corruption");
  decode.seed = SubstreamSeed(seed, "decode");
}

void RunConfig::Validate() const {
  model.Validate();
  lora.Validate(model);
  vat.Validate();
  pretrain.Validate();
  corruption.Validate();
  decode.Validate();
  if (data.vocab_max < Vocab::kNumReserved + 1) {
    Fail(ErrorKind::kInvalidArgument, "config: data.vocab_max must be >= 5");
  }
  if (data.vocab_max > model.vocab_size) {
    Fail(ErrorKind::kInvalidArgument,
         "config: data.vocab_max exceeds model.vocab_size");
  }
  if (data.lang.empty()) Fail(ErrorKind::kInvalidArgument, "config: data.lang is empty");
}

RunConfig ParseConfig(std::string_view text) {
  RunConfig config;
  std::string section;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = text::Trim(raw);
    if (line.empty() || line[0] == '#' || line[0] == ';') continue;
    const std::string where = "config line " + std::to_string(line_no) + ": ";
    if (line.front() == '[') {
      if (line.back() != ']') {
        Fail(ErrorKind::kInvalidArgument, where + "unterminated section header");
      }
      section = std::string(text::Trim(line.substr(1, line.size() - 2)));
      if (!Schema().count(section)) {
        Fail(ErrorKind::kInvalidArgument, where + "unknown section [" + section + "]");
      }
      continue;
    }
    const size_t eq = line.find('=');
    if (eq == std::string_view::npos) {
      Fail(ErrorKind::kInvalidArgument, where + "expected key = value");
    }
    const std::string key(text::Trim(line.substr(0, eq)));
    const std::string_view value = text::Trim(line.substr(eq + 1));
    if (section.empty()) {
      if (key != "seed") {
        Fail(ErrorKind::kInvalidArgument, where + "unknown global key '" + key + "'");
      }
      config.seed = ToInt<uint64_t>(key, value);
      continue;
    }
    const auto& fields = Schema().at(section);
    auto it = fields.find(key);
    if (it == fields.end()) {
      Fail(ErrorKind::kInvalidArgument,
           where + "unknown key '" + key + "' in [" + section + "]");
    }
    try {
      it->second.set(config, section + "." + key, value);
    } catch (const Error& e) {
      // Drop the kind prefix Fail() put on the inner message.
      const std::string inner = e.what();
      const size_t colon = inner.find(": ");
      Fail(ErrorKind::kInvalidArgument,
           where + (colon == std::string::npos ? inner : inner.substr(colon + 2)));
    }
  }
  config.PropagateSeed();
  return config;
}

RunConfig LoadConfig(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read config " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseConfig(buf.str());
}

std::string SerializeConfig(const RunConfig& config) {
  std::ostringstream out;
  out << "seed = " << config.seed << "\n";
  for (const auto& name : SectionOrder()) {
    out << "\n[" << name << "]\n";
    for (const auto& [key, field] : Schema().at(name)) {
      out << key << " = " << field.get(config) << "\n";
    }
  }
  return out.str();
}

void RequirePath(const std::string& path, const std::string& what) {
  if (path.empty()) Fail(ErrorKind::kIo, what + " path is not set");
  std::error_code ec;
  if (!std::filesystem::exists(path, ec)) {
    Fail(ErrorKind::kIo, what + " not found: " + path);
  }
}

}  // namespace paravat
