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

#include "paravat/checkpoint.hpp"

#include <fcntl.h>
#include <unistd.h>

#include <bit>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <vector>

#include "paravat/common.hpp"

namespace paravat {
namespace {

constexpr std::string_view kMagic = "paravat-checkpoint";

struct TensorRef {
  std::string name;
  Mat<float>* m;
};

std::vector<TensorRef> Tensors(Checkpoint& c) {
  std::vector<TensorRef> out;
  c.params.ForEach([&](const std::string& n, Mat<float>& m) {
    out.push_back({"base." + n, &m});
  });
  c.adapters.ForEach([&](const std::string& n, Mat<float>& m) {
    out.push_back({"lora." + n, &m});
  });
  return out;
}

void AppendFloats(const Mat<float>& m, std::string& out) {
  const size_t start = out.size();
  out.resize(start + sizeof(float) * static_cast<size_t>(m.size()));
  std::memcpy(out.data() + start, m.data(), sizeof(float) * m.size());
  if constexpr (std::endian::native == std::endian::big) {
    for (size_t i = start; i < out.size(); i += 4) {
      std::swap(out[i], out[i + 3]);
      std::swap(out[i + 1], out[i + 2]);
    }
  }
}

void ReadFloats(const char* src, Mat<float>& m) {
  std::memcpy(m.data(), src, sizeof(float) * m.size());
  if constexpr (std::endian::native == std::endian::big) {
    auto* bytes = reinterpret_cast<char*>(m.data());
    for (Eigen::Index i = 0; i < m.size() * 4; i += 4) {
      std::swap(bytes[i], bytes[i + 3]);
      std::swap(bytes[i + 1], bytes[i + 2]);
    }
  }
}

[[noreturn]] void Malformed(const std::string& why) {
  Fail(ErrorKind::kMalformedData, "checkpoint: " + why);
}

// Reads "<word> <rest>" lines from the header.
class HeaderReader {
 public:
  explicit HeaderReader(const std::string& bytes) : bytes_(bytes) {}

  std::string Line() {
    size_t nl = bytes_.find('\n', pos_);
    if (nl == std::string::npos) Malformed("truncated header");
    std::string line = bytes_.substr(pos_, nl - pos_);
    pos_ = nl + 1;
    return line;
  }
  std::string Expect(const std::string& word) {
    std::string line = Line();
    if (line.rfind(word + " ", 0) != 0 && line != word) {
      Malformed("expected '" + word + "', got '" + line + "'");
    }
    return line.size() > word.size() ? line.substr(word.size() + 1) : "";
  }
  long ExpectCount(const std::string& word) {
    std::string v = Expect(word);
    try {
      size_t used = 0;
      long n = std::stol(v, &used);
      if (used != v.size() || n < 0) throw std::invalid_argument(v);
      return n;
    } catch (const std::exception&) {
      Malformed("bad count for '" + word + "'");
    }
  }
  std::string Raw(size_t n) {
    if (pos_ + n > bytes_.size()) Malformed("truncated block");
    std::string out = bytes_.substr(pos_, n);
    pos_ += n;
    return out;
  }
  size_t pos() const { return pos_; }

 private:
  const std::string& bytes_;
  size_t pos_ = 0;
};

}  // namespace

std::string SerializeCheckpoint(const Checkpoint& ckpt) {
  Checkpoint& c = const_cast<Checkpoint&>(ckpt);
  const std::string config = SerializeConfig(c.config);
  const std::string vocab = c.vocab.Serialize();
  std::ostringstream head;
  head << kMagic << " " << kCheckpointVersion << "\n";
  head << "epoch " << c.epoch << "\n";
  head << "final " << (c.final ? 1 : 0) << "\n";
  head << "history " << c.history << "\n";
  head << "lora_rank " << c.adapters.rank() << "\n";
  head << "config " << config.size() << "\n" << config;
  head << "vocab " << vocab.size() << "\n" << vocab;
  auto tensors = Tensors(c);
  head << "tensors " << tensors.size() << "\n";
  size_t offset = 0;
  for (const auto& t : tensors) {
    head << t.name << " " << t.m->rows() << " " << t.m->cols() << " " << offset
         << "\n";
    offset += sizeof(float) * static_cast<size_t>(t.m->size());
  }
  head << "end\n";
  std::string out = head.str();
  out.reserve(out.size() + offset);
  for (const auto& t : tensors) AppendFloats(*t.m, out);
  return out;
}

Checkpoint ParseCheckpoint(const std::string& bytes) {
  HeaderReader r(bytes);
  {
    std::string first = r.Line();
    std::istringstream in(first);
    std::string magic;
    int version = -1;
    in >> magic >> version;
    if (magic != kMagic) Malformed("not a checkpoint file");
    if (version != kCheckpointVersion) {
      Fail(ErrorKind::kVersionMismatch,
           "checkpoint format version " + std::to_string(version) +
               " is not supported (expected " +
               std::to_string(kCheckpointVersion) + ")");
    }
  }
  Checkpoint c;
  c.epoch = static_cast<int>(r.ExpectCount("epoch"));
  c.final = r.ExpectCount("final") != 0;
  c.history = r.Expect("history");
  const int rank = static_cast<int>(r.ExpectCount("lora_rank"));
  c.config = ParseConfig(r.Raw(static_cast<size_t>(r.ExpectCount("config"))));
  c.vocab = Vocab::Parse(r.Raw(static_cast<size_t>(r.ExpectCount("vocab"))));

  c.params = Parameters<float>::Zeros(c.config.model);
  LoraConfig lc = c.config.lora;
  lc.rank = rank;
  lc.init_std = 0.0;
  Rng unused(0);
  c.adapters = AdapterSet<float>::Create(c.config.model, lc, unused);

  auto tensors = Tensors(c);
  const long count = r.ExpectCount("tensors");
  if (count != static_cast<long>(tensors.size())) {
    Malformed("expected " + std::to_string(tensors.size()) + " tensors, found " +
              std::to_string(count));
  }
  std::vector<size_t> offsets;
  for (const auto& t : tensors) {
    std::istringstream in(r.Line());
    std::string name;
    long rows = -1, cols = -1;
    size_t offset = 0;
    in >> name >> rows >> cols >> offset;
    if (!in || name != t.name || rows != t.m->rows() || cols != t.m->cols()) {
      Malformed("tensor directory mismatch at " + t.name);
    }
    offsets.push_back(offset);
  }
  r.Expect("end");
  const size_t body = r.pos();
  for (size_t i = 0; i < tensors.size(); ++i) {
    const size_t n = sizeof(float) * static_cast<size_t>(tensors[i].m->size());
    if (body + offsets[i] + n > bytes.size()) Malformed("truncated tensor data");
    ReadFloats(bytes.data() + body + offsets[i], *tensors[i].m);
  }
  return c;
}

void SaveCheckpoint(const Checkpoint& ckpt, const std::string& path) {
  const std::string bytes = SerializeCheckpoint(ckpt);
  const std::string tmp = path + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) Fail(ErrorKind::kIo, "cannot write " + tmp);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!out) Fail(ErrorKind::kIo, "write failed for " + tmp);
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) Fail(ErrorKind::kIo, "cannot move checkpoint into " + path);
}

Checkpoint LoadCheckpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) Fail(ErrorKind::kIo, "cannot read checkpoint " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return ParseCheckpoint(buf.str());
}

DirectoryLock::DirectoryLock(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  path_ = (std::filesystem::path(dir) / ".lock").string();
  int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
  if (fd < 0) {
    if (errno == EEXIST) {
      Fail(ErrorKind::kLocked, "checkpoint directory is in use: " + path_);
    }
    Fail(ErrorKind::kIo, "cannot create lock " + path_);
  }
  std::string pid = std::to_string(::getpid()) + "\n";
  ssize_t written = ::write(fd, pid.data(), pid.size());
  (void)written;
  ::close(fd);
}

DirectoryLock::~DirectoryLock() { ::unlink(path_.c_str()); }

}  // namespace paravat
