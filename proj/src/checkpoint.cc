// Copyright 2026 The docre Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "docre/checkpoint.h"

#include <cstring>
#include <fstream>
#include <stdexcept>

namespace docre {

namespace {

constexpr char kMagic[8] = {'D', 'O', 'C', 'R', 'E', 'C', 'K', 'P'};

template <typename T>
void Put(std::ostream& out, T v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(T));
}

template <typename T>
T Get(std::istream& in) {
  T v;
  in.read(reinterpret_cast<char*>(&v), sizeof(T));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return v;
}

void PutString(std::ostream& out, const std::string& s) {
  Put<uint64_t>(out, s.size());
  out.write(s.data(), static_cast<std::streamsize>(s.size()));
}

std::string GetString(std::istream& in) {
  const uint64_t n = Get<uint64_t>(in);
  if (n > (1ULL << 32)) throw std::runtime_error("checkpoint: corrupt string length");
  std::string s(n, '\0');
  in.read(s.data(), static_cast<std::streamsize>(n));
  if (!in) throw std::runtime_error("checkpoint: truncated file");
  return s;
}

}  // namespace

void Checkpoint::Save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + path);
  out.write(kMagic, sizeof(kMagic));
  Put<uint32_t>(out, kVersion);
  PutString(out, header.dump());
  Put<uint64_t>(out, params.size());
  for (const Parameter& p : params) {
    PutString(out, p.name);
    Put<uint32_t>(out, static_cast<uint32_t>(p.shape.size()));
    for (int d : p.shape) Put<int64_t>(out, d);
    Put<uint64_t>(out, p.value.size());
    out.write(reinterpret_cast<const char*>(p.value.data()),
              static_cast<std::streamsize>(p.value.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("error writing checkpoint " + path);
}

Checkpoint Checkpoint::Load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path + ": not a checkpoint file");
  }
  const uint32_t version = Get<uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error(path + ": unsupported checkpoint version " +
                             std::to_string(version));
  }
  Checkpoint ckpt;
  ckpt.header = nlohmann::json::parse(GetString(in));
  const uint64_t count = Get<uint64_t>(in);
  for (uint64_t i = 0; i < count; ++i) {
    std::string name = GetString(in);
    const uint32_t rank = Get<uint32_t>(in);
    std::vector<int> shape;
    for (uint32_t r = 0; r < rank; ++r) shape.push_back(static_cast<int>(Get<int64_t>(in)));
    Parameter p(std::move(name), shape);
    const uint64_t n = Get<uint64_t>(in);
    if (n != p.size()) throw std::runtime_error(path + ": element count mismatch");
    in.read(reinterpret_cast<char*>(p.value.data()),
            static_cast<std::streamsize>(n * sizeof(double)));
    if (!in) throw std::runtime_error(path + ": truncated parameter data");
    ckpt.params.push_back(std::move(p));
  }
  return ckpt;
}

Checkpoint Checkpoint::From(const std::vector<const Parameter*>& params,
                            nlohmann::json header) {
  Checkpoint ckpt;
  ckpt.header = std::move(header);
  for (const Parameter* p : params) {
    Parameter copy(p->name, p->shape);
    copy.value = p->value;
    ckpt.params.push_back(std::move(copy));
  }
  return ckpt;
}

const Parameter* Checkpoint::Find(const std::string& name) const {
  for (const Parameter& p : params) {
    if (p.name == name) return &p;
  }
  return nullptr;
}

void Checkpoint::Restore(const ParameterList& into) const {
  for (Parameter* p : into) {
    const Parameter* src = Find(p->name);
    if (!src) throw std::runtime_error("checkpoint has no parameter " + p->name);
    if (src->shape != p->shape) {
      throw std::runtime_error("checkpoint parameter " + p->name + " has a different shape");
    }
    p->value = src->value;
  }
}

}  // namespace docre
