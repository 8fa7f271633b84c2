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

#ifndef DOCRE_CHECKPOINT_H_
#define DOCRE_CHECKPOINT_H_

#include <string>
#include <vector>

#include "docre/tensor.h"
#include "json.hpp"

namespace docre {

// Checkpoint container, version 1. Little-endian layout:
//   8 bytes   magic "DOCRECKP"
//   u32       format version
//   u64 + N   UTF-8 JSON header (originating config, free-form)
//   u64       parameter count
//   per parameter:
//     u64 + N   name
//     u32       rank, then rank x i64 dims
//     u64       element count, then that many IEEE-754 doubles
struct Checkpoint {
  static constexpr uint32_t kVersion = 1;

  nlohmann::json header;
  std::vector<Parameter> params;

  void Save(const std::string& path) const;
  static Checkpoint Load(const std::string& path);

  static Checkpoint From(const std::vector<const Parameter*>& params,
                         nlohmann::json header);
  // Copies every parameter of `into` from the checkpoint by name. Throws if
  // one is missing or has a different shape.
  void Restore(const ParameterList& into) const;
  const Parameter* Find(const std::string& name) const;
};

}  // namespace docre

#endif  // DOCRE_CHECKPOINT_H_
