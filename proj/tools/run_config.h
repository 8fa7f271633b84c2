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


#ifndef DOCRE_TOOLS_RUN_CONFIG_H_
#define DOCRE_TOOLS_RUN_CONFIG_H_

#include <cstdint>
#include <string>

#include "docre/corpus.h"
#include "docre/denoise.h"
#include "docre/encoder.h"
#include "docre/finetune.h"
#include "docre/pretrain.h"
#include "docre/synth.h"
#include "json.hpp"

namespace docre::cli {

// Everything a pipeline run depends on. Serialized in full into the header
// or sidecar of every artifact.
struct RunConfig {
  uint64_t seed = 1;

  // Corpus files. Empty paths resolve to the files `synth` writes into the
  // output directory.
  std::string out = "run";
  std::string train_path, dev_path, test_path, distant_path, relations_path;

  SynthConfig synth;
  SplitFractions split;
  int max_entities = 32;

  EncoderParams encoder;
  int relation_dim = 256;

  RankerConfig ranker;
  int distant_top_k = 20;
  int annotated_per_entity = 2;

  PretrainConfig pretrain;
  FinetuneConfig finetune;

  // Applies `seed` and the shared encoder/relation sizes to every stage.
  void Propagate();
  void Validate() const;
  nlohmann::json ToJson() const;
};

RunConfig RunConfigFromJson(const nlohmann::json& j);

// Sets `key` (dotted path, e.g. "pretrain.epochs") to `value`, which is read
// as JSON when it parses and as a string otherwise.
void ApplyOverride(nlohmann::json& j, const std::string& assignment);

}  // namespace docre::cli

#endif  // DOCRE_TOOLS_RUN_CONFIG_H_
