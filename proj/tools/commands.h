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


#ifndef DOCRE_TOOLS_COMMANDS_H_
#define DOCRE_TOOLS_COMMANDS_H_

#include <filesystem>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "run_config.h"

namespace docre::cli {

// A prerequisite stage has not produced its artifact yet.
class MissingArtifact : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Artifact naming inside the output directory. Existing files are never
// overwritten unless `force` is set; a new run writes name.vN.ext instead,
// and readers pick the highest version present.
class Workspace {
 public:
  Workspace(RunConfig config, bool force, std::string command);

  const RunConfig& config() const { return config_; }
  const std::string& command() const { return command_; }

  std::filesystem::path Output(const std::string& name) const;
  std::filesystem::path Input(const std::string& name, const std::string& producer) const;
  // Explicit path from the config when set, the workspace artifact otherwise.
  std::filesystem::path CorpusInput(const std::string& configured, const std::string& name) const;

  // Paths inside the output directory are recorded relative to it.
  std::string Describe(const std::filesystem::path& p) const;
  void NoteInput(const std::filesystem::path& p) { inputs_.push_back(Describe(p)); }
  nlohmann::json Provenance() const;
  void WriteSidecar(const std::filesystem::path& artifact) const;

 private:
  RunConfig config_;
  bool force_;
  std::string command_;
  std::filesystem::path dir_;
  std::vector<std::string> inputs_;
};

struct Ablation {
  std::vector<std::string> tasks;     // MM, RD, RA
  std::vector<std::string> subtasks;  // intra, inter

  void ApplyTo(PretrainConfig& config) const;
  // "" for the full model, otherwise e.g. "-noRD-nointer".
  std::string Suffix() const;
};

struct FinetuneOptions {
  std::string init = "pretrained";
  Ablation ablation;
};

struct EvalOptions {
  std::string split = "test";
  std::string arm = "pretrained";
  std::string model;  // explicit checkpoint path overrides `arm`
};

void CmdSynth(Workspace& ws);
void CmdVocab(Workspace& ws);
void CmdDenoiseTrain(Workspace& ws);
void CmdDenoiseFilter(Workspace& ws, const std::vector<std::string>& corpora);
void CmdPretrain(Workspace& ws, const Ablation& ablation);
void CmdFinetune(Workspace& ws, const FinetuneOptions& options);
void CmdEval(Workspace& ws, const EvalOptions& options);
void CmdReport(Workspace& ws);

}  // namespace docre::cli

#endif  // DOCRE_TOOLS_COMMANDS_H_
