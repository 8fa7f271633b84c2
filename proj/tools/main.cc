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


#include <algorithm>
#include <fstream>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "commands.h"

namespace {

using docre::cli::RunConfig;
using nlohmann::json;

int Fail(const std::string& command, const std::string& kind, const std::string& message,
         int code) {
  std::cerr << json{{"status", "error"},
                    {"command", command},
                    {"kind", kind},
                    {"message", message}}
                   .dump()
            << '\n';
  return code;
}

RunConfig BuildConfig(const std::string& path, const std::vector<std::string>& overrides,
                      std::optional<uint64_t> seed, const std::string& out) {
  json j = json::object();
  if (!path.empty()) {
    std::ifstream in(path);
    if (!in) throw docre::ConfigError("cannot read config file '" + path + "'");
    j = json::parse(in, nullptr, false);
    if (j.is_discarded()) throw docre::ConfigError("config file '" + path + "' is not JSON");
  }
  for (const std::string& o : overrides) docre::cli::ApplyOverride(j, o);
  if (seed) j["seed"] = *seed;
  if (!out.empty()) j["paths"]["out"] = out;
  RunConfig c = docre::cli::RunConfigFromJson(j);
  c.Validate();
  return c;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Document-level relation extraction with denoised pre-training"};
  app.require_subcommand(1);

  std::string config_path, out;
  std::optional<uint64_t> seed;
  std::vector<std::string> overrides;
  bool force = false;
  app.add_option("--config", config_path, "JSON run configuration");
  app.add_option("--seed", seed, "Master seed");
  app.add_option("--out", out, "Output directory");
  app.add_option("--set", overrides, "Config override key.path=value (repeatable)");
  app.add_flag("--force", force, "Overwrite artifacts instead of writing new versions");

  app.add_subcommand("synth", "Generate the synthetic annotated and distant corpora");
  app.add_subcommand("vocab", "Build the token vocabulary");
  app.add_subcommand("denoise-train", "Train the pair ranker on annotated data");
  auto* filter = app.add_subcommand("denoise-filter", "Rank and filter entity pairs");
  std::vector<std::string> corpora = {"train", "dev", "test", "distant"};
  filter->add_option("--corpus", corpora, "Corpora to filter (repeatable)")
      ->check(CLI::IsMember({"train", "dev", "test", "distant"}));

  docre::cli::Ablation ablation;
  auto* pretrain = app.add_subcommand("pretrain", "Pre-train on the filtered distant corpus");
  auto add_ablation = [&](CLI::App* sub) {
    sub->add_option("--disable-task", ablation.tasks, "MM, RD or RA (repeatable)")
        ->check(CLI::IsMember({"MM", "RD", "RA"}));
    sub->add_option("--disable-subtask", ablation.subtasks, "intra or inter (repeatable)")
        ->check(CLI::IsMember({"intra", "inter"}));
  };
  add_ablation(pretrain);

  docre::cli::FinetuneOptions finetune_options;
  auto* finetune = app.add_subcommand("finetune", "Fine-tune on annotated data");
  finetune->add_option("--init", finetune_options.init, "pretrained or fresh")
      ->check(CLI::IsMember({"pretrained", "fresh"}));
  add_ablation(finetune);

  docre::cli::EvalOptions eval_options;
  auto* eval = app.add_subcommand("eval", "Predict and score a split");
  eval->add_option("--split", eval_options.split, "dev or test")
      ->check(CLI::IsMember({"dev", "test"}));
  eval->add_option("--arm", eval_options.arm, "Fine-tuned arm, e.g. pretrained, fresh");
  eval->add_option("--model", eval_options.model, "Explicit fine-tuned checkpoint");
  app.add_subcommand("report", "Summarize every evaluation in the output directory");

  for (CLI::App* sub : app.get_subcommands({})) sub->fallthrough();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    return Fail("", "usage", e.what(), 2);
  }

  std::string command = app.get_subcommands().front()->get_name();
  try {
    docre::cli::Workspace ws(BuildConfig(config_path, overrides, seed, out), force, command);
    ablation.tasks.erase(std::unique(ablation.tasks.begin(), ablation.tasks.end()),
                         ablation.tasks.end());
    finetune_options.ablation = ablation;
    if (command == "synth") docre::cli::CmdSynth(ws);
    else if (command == "vocab") docre::cli::CmdVocab(ws);
    else if (command == "denoise-train") docre::cli::CmdDenoiseTrain(ws);
    else if (command == "denoise-filter") docre::cli::CmdDenoiseFilter(ws, corpora);
    else if (command == "pretrain") docre::cli::CmdPretrain(ws, ablation);
    else if (command == "finetune") docre::cli::CmdFinetune(ws, finetune_options);
    else if (command == "eval") docre::cli::CmdEval(ws, eval_options);
    else if (command == "report") docre::cli::CmdReport(ws);
  } catch (const docre::cli::MissingArtifact& e) {
    return Fail(command, "missing_artifact", e.what(), 3);
  } catch (const docre::ConfigError& e) {
    return Fail(command, "config", e.what(), 2);
  } catch (const std::exception& e) {
    return Fail(command, "runtime", e.what(), 1);
  }
  return 0;
}
