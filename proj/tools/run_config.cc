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


#include "run_config.h"

#include <set>
#include <sstream>

namespace docre::cli {

using nlohmann::json;

namespace {

json AdamJson(const AdamConfig& a) {
  return {{"learning_rate", a.learning_rate}, {"weight_decay", a.weight_decay},
          {"warmup_fraction", a.warmup_fraction}, {"clip_norm", a.clip_norm}};
}

void ReadAdam(const json& j, AdamConfig& a) {
  a.learning_rate = j.at("learning_rate").get<double>();
  a.weight_decay = j.at("weight_decay").get<double>();
  a.warmup_fraction = j.at("warmup_fraction").get<double>();
  a.clip_norm = j.at("clip_norm").get<double>();
}

// Rejects keys the defaults do not have, so typos fail loudly.
void CheckKeys(const json& defaults, const json& given, const std::string& prefix) {
  if (!given.is_object()) return;
  for (auto it = given.begin(); it != given.end(); ++it) {
    std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
    if (!defaults.contains(it.key())) throw ConfigError("unknown config key '" + path + "'");
    if (defaults.at(it.key()).is_object()) {
      if (!it.value().is_object()) throw ConfigError("config key '" + path + "' must be an object");
      CheckKeys(defaults.at(it.key()), it.value(), path);
    }
  }
}

}  // namespace

void RunConfig::Propagate() {
  synth.rng_seed = seed;
  encoder.seed = seed;
  ranker.encoder = encoder;
  ranker.relation_dim = relation_dim;
  ranker.seed = seed;
  pretrain.encoder = encoder;
  pretrain.relation_dim = relation_dim;
  pretrain.seed = seed;
  finetune.relation_dim = relation_dim;
  finetune.seed = seed;
}

void RunConfig::Validate() const {
  auto positive = [](double v, const char* what) {
    if (!(v > 0)) throw ConfigError(std::string(what) + " must be > 0");
  };
  positive(ranker.adam.learning_rate, "ranker.learning_rate");
  positive(pretrain.adam.learning_rate, "pretrain.learning_rate");
  positive(finetune.adam.learning_rate, "finetune.learning_rate");
  positive(relation_dim, "relation_dim");
  positive(distant_top_k, "filter.distant_top_k");
  positive(annotated_per_entity, "filter.annotated_per_entity");
  positive(max_entities, "vocab.max_entities");
  if (!(pretrain.sampler.alpha >= 0 && pretrain.sampler.alpha <= 1)) {
    throw ConfigError("pretrain.alpha must be in [0, 1]");
  }
  if (!(ranker.blank_alpha >= 0 && ranker.blank_alpha <= 1)) {
    throw ConfigError("ranker.blank_alpha must be in [0, 1]");
  }
  if (out.empty()) throw ConfigError("paths.out must not be empty");
  synth.Validate();
}

json RunConfig::ToJson() const {
  json synth_json = docre::ToJson(synth);
  synth_json.erase("rng_seed");
  json encoder_json = docre::ToJson(encoder);
  encoder_json.erase("seed");
  encoder_json.erase("vocab_size");
  return {
      {"seed", seed},
      {"paths",
       {{"out", out},
        {"train", train_path},
        {"dev", dev_path},
        {"test", test_path},
        {"distant", distant_path},
        {"relations", relations_path}}},
      {"synth", synth_json},
      {"split", {{"train", split.train}, {"dev", split.dev}, {"test", split.test}}},
      {"vocab", {{"max_entities", max_entities}}},
      {"encoder", encoder_json},
      {"relation_dim", relation_dim},
      {"ranker",
       {{"epochs", ranker.epochs},
        {"batch_size", ranker.batch_size},
        {"k_n", ranker.k_n},
        {"blank_alpha", ranker.blank_alpha},
        {"adam", AdamJson(ranker.adam)}}},
      {"filter",
       {{"distant_top_k", distant_top_k}, {"annotated_per_entity", annotated_per_entity}}},
      {"pretrain",
       {{"epochs", pretrain.epochs},
        {"batch_size", pretrain.batch_size},
        {"steps_per_epoch", pretrain.steps_per_epoch},
        {"alpha", pretrain.sampler.alpha},
        {"k_n", pretrain.sampler.k_n},
        {"k_s", pretrain.sampler.k_s},
        {"tasks",
         {{"MM", pretrain.tasks.mm}, {"RD", pretrain.tasks.rd}, {"RA", pretrain.tasks.ra}}},
        {"intra", pretrain.intra},
        {"inter", pretrain.inter},
        {"adam", AdamJson(pretrain.adam)}}},
      {"finetune",
       {{"epochs", finetune.epochs},
        {"batch_size", finetune.batch_size},
        {"adam", AdamJson(finetune.adam)}}},
  };
}

RunConfig RunConfigFromJson(const json& given) {
  const json defaults = RunConfig().ToJson();
  CheckKeys(defaults, given, "");
  json j = defaults;
  j.merge_patch(given);

  RunConfig c;
  try {
    c.seed = j.at("seed").get<uint64_t>();
    const json& p = j.at("paths");
    c.out = p.at("out").get<std::string>();
    c.train_path = p.at("train").get<std::string>();
    c.dev_path = p.at("dev").get<std::string>();
    c.test_path = p.at("test").get<std::string>();
    c.distant_path = p.at("distant").get<std::string>();
    c.relations_path = p.at("relations").get<std::string>();

    c.synth = SynthConfigFromJson(j.at("synth"));
    const json& s = j.at("split");
    c.split = {s.at("train").get<double>(), s.at("dev").get<double>(),
               s.at("test").get<double>()};
    c.max_entities = j.at("vocab").at("max_entities").get<int>();
    c.encoder = EncoderParamsFromJson(j.at("encoder"));
    c.relation_dim = j.at("relation_dim").get<int>();

    const json& r = j.at("ranker");
    c.ranker.epochs = r.at("epochs").get<int>();
    c.ranker.batch_size = r.at("batch_size").get<int>();
    c.ranker.k_n = r.at("k_n").get<int>();
    c.ranker.blank_alpha = r.at("blank_alpha").get<double>();
    ReadAdam(r.at("adam"), c.ranker.adam);

    c.distant_top_k = j.at("filter").at("distant_top_k").get<int>();
    c.annotated_per_entity = j.at("filter").at("annotated_per_entity").get<int>();

    const json& pt = j.at("pretrain");
    c.pretrain.epochs = pt.at("epochs").get<int>();
    c.pretrain.batch_size = pt.at("batch_size").get<int>();
    c.pretrain.steps_per_epoch = pt.at("steps_per_epoch").get<long>();
    c.pretrain.sampler.alpha = pt.at("alpha").get<double>();
    c.pretrain.sampler.k_n = pt.at("k_n").get<int>();
    c.pretrain.sampler.k_s = pt.at("k_s").get<int>();
    c.pretrain.tasks.mm = pt.at("tasks").at("MM").get<bool>();
    c.pretrain.tasks.rd = pt.at("tasks").at("RD").get<bool>();
    c.pretrain.tasks.ra = pt.at("tasks").at("RA").get<bool>();
    c.pretrain.intra = pt.at("intra").get<bool>();
    c.pretrain.inter = pt.at("inter").get<bool>();
    ReadAdam(pt.at("adam"), c.pretrain.adam);

    const json& ft = j.at("finetune");
    c.finetune.epochs = ft.at("epochs").get<int>();
    c.finetune.batch_size = ft.at("batch_size").get<int>();
    ReadAdam(ft.at("adam"), c.finetune.adam);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("bad config value: ") + e.what());
  }
  c.Propagate();
  return c;
}

void ApplyOverride(json& j, const std::string& assignment) {
  size_t eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) {
    throw ConfigError("override '" + assignment + "' is not key=value");
  }
  std::string key = assignment.substr(0, eq);
  std::string text = assignment.substr(eq + 1);
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  std::string pointer;
  std::stringstream parts(key);
  for (std::string part; std::getline(parts, part, '.');) {
    if (part.empty()) throw ConfigError("override key '" + key + "' has an empty segment");
    pointer += "/" + part;
  }
  j[json::json_pointer(pointer)] = std::move(value);
}

}  // namespace docre::cli
