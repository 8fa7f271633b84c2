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


#include "commands.h"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <map>
#include <regex>
#include <sstream>

#include "docre/checkpoint.h"
#include "docre/marking.h"

namespace docre::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

fs::path Versioned(const fs::path& p, int version) {
  if (version == 1) return p;
  return p.parent_path() /
         (p.stem().string() + ".v" + std::to_string(version) + p.extension().string());
}

void WriteJson(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << j.dump(2) << '\n';
}

json ReadJson(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  return json::parse(in);
}

LogFn Progress(const std::string& command) {
  return [command](const std::string& line) { std::cerr << command << ": " << line << '\n'; };
}

RelationVocabulary LoadRelations(Workspace& ws) {
  const RunConfig& c = ws.config();
  fs::path path;
  if (!c.relations_path.empty()) {
    path = ws.CorpusInput(c.relations_path, "relations.txt");
  } else if (fs::exists(fs::path(c.out) / "relations.txt")) {
    path = ws.Input("relations.txt", "synth");
  }
  if (!path.empty()) {
    ws.NoteInput(path);
    return RelationVocabulary::Load(path.string());
  }
  // No relation file: codes come from the training corpus in order of appearance.
  RelationVocabulary relations;
  LoadDocred(ws.CorpusInput(c.train_path, "train.json").string(), relations, true);
  return relations;
}

std::string ConfiguredPath(const RunConfig& c, const std::string& corpus) {
  if (corpus == "train") return c.train_path;
  if (corpus == "dev") return c.dev_path;
  if (corpus == "test") return c.test_path;
  if (corpus == "distant") return c.distant_path;
  throw ConfigError("unknown corpus '" + corpus + "' (expected train, dev, test or distant)");
}

std::vector<Document> LoadCorpus(Workspace& ws, const RelationVocabulary& relations,
                                 const std::string& corpus) {
  fs::path path = ws.CorpusInput(ConfiguredPath(ws.config(), corpus), corpus + ".json");
  ws.NoteInput(path);
  RelationVocabulary copy = relations;
  return LoadDocred(path.string(), copy, false);
}

Vocabulary LoadVocabulary(Workspace& ws) {
  fs::path path = ws.Input("vocab.txt", "vocab");
  ws.NoteInput(path);
  return Vocabulary::Load(path.string());
}

// The filtration must come from the same corpus file that is being used.
Filtration LoadFiltration(Workspace& ws, const std::string& corpus) {
  std::string producer = "denoise-filter --corpus " + corpus;
  fs::path path = ws.Input("filter-" + corpus + ".json", producer);
  fs::path source = ws.CorpusInput(ConfiguredPath(ws.config(), corpus), corpus + ".json");
  ws.NoteInput(path);
  Filtration f = Filtration::Load(path.string());
  json inputs = f.header.value("inputs", json::array());
  if (std::find(inputs.begin(), inputs.end(), ws.Describe(source)) == inputs.end()) {
    throw MissingArtifact("missing artifact: " + path.string() + " does not filter " +
                          source.string() + "; run `docre " + producer + "` again");
  }
  return f;
}

void CheckVocabularySize(const EncoderParams& params, const Vocabulary& vocab,
                         const std::string& what) {
  if (params.vocab_size != vocab.size()) {
    throw ConfigError(what + " was built for a vocabulary of " +
                      std::to_string(params.vocab_size) + " tokens but vocab.txt has " +
                      std::to_string(vocab.size()));
  }
}

EncoderParams EncoderFor(const RunConfig& c, const Vocabulary& vocab) {
  EncoderParams p = c.encoder;
  p.vocab_size = vocab.size();
  return p;
}

std::string Fixed(double v, int digits = 4) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << v;
  return s.str();
}

}  // namespace

Workspace::Workspace(RunConfig config, bool force, std::string command)
    : config_(std::move(config)), force_(force), command_(std::move(command)),
      dir_(config_.out) {
  fs::create_directories(dir_);
}

fs::path Workspace::Output(const std::string& name) const {
  fs::path base = dir_ / name;
  if (force_) return base;
  for (int v = 1;; ++v) {
    fs::path p = Versioned(base, v);
    if (!fs::exists(p)) return p;
  }
}

fs::path Workspace::Input(const std::string& name, const std::string& producer) const {
  fs::path base = dir_ / name;
  if (!fs::exists(base)) {
    throw MissingArtifact("missing artifact '" + base.string() + "': run `docre " + producer +
                          "` first");
  }
  fs::path latest = base;
  for (int v = 2; fs::exists(Versioned(base, v)); ++v) latest = Versioned(base, v);
  return latest;
}

fs::path Workspace::CorpusInput(const std::string& configured, const std::string& name) const {
  if (configured.empty()) return Input(name, "synth");
  if (!fs::exists(configured)) {
    throw MissingArtifact("missing artifact '" + configured +
                          "': configured path does not exist");
  }
  return configured;
}

std::string Workspace::Describe(const fs::path& p) const {
  fs::path rel = fs::path(p).lexically_normal().lexically_relative(dir_.lexically_normal());
  if (!rel.empty() && *rel.begin() != "..") return rel.string();
  return p.string();
}

// The output directory itself is left out so a run can be moved.
json Workspace::Provenance() const {
  json config = config_.ToJson();
  config["paths"].erase("out");
  return {{"command", command_}, {"config", config}, {"inputs", inputs_}};
}

void Workspace::WriteSidecar(const fs::path& artifact) const {
  WriteJson(artifact.string() + ".meta.json", Provenance());
}

void Ablation::ApplyTo(PretrainConfig& config) const {
  for (const std::string& t : tasks) {
    if (t == "MM") config.tasks.mm = false;
    else if (t == "RD") config.tasks.rd = false;
    else if (t == "RA") config.tasks.ra = false;
    else throw ConfigError("unknown task '" + t + "' (expected MM, RD or RA)");
  }
  for (const std::string& s : subtasks) {
    if (s == "intra") config.intra = false;
    else if (s == "inter") config.inter = false;
    else throw ConfigError("unknown subtask '" + s + "' (expected intra or inter)");
  }
}

std::string Ablation::Suffix() const {
  std::vector<std::string> parts;
  for (const char* t : {"MM", "RD", "RA"}) {
    if (std::find(tasks.begin(), tasks.end(), t) != tasks.end()) parts.push_back(t);
  }
  for (const char* s : {"intra", "inter"}) {
    if (std::find(subtasks.begin(), subtasks.end(), s) != subtasks.end()) parts.push_back(s);
  }
  std::string out;
  for (const std::string& p : parts) out += "-no" + p;
  return out;
}

void CmdSynth(Workspace& ws) {
  const RunConfig& c = ws.config();
  SynthCorpus corpus = Synthesize(c.synth);
  CorpusSplit split = Split(corpus.annotated, c.split, c.seed);

  auto emit = [&](const std::string& name, const std::vector<Document>& docs) {
    fs::path p = ws.Output(name);
    WriteDocred(p.string(), docs, corpus.relations);
    ws.WriteSidecar(p);
  };
  emit("train.json", split.train);
  emit("dev.json", split.dev);
  emit("test.json", split.test);
  emit("distant.json", corpus.distant);

  fs::path rel = ws.Output("relations.txt");
  corpus.relations.Save(rel.string());
  ws.WriteSidecar(rel);
  fs::path truth = ws.Output("synth-truth.json");
  WriteJson(truth, SidecarJson(corpus, c.synth));
  ws.WriteSidecar(truth);

  std::cout << "synth: annotated=" << corpus.annotated.size()
            << " train=" << split.train.size() << " dev=" << split.dev.size()
            << " test=" << split.test.size() << " distant=" << corpus.distant.size()
            << " noise_rate=" << Fixed(corpus.DistantNoiseRate()) << '\n';
}

void CmdVocab(Workspace& ws) {
  const RunConfig& c = ws.config();
  RelationVocabulary relations = LoadRelations(ws);
  std::vector<Document> docs = LoadCorpus(ws, relations, "train");
  bool has_distant = !c.distant_path.empty() || fs::exists(fs::path(c.out) / "distant.json");
  if (has_distant) {
    std::vector<Document> distant = LoadCorpus(ws, relations, "distant");
    docs.insert(docs.end(), distant.begin(), distant.end());
  }
  Vocabulary vocab = Vocabulary::Build(docs, c.max_entities);
  fs::path p = ws.Output("vocab.txt");
  vocab.Save(p.string());
  ws.WriteSidecar(p);
  std::cout << "vocab: tokens=" << vocab.size() << " max_entities=" << vocab.max_entities()
            << " path=" << p.string() << '\n';
}

void CmdDenoiseTrain(Workspace& ws) {
  const RunConfig& c = ws.config();
  RelationVocabulary relations = LoadRelations(ws);
  std::vector<Document> train = LoadCorpus(ws, relations, "train");
  Vocabulary vocab = LoadVocabulary(ws);
  RankerConfig rc = c.ranker;
  rc.encoder = EncoderFor(c, vocab);
  Ranker ranker = TrainRanker(train, vocab, rc, Progress(ws.command()));
  fs::path p = ws.Output("ranker.ckpt");
  json header = ws.Provenance();
  header["ranker"] = rc.ToJson();
  ranker.Save(p.string(), header);
  std::cout << "denoise-train: docs=" << train.size() << " path=" << p.string() << '\n';
}

void CmdDenoiseFilter(Workspace& ws, const std::vector<std::string>& corpora) {
  const RunConfig& c = ws.config();
  fs::path ranker_path = ws.Input("ranker.ckpt", "denoise-train");
  RelationVocabulary relations = LoadRelations(ws);
  Vocabulary vocab = LoadVocabulary(ws);
  ws.NoteInput(ranker_path);
  Ranker ranker = Ranker::Load(ranker_path.string());
  CheckVocabularySize(ranker.model().encoder_params(), vocab, ranker_path.string());

  for (const std::string& corpus : corpora) {
    Workspace stage = ws;
    std::vector<Document> docs = LoadCorpus(stage, relations, corpus);
    CutoffRule rule = corpus == "distant" ? CutoffRule::Fixed(c.distant_top_k)
                                          : CutoffRule::PerEntity(c.annotated_per_entity);
    json header = stage.Provenance();
    header["corpus"] = corpus;
    header["rule"] = rule.ToJson();
    Filtration filtration = FilterCorpus(docs, vocab, ranker, rule, header);
    fs::path p = ws.Output("filter-" + corpus + ".json");
    filtration.Save(p.string());

    std::cout << "denoise-filter: corpus=" << corpus << " docs=" << docs.size();
    if (corpus != "distant") {
      std::cout << " gold_recall=" << Fixed(GoldPairRecall(docs, filtration))
                << " random_recall=" << Fixed(RandomRankingRecall(docs, rule));
    }
    std::cout << " path=" << p.string() << '\n';
  }
}

void CmdPretrain(Workspace& ws, const Ablation& ablation) {
  const RunConfig& c = ws.config();
  RelationVocabulary relations = LoadRelations(ws);
  std::vector<Document> distant = LoadCorpus(ws, relations, "distant");
  Vocabulary vocab = LoadVocabulary(ws);
  Filtration filtration = LoadFiltration(ws, "distant");

  PretrainConfig pc = c.pretrain;
  ablation.ApplyTo(pc);
  pc.encoder = EncoderFor(c, vocab);
  PretrainCorpus corpus(distant, vocab, &filtration);
  PretrainModel model(pc.encoder, pc.relation_dim);
  PretrainResult result = Pretrain(model, corpus, pc, Progress(ws.command()));

  std::string suffix = ablation.Suffix();
  fs::path p = ws.Output("pretrained" + suffix + ".ckpt");
  json header = ws.Provenance();
  header["pretrain"] = pc.ToJson();
  model.Save(p.string(), header);
  fs::path log = ws.Output("pretrain" + suffix + "-log.tsv");
  WritePretrainLog(log.string(), result);
  ws.WriteSidecar(log);

  std::cout << "pretrain: steps=" << (result.log.empty() ? 0 : result.log.back().step + 1)
            << " final_epoch_loss="
            << (result.epoch_loss.empty() ? 0.0 : result.epoch_loss.back())
            << " path=" << p.string() << '\n';
}

void CmdFinetune(Workspace& ws, const FinetuneOptions& options) {
  const RunConfig& c = ws.config();
  if (options.init != "pretrained" && options.init != "fresh") {
    throw ConfigError("--init must be pretrained or fresh");
  }
  bool ablated = !options.ablation.tasks.empty() || !options.ablation.subtasks.empty();
  if (options.init == "fresh" && ablated) {
    throw ConfigError("--disable-task/--disable-subtask select a pre-trained checkpoint; "
                      "they need --init pretrained");
  }
  RelationVocabulary relations = LoadRelations(ws);
  std::vector<Document> train = LoadCorpus(ws, relations, "train");
  std::vector<Document> dev = LoadCorpus(ws, relations, "dev");
  Vocabulary vocab = LoadVocabulary(ws);
  Filtration train_filtration = LoadFiltration(ws, "train");
  Filtration dev_filtration = LoadFiltration(ws, "dev");

  FinetuneModel model(EncoderFor(c, vocab), c.relation_dim, relations.size());
  std::string arm = "fresh";
  if (options.init == "pretrained") {
    arm = "pretrained" + options.ablation.Suffix();
    std::string flags;
    for (const std::string& t : options.ablation.tasks) flags += " --disable-task " + t;
    for (const std::string& s : options.ablation.subtasks) flags += " --disable-subtask " + s;
    fs::path p = ws.Input(arm + ".ckpt", "pretrain" + flags);
    ws.NoteInput(p);

    PretrainConfig expected = c.pretrain;
    options.ablation.ApplyTo(expected);
    json want = expected.ToJson();
    json got = Checkpoint::Load(p.string()).header.at("config").at("pretrain");
    for (const char* key : {"tasks", "intra", "inter"}) {
      if (got.at(key) != want.at(key)) {
        throw ConfigError(p.string() + " was pre-trained with " + key + "=" +
                          got.at(key).dump() + " but the requested ablation needs " +
                          want.at(key).dump());
      }
    }
    model.InitFrom(PretrainModel::Load(p.string()));
  }

  FinetuneConfig fc = c.finetune;
  FinetuneResult result = Finetune(model, train, train_filtration, dev, dev_filtration, vocab,
                                   fc, Progress(ws.command()));

  json epochs = json::array();
  for (const FinetuneEpoch& e : result.epochs) {
    epochs.push_back({{"loss", e.loss}, {"dev_f1", e.dev_f1.value()}, {"threshold", e.threshold}});
  }
  json header = ws.Provenance();
  header["init"] = options.init;
  header["arm"] = arm;
  header["finetune"] = fc.ToJson();
  header["threshold"] = result.threshold;
  header["best_epoch"] = result.best_epoch;
  header["best_dev_f1"] = result.best_dev_f1.value();
  header["epochs"] = epochs;
  fs::path p = ws.Output("finetuned-" + arm + ".ckpt");
  model.Save(p.string(), header);

  std::cout << "finetune: arm=" << arm << " best_epoch=" << result.best_epoch + 1
            << " dev_f1=" << Fixed(result.best_dev_f1.value())
            << " threshold=" << Fixed(result.threshold, 6) << " path=" << p.string() << '\n';
}

void CmdEval(Workspace& ws, const EvalOptions& options) {
  if (options.split != "dev" && options.split != "test") {
    throw ConfigError("--split must be dev or test");
  }
  fs::path model_path;
  if (options.model.empty()) {
    std::string producer = options.arm == "fresh" ? "finetune --init fresh" : "finetune";
    model_path = ws.Input("finetuned-" + options.arm + ".ckpt", producer);
  } else {
    model_path = options.model;
    if (!fs::exists(model_path)) {
      throw MissingArtifact("missing artifact '" + options.model + "': no such checkpoint");
    }
  }
  RelationVocabulary relations = LoadRelations(ws);
  std::vector<Document> train = LoadCorpus(ws, relations, "train");
  std::vector<Document> docs = LoadCorpus(ws, relations, options.split);
  Vocabulary vocab = LoadVocabulary(ws);
  Filtration filtration = LoadFiltration(ws, options.split);
  ws.NoteInput(model_path);

  json header = Checkpoint::Load(model_path.string()).header.at("config");
  double threshold = header.at("threshold").get<double>();
  std::string arm = header.value("arm", options.arm);
  FinetuneModel model = FinetuneModel::Load(model_path.string());
  CheckVocabularySize(model.model().encoder_params(), vocab, model_path.string());

  std::vector<Prediction> predictions = Predict(docs, vocab, model, filtration, threshold);
  EvalReport report = Evaluate(predictions, docs, TrainFactSet(train));

  fs::path pred_path = ws.Output("predictions-" + arm + "-" + options.split + ".jsonl");
  WritePredictions(pred_path.string(), predictions);
  ws.WriteSidecar(pred_path);
  fs::path report_path = ws.Output("eval-" + arm + "-" + options.split + ".json");
  WriteJson(report_path, {{"arm", arm},
                          {"split", options.split},
                          {"threshold", threshold},
                          {"report", report.ToJson()},
                          {"provenance", ws.Provenance()}});

  std::cout << "eval: arm=" << arm << " split=" << options.split
            << " precision=" << report.precision.ToString()
            << " recall=" << report.recall.ToString() << " f1=" << Fixed(report.f1.value())
            << " ign_f1=" << Fixed(report.ign_f1.value()) << " path=" << report_path.string()
            << '\n';
}

void CmdReport(Workspace& ws) {
  const fs::path dir = ws.config().out;
  static const std::regex kName(R"(eval-(.+)-(dev|test)(\.v([0-9]+))?\.json)");
  // (arm, split) -> (version, path)
  std::map<std::pair<std::string, std::string>, std::pair<int, fs::path>> latest;
  for (const auto& entry : fs::directory_iterator(dir)) {
    std::smatch m;
    std::string name = entry.path().filename().string();
    if (!std::regex_match(name, m, kName)) continue;
    int version = m[4].matched ? std::stoi(m[4].str()) : 1;
    auto key = std::make_pair(m[1].str(), m[2].str());
    auto it = latest.find(key);
    if (it == latest.end() || it->second.first < version) latest[key] = {version, entry.path()};
  }
  if (latest.empty()) {
    throw MissingArtifact("missing artifact '" + (dir / "eval-*.json").string() +
                          "': run `docre eval` first");
  }

  std::ostringstream md;
  md << "| arm | split | precision | recall | F1 | IgnF1 |\n";
  md << "|---|---|---|---|---|---|\n";
  std::map<std::pair<std::string, std::string>, double> f1;
  for (const auto& [key, found] : latest) {
    ws.NoteInput(found.second);
    json r = ReadJson(found.second).at("report");
    auto val = [&](const char* k) { return r.at(k).at("value").get<double>(); };
    f1[key] = val("f1");
    md << "| " << key.first << " | " << key.second << " | " << Fixed(100 * val("precision"), 2)
       << " | " << Fixed(100 * val("recall"), 2) << " | " << Fixed(100 * val("f1"), 2) << " | "
       << Fixed(100 * val("ign_f1"), 2) << " |\n";
  }
  for (const char* split : {"dev", "test"}) {
    auto fresh = f1.find({"fresh", split});
    if (fresh == f1.end()) continue;
    for (const auto& [key, value] : f1) {
      if (key.second != split || key.first == "fresh") continue;
      md << "\n" << key.first << " vs fresh on " << split << ": "
         << (value >= fresh->second ? "+" : "") << Fixed(100 * (value - fresh->second), 2)
         << " F1 points";
    }
  }
  md << '\n';

  fs::path p = ws.Output("report.md");
  std::ofstream(p) << md.str();
  ws.WriteSidecar(p);
  std::cout << md.str();
}

}  // namespace docre::cli
