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

#include "docre/finetune.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <numeric>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <tuple>

#include "docre/checkpoint.h"
#include "docre/rng.h"

namespace docre {

using nlohmann::json;

namespace {

using Wide = __int128;

Rational Reduce(Wide num, Wide den) {
  if (den == 0) return {};
  if (den < 0) {
    num = -num;
    den = -den;
  }
  Wide a = num < 0 ? -num : num, b = den;
  while (b != 0) {
    const Wide t = a % b;
    a = b;
    b = t;
  }
  if (a > 1) {
    num /= a;
    den /= a;
  }
  constexpr Wide kMax = INT64_MAX;
  if (num > kMax || -num > kMax || den > kMax) {
    throw std::overflow_error("rational overflow");
  }
  return Rational(static_cast<int64_t>(num), static_cast<int64_t>(den));
}

}  // namespace

Rational::Rational(int64_t num, int64_t den) {
  if (den == 0) return;
  if (num < 0 || den < 0) {
    if ((num < 0) != (den < 0)) throw std::invalid_argument("negative rational");
    num = -num;
    den = -den;
  }
  const int64_t g = std::gcd(num, den);
  num_ = num / g;
  den_ = den / g;
}

std::string Rational::ToString() const {
  return std::to_string(num_) + "/" + std::to_string(den_);
}

Rational operator+(const Rational& a, const Rational& b) {
  return Reduce(Wide(a.num_) * b.den_ + Wide(b.num_) * a.den_, Wide(a.den_) * b.den_);
}

Rational operator*(const Rational& a, const Rational& b) {
  return Reduce(Wide(a.num_) * b.num_, Wide(a.den_) * b.den_);
}

Rational operator/(const Rational& a, const Rational& b) {
  return Reduce(Wide(a.num_) * b.den_, Wide(a.den_) * b.num_);
}

std::strong_ordering Rational::operator<=>(const Rational& other) const {
  const Wide l = Wide(num_) * other.den_, r = Wide(other.num_) * den_;
  return l < r ? std::strong_ordering::less
               : l > r ? std::strong_ordering::greater : std::strong_ordering::equal;
}

Rational HarmonicMean(const Rational& p, const Rational& r) {
  const Rational sum = p + r;
  if (sum.num() == 0) return {};
  return Rational(2, 1) * p * r / sum;
}

namespace {

json RationalJson(const Rational& r) {
  return {{"num", r.num()}, {"den", r.den()}, {"value", r.value()}};
}

using PredKey = std::tuple<std::string, int, int, int>;

PredKey KeyOf(const Prediction& p) { return {p.doc_id, p.head, p.tail, p.relation}; }

std::set<PredKey> GoldKeys(const std::vector<Document>& gold) {
  std::set<PredKey> keys;
  for (const Document& d : gold) {
    for (const RelationInstance& l : d.labels) {
      keys.emplace(d.doc_id, l.head, l.tail, l.relation);
    }
  }
  return keys;
}

}  // namespace

json EvalReport::ToJson() const {
  return {{"precision", RationalJson(precision)},
          {"recall", RationalJson(recall)},
          {"f1", RationalJson(f1)},
          {"ign_f1", RationalJson(ign_f1)},
          {"submitted", submitted},
          {"correct", correct},
          {"total_gold", total_gold},
          {"correct_in_train", correct_in_train}};
}

FactSet TrainFactSet(const std::vector<Document>& train) {
  FactSet facts;
  for (const Document& d : train) {
    for (const RelationInstance& l : d.labels) facts.insert(MakeFactKey(d, l));
  }
  return facts;
}

EvalReport Evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<Document>& gold, const FactSet& train_facts) {
  std::map<std::string, const Document*> by_id;
  for (const Document& d : gold) by_id[d.doc_id] = &d;
  const std::set<PredKey> gold_keys = GoldKeys(gold);
  std::set<PredKey> submitted;
  for (const Prediction& p : predictions) {
    if (!by_id.count(p.doc_id)) {
      throw std::invalid_argument("prediction for unknown document '" + p.doc_id + "'");
    }
    submitted.insert(KeyOf(p));
  }
  EvalReport report;
  report.submitted = static_cast<int64_t>(submitted.size());
  report.total_gold = static_cast<int64_t>(gold_keys.size());
  for (const PredKey& k : submitted) {
    if (!gold_keys.count(k)) continue;
    ++report.correct;
    const auto& [doc_id, h, t, r] = k;
    const Document& d = *by_id.at(doc_id);
    if (train_facts.count(MakeFactKey(d, RelationInstance{h, t, r, {}}))) {
      ++report.correct_in_train;
    }
  }
  report.precision = Rational(report.correct, report.submitted);
  report.recall = Rational(report.correct, report.total_gold);
  report.f1 = HarmonicMean(report.precision, report.recall);
  const Rational ign_p(report.correct - report.correct_in_train,
                       report.submitted - report.correct_in_train);
  report.ign_f1 = HarmonicMean(ign_p, report.recall);
  return report;
}

FinetuneModel::FinetuneModel(const EncoderParams& params, int relation_dim,
                             int relation_count)
    : model_(params, relation_dim) {
  Rng rng(params.seed ^ 0x9e3779b97f4a7c15ULL);
  head_ = ClassifierHead(relation_count, relation_dim, rng);
}

void FinetuneModel::InitFrom(const PretrainModel& pretrained) {
  if (pretrained.model().relation_dim() != model_.relation_dim() ||
      pretrained.model().hidden_dim() != model_.hidden_dim()) {
    throw std::invalid_argument("pre-trained model dimensions do not match");
  }
  CopyValuesByName(pretrained.model().Parameters(), model_.Parameters());
}

std::vector<std::vector<double>> FinetuneModel::Probabilities(
    const EncodedDocument& enc, const std::vector<EntityPair>& pairs) const {
  std::vector<std::vector<double>> out;
  if (pairs.empty()) return out;
  const ReprSet reps = model_.Represent(enc, pairs);
  for (int i = 0; i < reps.relations.rows(); ++i) {
    out.push_back(ClassifyPair(reps.relations.Row(i), head_));
  }
  return out;
}

ParameterList FinetuneModel::Parameters() {
  ParameterList out = model_.Parameters();
  for (Parameter* p : head_.Parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> FinetuneModel::Parameters() const {
  auto params = const_cast<FinetuneModel*>(this)->Parameters();
  return {params.begin(), params.end()};
}

void FinetuneModel::Save(const std::string& path, const json& config) const {
  json header = {{"kind", "finetuned"},
                 {"encoder", ToJson(model_.encoder_params())},
                 {"relation_dim", model_.relation_dim()},
                 {"relation_count", head_.relation_count()},
                 {"config", config}};
  Checkpoint::From(Parameters(), header).Save(path);
}

FinetuneModel FinetuneModel::Load(const std::string& path) {
  Checkpoint ckpt = Checkpoint::Load(path);
  if (ckpt.header.value("kind", "") != "finetuned") {
    throw std::runtime_error(path + ": not a fine-tuned checkpoint");
  }
  FinetuneModel model(EncoderParamsFromJson(ckpt.header.at("encoder")),
                      ckpt.header.at("relation_dim").get<int>(),
                      ckpt.header.at("relation_count").get<int>());
  ckpt.Restore(model.Parameters());
  return model;
}

std::vector<EntityPair> TrainingPairs(const Document& doc,
                                      const std::vector<EntityPair>& retained) {
  std::set<EntityPair> pairs(retained.begin(), retained.end());
  for (const RelationInstance& l : doc.labels) pairs.emplace(l.head, l.tail);
  return {pairs.begin(), pairs.end()};
}

std::vector<Prediction> ScoreCandidates(const std::vector<Document>& docs,
                                        const Vocabulary& vocab,
                                        const FinetuneModel& model,
                                        const Filtration& filtration) {
  std::vector<Prediction> out;
  for (const Document& d : docs) {
    const std::vector<EntityPair> pairs = filtration.At(d.doc_id).RetainedPairs();
    const auto probs = model.Probabilities(EncodeWithMarkers(d, vocab), pairs);
    for (size_t i = 0; i < pairs.size(); ++i) {
      for (size_t r = 0; r < probs[i].size(); ++r) {
        out.push_back({d.doc_id, pairs[i].first, pairs[i].second, static_cast<int>(r),
                       probs[i][r]});
      }
    }
  }
  return out;
}

std::vector<Prediction> Threshold(const std::vector<Prediction>& candidates,
                                  double threshold) {
  std::vector<Prediction> out;
  for (const Prediction& p : candidates) {
    if (p.confidence >= threshold) out.push_back(p);
  }
  return out;
}

std::vector<Prediction> Predict(const std::vector<Document>& docs, const Vocabulary& vocab,
                                const FinetuneModel& model, const Filtration& filtration,
                                double threshold) {
  return Threshold(ScoreCandidates(docs, vocab, model, filtration), threshold);
}

ThresholdChoice SweepThreshold(const std::vector<Prediction>& candidates,
                               const std::vector<Document>& gold) {
  const std::set<PredKey> gold_keys = GoldKeys(gold);
  std::map<PredKey, double> best_conf;
  for (const Prediction& p : candidates) {
    auto [it, inserted] = best_conf.emplace(KeyOf(p), p.confidence);
    if (!inserted) it->second = std::max(it->second, p.confidence);
  }
  std::vector<std::pair<double, bool>> sorted;
  for (const auto& [k, c] : best_conf) sorted.emplace_back(c, gold_keys.count(k) > 0);
  std::sort(sorted.begin(), sorted.end(),
            [](const auto& a, const auto& b) { return a.first > b.first; });

  ThresholdChoice choice;
  choice.threshold = sorted.empty() ? 1.0 : std::nextafter(sorted.front().first, 2.0);
  const int64_t g = static_cast<int64_t>(gold_keys.size());
  int64_t n = 0, c = 0;
  for (size_t i = 0; i < sorted.size();) {
    const double conf = sorted[i].first;
    for (; i < sorted.size() && sorted[i].first == conf; ++i) {
      ++n;
      c += sorted[i].second;
    }
    const Rational f1(2 * c, n + g);
    if (f1 > choice.f1) {
      choice.f1 = f1;
      choice.threshold = conf;
    }
  }
  return choice;
}

json FinetuneConfig::ToJson() const {
  return {{"relation_dim", relation_dim},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"learning_rate", adam.learning_rate},
          {"warmup_fraction", adam.warmup_fraction},
          {"weight_decay", adam.weight_decay},
          {"seed", seed}};
}

FinetuneResult Finetune(FinetuneModel& model, const std::vector<Document>& train,
                        const Filtration& train_filtration,
                        const std::vector<Document>& dev, const Filtration& dev_filtration,
                        const Vocabulary& vocab, const FinetuneConfig& config,
                        const LogFn& log) {
  const int rc = model.head().relation_count();
  struct Prepared {
    EncodedDocument enc;
    std::vector<EntityPair> pairs;
    std::vector<std::vector<bool>> targets;
  };
  std::vector<Prepared> docs;
  for (const Document& d : train) {
    Prepared p;
    p.pairs = TrainingPairs(d, train_filtration.At(d.doc_id).RetainedPairs());
    if (p.pairs.empty()) continue;
    p.enc = EncodeWithMarkers(d, vocab);
    std::map<EntityPair, std::vector<bool>> targets;
    for (const RelationInstance& l : d.labels) {
      if (l.relation < 0 || l.relation >= rc) {
        throw std::invalid_argument(d.doc_id + ": relation id outside classifier range");
      }
      auto& t = targets[{l.head, l.tail}];
      t.resize(rc);
      t[l.relation] = true;
    }
    for (const EntityPair& pr : p.pairs) {
      auto it = targets.find(pr);
      p.targets.push_back(it == targets.end() ? std::vector<bool>(rc) : it->second);
    }
    docs.push_back(std::move(p));
  }
  if (docs.empty()) throw std::invalid_argument("finetune: no training pairs");

  const int batch = std::max(1, config.batch_size);
  const long steps_per_epoch = (static_cast<long>(docs.size()) + batch - 1) / batch;
  AdamOptimizer opt(model.Parameters(), config.adam, steps_per_epoch * config.epochs);
  Rng rng(config.seed);
  std::vector<size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);

  FinetuneResult result;
  std::optional<FinetuneModel> best;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double total = 0.0;
    long pair_count = 0;
    for (long step = 0; step < steps_per_epoch; ++step) {
      const size_t begin = static_cast<size_t>(step) * batch;
      const size_t end = std::min(order.size(), begin + batch);
      size_t pairs_in_batch = 0;
      for (size_t b = begin; b < end; ++b) pairs_in_batch += docs[order[b]].pairs.size();
      const double scale = 1.0 / static_cast<double>(pairs_in_batch);
      try {
        for (size_t b = begin; b < end; ++b) {
          const Prepared& p = docs[order[b]];
          DocumentPass pass = model.model().Forward(p.enc, true);
          RelationPass rel = model.model().Relations(pass, p.pairs);
          Matrix d_reps(rel.reps.rows(), rel.reps.cols());
          for (size_t i = 0; i < p.pairs.size(); ++i) {
            const double loss = model.head().LossAndBackward(
                rel.reps.Row(static_cast<int>(i)), p.targets[i], scale,
                d_reps.Row(static_cast<int>(i)));
            if (!std::isfinite(loss)) throw NonFiniteError("non-finite loss");
            total += loss;
          }
          Matrix d_entities = model.model().RelationsBackward(pass, rel, d_reps);
          model.model().Backward(pass, d_entities, nullptr);
        }
        opt.Step();
      } catch (const std::exception& e) {
        const std::string what = e.what();
        if (what.find("non-finite") == std::string::npos) throw;
        throw std::runtime_error("finetune diverged at epoch " + std::to_string(epoch + 1) +
                                 " step " + std::to_string(step + 1) + ": " + what);
      }
      pair_count += static_cast<long>(pairs_in_batch);
    }
    FinetuneEpoch record;
    record.loss = total / static_cast<double>(pair_count);
    const ThresholdChoice choice =
        SweepThreshold(ScoreCandidates(dev, vocab, model, dev_filtration), dev);
    record.dev_f1 = choice.f1;
    record.threshold = choice.threshold;
    result.epochs.push_back(record);
    if (result.best_epoch < 0 || choice.f1 > result.best_dev_f1) {
      result.best_epoch = epoch;
      result.best_dev_f1 = choice.f1;
      result.threshold = choice.threshold;
      best = model;
    }
    if (log) {
      std::ostringstream os;
      os << "finetune epoch " << epoch + 1 << " loss " << record.loss << " dev_f1 "
         << record.dev_f1.value() << " threshold " << record.threshold;
      log(os.str());
    }
  }
  if (best) model = *best;
  return result;
}

void WritePredictions(const std::string& path, const std::vector<Prediction>& predictions) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (const Prediction& p : predictions) {
    out << json{{"doc_id", p.doc_id}, {"h", p.head}, {"t", p.tail}, {"r", p.relation},
                {"confidence", p.confidence}}
               .dump()
        << '\n';
  }
}

std::vector<Prediction> ReadPredictions(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read " + path);
  std::vector<Prediction> out;
  std::string line;
  for (int n = 1; std::getline(in, line); ++n) {
    if (line.empty()) continue;
    try {
      const json j = json::parse(line);
      out.push_back({j.at("doc_id").get<std::string>(), j.at("h").get<int>(),
                     j.at("t").get<int>(), j.at("r").get<int>(),
                     j.at("confidence").get<double>()});
    } catch (const json::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace docre
