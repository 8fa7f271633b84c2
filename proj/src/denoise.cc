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

#include "docre/denoise.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <set>
#include <sstream>

#include "docre/checkpoint.h"
#include "docre/rng.h"

namespace docre {

using nlohmann::json;

std::vector<EntityPair> RankedPairs::RetainedPairs() const {
  std::vector<EntityPair> out;
  for (int i = 0; i < retained; ++i) out.emplace_back(pairs[i].head, pairs[i].tail);
  return out;
}

int CutoffRule::For(const Document& doc) const {
  if (fixed > 0) return fixed;
  if (per_entity > 0) return per_entity * static_cast<int>(doc.entities.size());
  throw std::invalid_argument("cutoff rule: k_d must be >= 1");
}

json CutoffRule::ToJson() const {
  return {{"fixed", fixed}, {"per_entity", per_entity}};
}

Ranker::Ranker(const EncoderParams& params, int relation_dim)
    : model_(params, relation_dim) {
  Rng rng(params.seed ^ 0x2545f4914f6cdd1dULL);
  scorer_ = AffineScorer("rd", relation_dim, rng);
}

ParameterList Ranker::Parameters() {
  ParameterList out = model_.Parameters();
  out.push_back(&scorer_.weight());
  out.push_back(&scorer_.bias());
  return out;
}

std::vector<const Parameter*> Ranker::Parameters() const {
  auto params = const_cast<Ranker*>(this)->Parameters();
  return {params.begin(), params.end()};
}

void Ranker::Save(const std::string& path, const json& config) const {
  json header = {{"kind", "ranker"},
                 {"encoder", ToJson(model_.encoder_params())},
                 {"relation_dim", model_.relation_dim()},
                 {"config", config}};
  Checkpoint::From(Parameters(), header).Save(path);
}

Ranker Ranker::Load(const std::string& path) {
  Checkpoint ckpt = Checkpoint::Load(path);
  if (ckpt.header.value("kind", "") != "ranker") {
    throw std::runtime_error(path + ": not a ranker checkpoint");
  }
  Ranker ranker(EncoderParamsFromJson(ckpt.header.at("encoder")),
                ckpt.header.at("relation_dim").get<int>());
  ckpt.Restore(ranker.Parameters());
  return ranker;
}

json RankerConfig::ToJson() const {
  return {{"encoder", docre::ToJson(encoder)},
          {"relation_dim", relation_dim},
          {"k_n", k_n},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"blank_alpha", blank_alpha},
          {"weight_decay", adam.weight_decay},
          {"learning_rate", adam.learning_rate},
          {"warmup_fraction", adam.warmup_fraction},
          {"seed", seed}};
}

namespace {

struct RdInstance {
  std::vector<int> candidates;  // indexes into the document's pair list
  int gold = 0;
};

// Forward + backward of every instance of one document; returns the summed
// loss. Gradients are scaled by `scale`.
double RankerDocumentStep(Ranker& ranker, const EncodedDocument& enc,
                          const std::vector<EntityPair>& pairs,
                          const std::vector<RdInstance>& instances, double scale) {
  DocumentModel& model = ranker.model();
  DocumentPass pass = model.Forward(enc, true);
  RelationPass rel = model.Relations(pass, pairs);
  Matrix d_reps(rel.reps.rows(), rel.reps.cols());
  double total = 0.0;
  for (const RdInstance& inst : instances) {
    std::vector<double> scores;
    for (int c : inst.candidates) scores.push_back(ranker.scorer().Score(rel.reps.Row(c)));
    SoftmaxLoss sl = SoftmaxCrossEntropy(scores, inst.gold);
    total += sl.loss;
    for (size_t i = 0; i < inst.candidates.size(); ++i) {
      const int c = inst.candidates[i];
      ranker.scorer().Backward(rel.reps.Row(c), scale * sl.d_scores[i], d_reps.Row(c));
    }
  }
  Matrix d_entities = model.RelationsBackward(pass, rel, d_reps);
  model.Backward(pass, d_entities, nullptr);
  return total;
}

}  // namespace

Ranker TrainRanker(const std::vector<Document>& annotated, const Vocabulary& vocab,
                   const RankerConfig& config, const LogFn& log) {
  if (config.k_n < 2) throw std::invalid_argument("ranker: k_n must be >= 2");
  struct Prepared {
    EncodedDocument enc;
    std::vector<EntityPair> positives;
    std::vector<EntityPair> negatives;
  };
  std::vector<Prepared> docs;
  size_t positive_total = 0;
  for (const Document& d : annotated) {
    Prepared p;
    std::set<EntityPair> labeled;
    for (const auto& l : d.labels) labeled.emplace(l.head, l.tail);
    for (const EntityPair& pr : EnumeratePairs(d)) {
      (labeled.count(pr) ? p.positives : p.negatives).push_back(pr);
    }
    if (p.positives.empty() || p.negatives.empty()) continue;
    p.enc = EncodeWithMarkers(d, vocab);
    positive_total += p.positives.size();
    docs.push_back(std::move(p));
  }
  if (positive_total == 0) {
    throw std::invalid_argument("ranker: corpus has no positive (labeled) pairs");
  }

  Ranker ranker(config.encoder, config.relation_dim);
  Rng rng(config.seed);
  const int batch = std::max(1, config.batch_size);
  const long steps_per_epoch = (static_cast<long>(docs.size()) + batch - 1) / batch;
  AdamOptimizer opt(ranker.Parameters(), config.adam, steps_per_epoch * config.epochs);

  std::vector<size_t> order(docs.size());
  std::iota(order.begin(), order.end(), 0);
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    rng.Shuffle(order);
    double epoch_loss = 0.0;
    long epoch_instances = 0;
    for (size_t start = 0; start < order.size(); start += batch) {
      const size_t end = std::min(order.size(), start + batch);
      // Sample first so the gradient scale is known before backward.
      std::vector<std::vector<EntityPair>> pair_lists;
      std::vector<std::vector<RdInstance>> instance_lists;
      size_t count = 0;
      for (size_t b = start; b < end; ++b) {
        const Prepared& p = docs[order[b]];
        std::vector<EntityPair> pairs;
        std::vector<RdInstance> instances;
        const int neg = std::min<int>(config.k_n - 1, static_cast<int>(p.negatives.size()));
        for (const EntityPair& pos : p.positives) {
          RdInstance inst;
          std::vector<int> picks = SampleWithoutReplacement(
              static_cast<int>(p.negatives.size()), neg, rng);
          inst.gold = rng.UniformIndex(neg + 1);
          for (int slot = 0, j = 0; slot <= neg; ++slot) {
            const EntityPair pr = slot == inst.gold ? pos : p.negatives[picks[j++]];
            inst.candidates.push_back(static_cast<int>(pairs.size()));
            pairs.push_back(pr);
          }
          instances.push_back(std::move(inst));
        }
        count += instances.size();
        pair_lists.push_back(std::move(pairs));
        instance_lists.push_back(std::move(instances));
      }
      const double scale = 1.0 / static_cast<double>(count);
      for (size_t b = start; b < end; ++b) {
        const EncodedDocument& enc = docs[order[b]].enc;
        epoch_loss += RankerDocumentStep(ranker,
                                         config.blank_alpha > 0.0
                                             ? ApplyBlank(enc, config.blank_alpha, rng)
                                             : enc,
                                         pair_lists[b - start],
                                         instance_lists[b - start], scale);
      }
      epoch_instances += static_cast<long>(count);
      opt.Step();
    }
    const double mean = epoch_loss / static_cast<double>(std::max<long>(1, epoch_instances));
    if (!std::isfinite(mean)) {
      throw std::runtime_error("ranker training diverged at epoch " + std::to_string(epoch + 1));
    }
    if (log) {
      std::ostringstream os;
      os << "ranker epoch " << epoch + 1 << " loss " << mean;
      log(os.str());
    }
  }
  return ranker;
}

RankedPairs RankScores(const std::string& doc_id, std::vector<RankedPair> scored,
                       int k_d) {
  if (k_d < 1) throw std::invalid_argument("k_d must be >= 1");
  std::sort(scored.begin(), scored.end(), [](const RankedPair& a, const RankedPair& b) {
    if (a.score != b.score) return a.score > b.score;
    if (a.head != b.head) return a.head < b.head;
    return a.tail < b.tail;
  });
  RankedPairs out;
  out.doc_id = doc_id;
  out.retained = std::min<int>(k_d, static_cast<int>(scored.size()));
  out.pairs = std::move(scored);
  return out;
}

RankedPairs ScorePairs(const Document& doc, const EncodedDocument& enc,
                       const Ranker& ranker) {
  RankedPairs out;
  out.doc_id = doc.doc_id;
  const std::vector<EntityPair> pairs = EnumeratePairs(doc);
  if (pairs.empty()) return out;
  DocumentPass pass = ranker.model().Forward(enc, false);
  RelationPass rel = ranker.model().Relations(pass, pairs);
  for (size_t p = 0; p < pairs.size(); ++p) {
    out.pairs.push_back({pairs[p].first, pairs[p].second,
                         ranker.scorer().Score(rel.reps.Row(static_cast<int>(p)))});
  }
  return RankScores(doc.doc_id, std::move(out.pairs),
                    std::max<int>(1, static_cast<int>(pairs.size())));
}

RankedPairs ScorePairs(const Document& doc, const Vocabulary& vocab,
                       const Ranker& ranker) {
  return ScorePairs(doc, EncodeWithMarkers(doc, vocab), ranker);
}

RankedPairs FilterTopK(const RankedPairs& ranked, int k_d) {
  if (k_d < 1) throw std::invalid_argument("k_d must be >= 1");
  RankedPairs out = RankScores(ranked.doc_id, ranked.pairs, k_d);
  out.pairs.resize(out.retained);
  return out;
}

const RankedPairs& Filtration::At(const std::string& doc_id) const {
  auto it = docs.find(doc_id);
  if (it == docs.end()) {
    throw std::out_of_range("filtration has no entry for document '" + doc_id + "'");
  }
  return it->second;
}

void Filtration::Save(const std::string& path) const {
  json entries = json::array();
  for (const auto& [id, ranked] : docs) {
    json pairs = json::array();
    for (int i = 0; i < ranked.retained; ++i) {
      const RankedPair& p = ranked.pairs[i];
      pairs.push_back({p.head, p.tail, p.score});
    }
    entries.push_back({{"doc_id", id}, {"retained", pairs}});
  }
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << json{{"header", header}, {"docs", entries}}.dump() << '\n';
}

Filtration Filtration::Load(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open filtration " + path);
  json root = json::parse(in);
  Filtration f;
  f.header = root.value("header", json::object());
  for (const json& e : root.at("docs")) {
    RankedPairs r;
    r.doc_id = e.at("doc_id").get<std::string>();
    for (const json& p : e.at("retained")) {
      r.pairs.push_back({p[0].get<int>(), p[1].get<int>(), p[2].get<double>()});
    }
    r.retained = static_cast<int>(r.pairs.size());
    f.docs.emplace(r.doc_id, std::move(r));
  }
  return f;
}

Filtration FilterCorpus(const std::vector<Document>& docs, const Vocabulary& vocab,
                        const Ranker& ranker, const CutoffRule& rule, json header) {
  Filtration f;
  f.header = std::move(header);
  for (const Document& d : docs) {
    RankedPairs ranked = ScorePairs(d, vocab, ranker);
    RankedPairs kept = ranked.pairs.empty() ? ranked : FilterTopK(ranked, rule.For(d));
    if (!f.docs.emplace(d.doc_id, std::move(kept)).second) {
      throw ValidationError("duplicate doc_id '" + d.doc_id + "' in corpus");
    }
  }
  return f;
}

double GoldPairRecall(const std::vector<Document>& docs, const Filtration& filtration) {
  size_t total = 0, found = 0;
  for (const Document& d : docs) {
    std::set<EntityPair> gold;
    for (const auto& l : d.labels) gold.emplace(l.head, l.tail);
    const auto retained = filtration.At(d.doc_id).RetainedPairs();
    const std::set<EntityPair> kept(retained.begin(), retained.end());
    for (const EntityPair& g : gold) {
      ++total;
      if (kept.count(g)) ++found;
    }
  }
  return total ? static_cast<double>(found) / static_cast<double>(total) : 0.0;
}

double RandomRankingRecall(const std::vector<Document>& docs, const CutoffRule& rule) {
  double expected = 0.0;
  size_t total = 0;
  for (const Document& d : docs) {
    std::set<EntityPair> gold;
    for (const auto& l : d.labels) gold.emplace(l.head, l.tail);
    const size_t pairs = EnumeratePairs(d).size();
    if (pairs == 0) continue;
    const double keep = std::min<double>(rule.For(d), static_cast<double>(pairs));
    expected += static_cast<double>(gold.size()) * keep / static_cast<double>(pairs);
    total += gold.size();
  }
  return total ? expected / static_cast<double>(total) : 0.0;
}

}  // namespace docre
