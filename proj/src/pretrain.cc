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

#include "docre/pretrain.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "docre/checkpoint.h"
#include "docre/rng.h"

namespace docre {

using nlohmann::json;

PretrainCorpus::PretrainCorpus(const std::vector<Document>& docs,
                               const Vocabulary& vocab,
                               const Filtration* filtration) {
  for (const Document& d : docs) {
    PretrainDocument p;
    p.doc = d;
    p.enc = EncodeWithMarkers(d, vocab);
    for (const Entity& e : d.entities) p.identity.push_back(EntityIdentity(e));
    p.retained = filtration ? filtration->At(d.doc_id).RetainedPairs() : EnumeratePairs(d);
    std::map<EntityPair, std::vector<FactKey>> labeled;
    for (const RelationInstance& l : d.labels) {
      labeled[{l.head, l.tail}].push_back(MakeFactKey(d, l));
    }
    for (const EntityPair& pr : p.retained) {
      auto it = labeled.find(pr);
      if (it == labeled.end()) {
        p.negatives.push_back(pr);
      } else {
        p.positives.push_back(pr);
        p.facts[pr] = it->second;
      }
    }
    docs_.push_back(std::move(p));
  }
  for (int i = 0; i < static_cast<int>(docs_.size()); ++i) {
    const PretrainDocument& p = docs_[i];
    if (p.doc.entities.size() >= 2) docs_with_entities.push_back(i);
    if (!p.positives.empty() && !p.negatives.empty()) docs_with_positives.push_back(i);
    for (int e = 0; e < static_cast<int>(p.identity.size()); ++e) {
      entity_index_[p.identity[e]].emplace_back(i, e);
    }
    for (const auto& [pair, keys] : p.facts) {
      for (const FactKey& k : keys) fact_index_[k].emplace_back(i, pair);
    }
  }
  for (const auto& [id, occ] : entity_index_) {
    if (occ.size() >= 2 && occ.front().first != occ.back().first) {
      shared_identities.push_back(id);
    }
  }
  for (const auto& [key, occ] : fact_index_) {
    if (occ.size() >= 2 && occ.front().first != occ.back().first) {
      shared_facts.push_back(key);
    }
  }
}

namespace {

template <typename T>
const T& Pick(const std::vector<T>& v, Rng& rng) {
  return v[rng.UniformIndex(v.size())];
}

// Two occurrences from different documents.
template <typename Occ>
bool PickDistinctDocs(const std::vector<Occ>& occ, Rng& rng, Occ* a, Occ* b) {
  for (int attempt = 0; attempt < 8; ++attempt) {
    const Occ& x = Pick(occ, rng);
    const Occ& y = Pick(occ, rng);
    if (x.first != y.first) {
      *a = x;
      *b = y;
      return true;
    }
  }
  return false;
}

}  // namespace

MMBatch SampleMM(const PretrainCorpus& corpus, Variant variant,
                 const SamplerConfig& config, Rng& rng) {
  MMBatch batch;
  batch.variant = variant;
  if (variant == Variant::kIntra) {
    if (corpus.docs_with_entities.empty()) {
      throw SamplingError("MM-intra: no document with two or more entities");
    }
    const int d = Pick(corpus.docs_with_entities, rng);
    const PretrainDocument& doc = corpus.at(d);
    batch.query_doc = batch.candidate_doc = d;
    batch.query_entity = rng.UniformIndex(doc.doc.entities.size());
    batch.query_mention =
        rng.UniformIndex(doc.doc.entities[batch.query_entity].mentions.size());
    batch.query_enc = MaskQueryMention(ApplyBlank(doc.enc, config.alpha, rng),
                                       batch.query_entity, batch.query_mention);
    batch.gold = batch.query_entity;
    batch.candidate_count = static_cast<int>(doc.doc.entities.size());
    return batch;
  }
  for (int attempt = 0; attempt < config.retry_budget; ++attempt) {
    if (corpus.shared_identities.empty()) break;
    const std::string& id = Pick(corpus.shared_identities, rng);
    const auto& occ = corpus.entity_index().at(id);
    std::pair<int, int> a, b;
    if (!PickDistinctDocs(occ, rng, &a, &b)) continue;
    const PretrainDocument& doc_a = corpus.at(a.first);
    if (doc_a.doc.entities.size() < 2) continue;
    if (std::count(doc_a.identity.begin(), doc_a.identity.end(), id) != 1) continue;
    batch.candidate_doc = a.first;
    batch.query_doc = b.first;
    batch.gold = a.second;
    batch.query_entity = b.second;
    batch.candidate_enc = ApplyBlank(doc_a.enc, config.alpha, rng);
    batch.query_enc = ApplyBlank(corpus.at(b.first).enc, config.alpha, rng);
    batch.candidate_count = static_cast<int>(doc_a.doc.entities.size());
    return batch;
  }
  throw SamplingError("MM-inter: no document pair sharing an entity within retry budget");
}

RDBatch SampleRD(const PretrainCorpus& corpus, Variant variant,
                 const SamplerConfig& config, Rng& rng) {
  if (config.k_n < 2) throw std::invalid_argument("RD: k_n must be >= 2");
  if (corpus.docs_with_positives.empty()) {
    throw SamplingError("RD: no document with both a positive and an NA pair");
  }
  RDBatch batch;
  batch.variant = variant;
  const int x = Pick(corpus.docs_with_positives, rng);
  const PretrainDocument& dx = corpus.at(x);
  const EntityPair positive = Pick(dx.positives, rng);

  // (slot, pair) negatives.
  std::vector<std::pair<int, EntityPair>> negatives;
  const int want = config.k_n - 1;
  batch.docs.push_back(x);
  if (variant == Variant::kIntra) {
    const int n = std::min<int>(want, static_cast<int>(dx.negatives.size()));
    for (int i : SampleWithoutReplacement(static_cast<int>(dx.negatives.size()), n, rng)) {
      negatives.emplace_back(0, dx.negatives[i]);
    }
  } else {
    int y = -1;
    for (int attempt = 0; attempt < config.retry_budget; ++attempt) {
      const int cand = rng.UniformIndex(corpus.size());
      if (cand != x && !corpus.at(cand).negatives.empty()) {
        y = cand;
        break;
      }
    }
    if (y < 0) throw SamplingError("RD-inter: no second document with NA pairs");
    const PretrainDocument& dy = corpus.at(y);
    batch.docs.push_back(y);
    // Half of the negatives (at least one) come from the other document.
    const int from_y = std::min<int>(std::max(1, want / 2), static_cast<int>(dy.negatives.size()));
    const int from_x = std::min<int>(want - from_y, static_cast<int>(dx.negatives.size()));
    for (int i : SampleWithoutReplacement(static_cast<int>(dx.negatives.size()), from_x, rng)) {
      negatives.emplace_back(0, dx.negatives[i]);
    }
    for (int i : SampleWithoutReplacement(static_cast<int>(dy.negatives.size()), from_y, rng)) {
      negatives.emplace_back(1, dy.negatives[i]);
    }
  }
  batch.short_batch = static_cast<int>(negatives.size()) < want;
  rng.Shuffle(negatives);
  batch.gold = rng.UniformIndex(negatives.size() + 1);
  for (size_t slot = 0, j = 0; slot <= negatives.size(); ++slot) {
    batch.instances.push_back(static_cast<int>(slot) == batch.gold
                                  ? std::make_pair(0, positive)
                                  : negatives[j++]);
  }
  for (int d : batch.docs) batch.encs.push_back(ApplyBlank(corpus.at(d).enc, config.alpha, rng));
  return batch;
}

RABatch SampleRA(const PretrainCorpus& corpus, const SamplerConfig& config, Rng& rng) {
  if (config.k_s < 2) throw std::invalid_argument("RA: k_s must be >= 2");
  for (int attempt = 0; attempt < config.retry_budget; ++attempt) {
    if (corpus.shared_facts.empty()) break;
    const FactKey& fact = Pick(corpus.shared_facts, rng);
    const auto& occ = corpus.fact_index().at(fact);
    std::pair<int, EntityPair> a, b;
    if (!PickDistinctDocs(occ, rng, &a, &b)) continue;
    const PretrainDocument& doc_a = corpus.at(a.first);
    std::vector<EntityPair> distractors;
    for (const EntityPair& p : doc_a.retained) {
      if (p != a.second) distractors.push_back(p);
    }
    if (distractors.empty()) continue;
    RABatch batch;
    batch.doc_a = a.first;
    batch.doc_b = b.first;
    batch.fact = fact;
    batch.query = b.second;
    const int n = std::min<int>(config.k_s - 1, static_cast<int>(distractors.size()));
    batch.clipped = n < config.k_s - 1;
    std::vector<int> picks =
        SampleWithoutReplacement(static_cast<int>(distractors.size()), n, rng);
    batch.gold = rng.UniformIndex(n + 1);
    for (int slot = 0, j = 0; slot <= n; ++slot) {
      batch.candidates.push_back(slot == batch.gold ? a.second : distractors[picks[j++]]);
    }
    batch.enc_a = ApplyBlank(doc_a.enc, config.alpha, rng);
    batch.enc_b = ApplyBlank(corpus.at(b.first).enc, config.alpha, rng);
    return batch;
  }
  throw SamplingError("RA: no document pair sharing a relational fact within retry budget");
}

PretrainModel::PretrainModel(const EncoderParams& params, int relation_dim)
    : model_(params, relation_dim) {
  Rng rng(params.seed ^ 0x27d4eb2f165667c5ULL);
  bilinear_m_ = Bilinear("bilinear_m", 1, params.hidden_dim, params.hidden_dim, rng);
  rd_ = AffineScorer("rd", relation_dim, rng);
  ra_ = AffineScorer("ra", relation_dim, rng);
}

ParameterList PretrainModel::Parameters() {
  ParameterList out = model_.Parameters();
  for (Parameter* p : bilinear_m_.Parameters()) out.push_back(p);
  for (Parameter* p : rd_.Parameters()) out.push_back(p);
  for (Parameter* p : ra_.Parameters()) out.push_back(p);
  return out;
}

std::vector<const Parameter*> PretrainModel::Parameters() const {
  auto params = const_cast<PretrainModel*>(this)->Parameters();
  return {params.begin(), params.end()};
}

void PretrainModel::Save(const std::string& path, const json& config) const {
  json header = {{"kind", "pretrained"},
                 {"encoder", ToJson(model_.encoder_params())},
                 {"relation_dim", model_.relation_dim()},
                 {"config", config}};
  Checkpoint::From(Parameters(), header).Save(path);
}

PretrainModel PretrainModel::Load(const std::string& path) {
  Checkpoint ckpt = Checkpoint::Load(path);
  if (ckpt.header.value("kind", "") != "pretrained") {
    throw std::runtime_error(path + ": not a pre-trained checkpoint");
  }
  PretrainModel model(EncoderParamsFromJson(ckpt.header.at("encoder")),
                      ckpt.header.at("relation_dim").get<int>());
  ckpt.Restore(model.Parameters());
  return model;
}

namespace {

// Shared forward for MM: the candidate and query passes and the scores.
struct MMForward {
  DocumentPass candidates;
  DocumentPass query;  // inter only
  Matrix query_row;    // 1 x d
  std::vector<EntityPair> pairs;
  Bilinear::Cache cache;
  std::vector<double> scores;
};

MMForward RunMM(const PretrainModel& model, const MMBatch& batch, bool trace) {
  MMForward f;
  const int d = model.model().hidden_dim();
  f.query_row = Matrix(1, d);
  if (batch.variant == Variant::kIntra) {
    f.candidates = model.model().Forward(batch.query_enc, trace);
    const int row = f.candidates.MentionRow(batch.query_entity, batch.query_mention);
    std::copy(f.candidates.mentions.row(row), f.candidates.mentions.row(row) + d,
              f.query_row.row(0));
  } else {
    f.candidates = model.model().Forward(batch.candidate_enc, trace);
    f.query = model.model().Forward(batch.query_enc, trace);
    std::copy(f.query.entities.row(batch.query_entity),
              f.query.entities.row(batch.query_entity) + d, f.query_row.row(0));
  }
  for (int i = 0; i < f.candidates.entity_count(); ++i) f.pairs.emplace_back(i, 0);
  Matrix s = model.bilinear_m().Forward(f.candidates.entities, f.query_row, f.pairs, &f.cache);
  f.scores.assign(s.values().begin(), s.values().end());
  return f;
}

struct RDForward {
  std::vector<DocumentPass> passes;
  std::vector<RelationPass> rels;
  std::vector<std::pair<int, int>> where;  // instance -> (slot, row in rel)
  std::vector<double> scores;
};

RDForward RunRD(const PretrainModel& model, const RDBatch& batch, bool trace) {
  RDForward f;
  std::vector<std::vector<EntityPair>> pairs(batch.encs.size());
  for (const auto& [slot, pair] : batch.instances) {
    f.where.emplace_back(slot, static_cast<int>(pairs[slot].size()));
    pairs[slot].push_back(pair);
  }
  for (size_t s = 0; s < batch.encs.size(); ++s) {
    f.passes.push_back(model.model().Forward(batch.encs[s], trace));
    f.rels.push_back(model.model().Relations(f.passes.back(), pairs[s]));
  }
  for (const auto& [slot, row] : f.where) {
    f.scores.push_back(model.rd().Score(f.rels[slot].reps.Row(row)));
  }
  return f;
}

struct RAForward {
  DocumentPass pass_a, pass_b;
  RelationPass rel_a, rel_b;
  std::vector<double> scores;
};

RAForward RunRA(const PretrainModel& model, const RABatch& batch, bool trace) {
  RAForward f;
  f.pass_a = model.model().Forward(batch.enc_a, trace);
  f.pass_b = model.model().Forward(batch.enc_b, trace);
  f.rel_a = model.model().Relations(f.pass_a, batch.candidates);
  f.rel_b = model.model().Relations(f.pass_b, {batch.query});
  for (int i = 0; i < f.rel_a.reps.rows(); ++i) {
    f.scores.push_back(model.ra().ScoreAbsDiff(f.rel_a.reps.Row(i), f.rel_b.reps.Row(0)));
  }
  return f;
}

}  // namespace

std::vector<double> ScoreBatch(const PretrainModel& model, const MMBatch& batch) {
  return RunMM(model, batch, false).scores;
}

std::vector<double> ScoreBatch(const PretrainModel& model, const RDBatch& batch) {
  return RunRD(model, batch, false).scores;
}

std::vector<double> ScoreBatch(const PretrainModel& model, const RABatch& batch) {
  return RunRA(model, batch, false).scores;
}

double TaskLoss(PretrainModel& model, const MMBatch& batch, double scale) {
  const bool backward = scale != 0.0;
  MMForward f = RunMM(model, batch, backward);
  SoftmaxLoss sl = SoftmaxCrossEntropy(f.scores, batch.gold);
  if (!backward) return sl.loss;
  const int d = model.model().hidden_dim();
  Matrix d_out(static_cast<int>(f.scores.size()), 1);
  for (size_t i = 0; i < f.scores.size(); ++i) d_out(static_cast<int>(i), 0) = scale * sl.d_scores[i];
  Matrix d_cand(f.candidates.entity_count(), d);
  Matrix d_query(1, d);
  model.bilinear_m().Backward(f.candidates.entities, f.query_row, f.pairs, f.cache, d_out,
                              &d_cand, &d_query);
  if (batch.variant == Variant::kIntra) {
    Matrix d_mentions(f.candidates.mentions.rows(), d);
    const int row = f.candidates.MentionRow(batch.query_entity, batch.query_mention);
    std::copy(d_query.row(0), d_query.row(0) + d, d_mentions.row(row));
    model.model().Backward(f.candidates, d_cand, &d_mentions);
  } else {
    model.model().Backward(f.candidates, d_cand, nullptr);
    Matrix d_query_entities(f.query.entity_count(), d);
    std::copy(d_query.row(0), d_query.row(0) + d, d_query_entities.row(batch.query_entity));
    model.model().Backward(f.query, d_query_entities, nullptr);
  }
  return sl.loss;
}

double TaskLoss(PretrainModel& model, const RDBatch& batch, double scale) {
  const bool backward = scale != 0.0;
  RDForward f = RunRD(model, batch, backward);
  SoftmaxLoss sl = SoftmaxCrossEntropy(f.scores, batch.gold);
  if (!backward) return sl.loss;
  std::vector<Matrix> d_reps;
  for (const RelationPass& r : f.rels) d_reps.emplace_back(r.reps.rows(), r.reps.cols());
  for (size_t i = 0; i < f.where.size(); ++i) {
    const auto [slot, row] = f.where[i];
    model.rd().Backward(f.rels[slot].reps.Row(row), scale * sl.d_scores[i],
                        d_reps[slot].Row(row));
  }
  for (size_t s = 0; s < f.passes.size(); ++s) {
    Matrix d_entities = model.model().RelationsBackward(f.passes[s], f.rels[s], d_reps[s]);
    model.model().Backward(f.passes[s], d_entities, nullptr);
  }
  return sl.loss;
}

double TaskLoss(PretrainModel& model, const RABatch& batch, double scale) {
  const bool backward = scale != 0.0;
  RAForward f = RunRA(model, batch, backward);
  SoftmaxLoss sl = SoftmaxCrossEntropy(f.scores, batch.gold);
  if (!backward) return sl.loss;
  Matrix d_a(f.rel_a.reps.rows(), f.rel_a.reps.cols());
  Matrix d_b(1, f.rel_b.reps.cols());
  for (int i = 0; i < f.rel_a.reps.rows(); ++i) {
    model.ra().BackwardAbsDiff(f.rel_a.reps.Row(i), f.rel_b.reps.Row(0),
                               scale * sl.d_scores[i], d_a.Row(i), d_b.Row(0));
  }
  Matrix de_a = model.model().RelationsBackward(f.pass_a, f.rel_a, d_a);
  model.model().Backward(f.pass_a, de_a, nullptr);
  Matrix de_b = model.model().RelationsBackward(f.pass_b, f.rel_b, d_b);
  model.model().Backward(f.pass_b, de_b, nullptr);
  return sl.loss;
}

const char* TaskName(PretrainTask task) {
  switch (task) {
    case PretrainTask::kMMIntra: return "MM-intra";
    case PretrainTask::kMMInter: return "MM-inter";
    case PretrainTask::kRDIntra: return "RD-intra";
    case PretrainTask::kRDInter: return "RD-inter";
    case PretrainTask::kRA: return "RA";
  }
  return "?";
}

std::vector<PretrainTask> PretrainConfig::Schedule() const {
  std::vector<PretrainTask> out;
  if (tasks.mm && intra) out.push_back(PretrainTask::kMMIntra);
  if (tasks.mm && inter) out.push_back(PretrainTask::kMMInter);
  if (tasks.rd && intra) out.push_back(PretrainTask::kRDIntra);
  if (tasks.rd && inter) out.push_back(PretrainTask::kRDInter);
  if (tasks.ra) out.push_back(PretrainTask::kRA);
  return out;
}

json PretrainConfig::ToJson() const {
  return {{"encoder", docre::ToJson(encoder)},
          {"relation_dim", relation_dim},
          {"alpha", sampler.alpha},
          {"k_n", sampler.k_n},
          {"k_s", sampler.k_s},
          {"epochs", epochs},
          {"batch_size", batch_size},
          {"steps_per_epoch", steps_per_epoch},
          {"learning_rate", adam.learning_rate},
          {"warmup_fraction", adam.warmup_fraction},
          {"weight_decay", adam.weight_decay},
          {"tasks", {{"MM", tasks.mm}, {"RD", tasks.rd}, {"RA", tasks.ra}}},
          {"intra", intra},
          {"inter", inter},
          {"seed", seed}};
}

namespace {

int TaskGroup(PretrainTask t) {
  switch (t) {
    case PretrainTask::kMMIntra:
    case PretrainTask::kMMInter: return 0;
    case PretrainTask::kRDIntra:
    case PretrainTask::kRDInter: return 1;
    case PretrainTask::kRA: return 2;
  }
  return 0;
}

}  // namespace

PretrainResult Pretrain(PretrainModel& model, const PretrainCorpus& corpus,
                        const PretrainConfig& config, const LogFn& log) {
  const std::vector<PretrainTask> schedule = config.Schedule();
  if (schedule.empty()) throw std::invalid_argument("pretrain: every task is disabled");
  if (corpus.size() == 0) throw std::invalid_argument("pretrain: empty corpus");
  const int batch = std::max(1, config.batch_size);
  const long steps_per_epoch =
      config.steps_per_epoch > 0
          ? config.steps_per_epoch
          : (static_cast<long>(corpus.size()) + batch - 1) / batch;
  AdamOptimizer opt(model.Parameters(), config.adam, steps_per_epoch * config.epochs);
  Rng rng(config.seed);
  PretrainResult result;
  long slot = 0, short_batches = 0;

  struct Sampled {
    PretrainTask task;
    MMBatch mm;
    RDBatch rd;
    RABatch ra;
  };
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    double epoch_total = 0.0;
    for (long step = 0; step < steps_per_epoch; ++step) {
      std::vector<Sampled> sampled(batch);
      int count[3] = {0, 0, 0};
      for (Sampled& s : sampled) {
        s.task = schedule[slot++ % schedule.size()];
        switch (s.task) {
          case PretrainTask::kMMIntra: s.mm = SampleMM(corpus, Variant::kIntra, config.sampler, rng); break;
          case PretrainTask::kMMInter: s.mm = SampleMM(corpus, Variant::kInter, config.sampler, rng); break;
          case PretrainTask::kRDIntra: s.rd = SampleRD(corpus, Variant::kIntra, config.sampler, rng); break;
          case PretrainTask::kRDInter: s.rd = SampleRD(corpus, Variant::kInter, config.sampler, rng); break;
          case PretrainTask::kRA: s.ra = SampleRA(corpus, config.sampler, rng); break;
        }
        if (s.rd.short_batch) ++short_batches;
        ++count[TaskGroup(s.task)];
      }
      double task_sum[5] = {0, 0, 0, 0, 0};
      int task_count[5] = {0, 0, 0, 0, 0};
      TaskLosses losses;
      const long global_step = epoch * steps_per_epoch + step;
      try {
        for (const Sampled& s : sampled) {
          const int g = TaskGroup(s.task);
          const double scale = 1.0 / count[g];
          double loss = 0.0;
          if (g == 0) loss = TaskLoss(model, s.mm, scale);
          if (g == 1) loss = TaskLoss(model, s.rd, scale);
          if (g == 2) loss = TaskLoss(model, s.ra, scale);
          (g == 0 ? losses.mm : g == 1 ? losses.rd : losses.ra) += loss * scale;
          task_sum[static_cast<int>(s.task)] += loss;
          ++task_count[static_cast<int>(s.task)];
        }
        const double combined = CombinedLoss(losses, config.tasks);
        epoch_total += combined;
        opt.Step();
      } catch (const NonFiniteError& e) {
        throw std::runtime_error("pretrain diverged at step " + std::to_string(global_step + 1) +
                                 ": " + e.what());
      } catch (const std::runtime_error& e) {
        if (std::string(e.what()).find("non-finite") == std::string::npos) throw;
        throw std::runtime_error("pretrain diverged at step " + std::to_string(global_step + 1) +
                                 ": " + e.what());
      }
      for (int t = 0; t < 5; ++t) {
        if (task_count[t]) {
          result.log.push_back({global_step + 1, TaskName(static_cast<PretrainTask>(t)),
                                task_sum[t] / task_count[t]});
        }
      }
    }
    result.epoch_loss.push_back(epoch_total / static_cast<double>(steps_per_epoch));
    if (log) {
      std::ostringstream os;
      os << "pretrain epoch " << epoch + 1 << " loss " << result.epoch_loss.back();
      log(os.str());
    }
  }
  if (short_batches && log) {
    log("pretrain: " + std::to_string(short_batches) +
        " RD batches had fewer than k_n candidates");
  }
  return result;
}

void WritePretrainLog(const std::string& path, const PretrainResult& result) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  out.precision(17);
  for (const auto& r : result.log) out << r.step << '\t' << r.task << '\t' << r.loss << '\n';
}

}  // namespace docre
