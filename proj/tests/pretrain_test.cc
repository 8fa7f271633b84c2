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
#include <cmath>
#include <filesystem>
#include <set>

#include "docre/pretrain.h"
#include "docre/rng.h"
#include "docre/synth.h"
#include "doctest.h"
#include "gradient_checks.h"
#include "testing.h"

using namespace docre;
using namespace docre::testing;

namespace {

struct Fixture {
  SynthCorpus corpus;
  Vocabulary vocab;
  std::unique_ptr<PretrainCorpus> pc;

  explicit Fixture(int docs = 200, uint64_t seed = 5) {
    SynthConfig c;
    c.n_docs = 1;
    c.n_distant_docs = docs;
    c.kb_entities = 60;
    c.rng_seed = seed;
    corpus = Synthesize(c);
    vocab = Vocabulary::Build(corpus.distant, 8);
    pc = std::make_unique<PretrainCorpus>(corpus.distant, vocab, nullptr);
  }
};

bool IsLabeled(const Document& d, EntityPair p) {
  for (const auto& l : d.labels) {
    if (l.head == p.first && l.tail == p.second) return true;
  }
  return false;
}

}  // namespace

TEST_CASE("corpus indexes") {
  Fixture f;
  CHECK(f.pc->size() == 200);
  CHECK_FALSE(f.pc->shared_identities.empty());
  CHECK_FALSE(f.pc->shared_facts.empty());
  for (const auto& [id, occ] : f.pc->entity_index()) {
    for (auto [d, e] : occ) CHECK(f.pc->at(d).identity[e] == id);
  }
  for (int d : f.pc->docs_with_positives) {
    const PretrainDocument& doc = f.pc->at(d);
    CHECK_FALSE(doc.positives.empty());
    for (EntityPair p : doc.positives) CHECK(IsLabeled(doc.doc, p));
    for (EntityPair p : doc.negatives) CHECK_FALSE(IsLabeled(doc.doc, p));
  }
}

TEST_CASE("documents without labels never supply RD positives") {
  Fixture f(40);
  std::vector<Document> docs = f.corpus.distant;
  docs[0].labels.clear();
  docs[1].labels.clear();
  PretrainCorpus pc(docs, f.vocab, nullptr);
  CHECK(std::count(pc.docs_with_positives.begin(), pc.docs_with_positives.end(), 0) == 0);
  CHECK(std::count(pc.docs_with_positives.begin(), pc.docs_with_positives.end(), 1) == 0);
  Rng rng(1);
  for (int i = 0; i < 200; ++i) CHECK(SampleRD(pc, Variant::kIntra, {}, rng).docs[0] > 1);
}

TEST_CASE("MM intra batch") {
  Fixture f;
  Rng rng(2);
  SamplerConfig sc;
  PretrainModel model(TinyParams(f.vocab.size()), 8);
  for (int i = 0; i < 200; ++i) {
    MMBatch b = SampleMM(*f.pc, Variant::kIntra, sc, rng);
    const PretrainDocument& d = f.pc->at(b.query_doc);
    CHECK(b.candidate_doc == b.query_doc);
    CHECK(b.candidate_count == static_cast<int>(d.doc.entities.size()));
    CHECK(b.gold == b.query_entity);
    REQUIRE(b.query_enc.masked_query.has_value());
    CHECK(*b.query_enc.masked_query == std::pair<int, int>{b.query_entity, b.query_mention});
    if (i < 5) CHECK(ScoreBatch(model, b).size() == static_cast<size_t>(b.candidate_count));
  }
}

TEST_CASE("MM intra with three entities has k_m = 3") {
  Document d = MakeDoc("d", {{"a", "b", "c", "d"}}, {{{0, 0, 1}}, {{0, 1, 2}}, {{0, 3, 4}}});
  Vocabulary v = Vocabulary::Build({d}, 4);
  PretrainCorpus pc({d}, v, nullptr);
  Rng rng(1);
  MMBatch b = SampleMM(pc, Variant::kIntra, {}, rng);
  CHECK(b.candidate_count == 3);
  CHECK(ScoreBatch(PretrainModel(TinyParams(v.size()), 4), b).size() == 3);
}

TEST_CASE("MM inter gold is the shared entity") {
  SUBCASE("hand-built pair with one shared identity") {
    Document a = MakeDoc("a", {{"X", "p", "Y", "q", "Z"}}, {{{0, 0, 1}}, {{0, 2, 3}}, {{0, 4, 5}}});
    Document b = MakeDoc("b", {{"W", "r", "X"}}, {{{0, 0, 1}}, {{0, 2, 3}}});
    Vocabulary v = Vocabulary::Build({a, b}, 4);
    PretrainCorpus pc({a, b}, v, nullptr);
    Rng rng(3);
    for (int i = 0; i < 20; ++i) {
      MMBatch m = SampleMM(pc, Variant::kInter, {}, rng);
      const Document& cand = pc.at(m.candidate_doc).doc;
      const Document& query = pc.at(m.query_doc).doc;
      CHECK(m.candidate_doc != m.query_doc);
      CHECK(cand.entities[m.gold].name == "X");
      CHECK(query.entities[m.query_entity].name == "X");
    }
  }
  SUBCASE("synthetic corpus") {
    Fixture f;
    Rng rng(4);
    for (int i = 0; i < 500; ++i) {
      MMBatch m = SampleMM(*f.pc, Variant::kInter, {}, rng);
      CHECK(m.candidate_doc != m.query_doc);
      CHECK(f.pc->at(m.candidate_doc).identity[m.gold] ==
            f.pc->at(m.query_doc).identity[m.query_entity]);
      int matches = 0;
      for (const auto& id : f.pc->at(m.candidate_doc).identity) {
        matches += id == f.pc->at(m.query_doc).identity[m.query_entity];
      }
      CHECK(matches == 1);
    }
  }
}

TEST_CASE("MM inter without shared entities exhausts the retry budget") {
  Document a = MakeDoc("a", {{"X", "p", "Y"}}, {{{0, 0, 1}}, {{0, 2, 3}}});
  Document b = MakeDoc("b", {{"W", "r", "V"}}, {{{0, 0, 1}}, {{0, 2, 3}}});
  Vocabulary v = Vocabulary::Build({a, b}, 4);
  PretrainCorpus pc({a, b}, v, nullptr);
  Rng rng(1);
  CHECK_THROWS_AS(SampleMM(pc, Variant::kInter, {}, rng), SamplingError);
  CHECK_THROWS_AS(SampleRA(pc, {}, rng), SamplingError);
  CHECK_THROWS_AS(SampleRD(pc, Variant::kIntra, {}, rng), SamplingError);
}

TEST_CASE("MM intra gold indices are uniform over entity slots") {
  Fixture f;
  Rng rng(5);
  std::vector<int> counts(8, 0);
  const int n = 1000;
  for (int i = 0; i < n; ++i) ++counts[SampleMM(*f.pc, Variant::kIntra, {}, rng).gold];
  double chi2 = 0;
  for (int c : counts) chi2 += (c - n / 8.0) * (c - n / 8.0) / (n / 8.0);
  // 0.999 quantile of chi-square with 7 degrees of freedom.
  CHECK(chi2 < 24.32);
}

TEST_CASE("RD batches hold one positive and k_n - 1 NA pairs") {
  Fixture f;
  Rng rng(6);
  SamplerConfig sc;
  sc.k_n = 4;
  for (Variant v : {Variant::kIntra, Variant::kInter}) {
    for (int i = 0; i < 300; ++i) {
      RDBatch b = SampleRD(*f.pc, v, sc, rng);
      REQUIRE(b.instances.size() == 4);
      CHECK_FALSE(b.short_batch);
      int labeled = 0;
      for (size_t j = 0; j < b.instances.size(); ++j) {
        auto [slot, pair] = b.instances[j];
        const bool positive = IsLabeled(f.pc->at(b.docs[slot]).doc, pair);
        labeled += positive;
        CHECK(positive == (static_cast<int>(j) == b.gold));
      }
      CHECK(labeled == 1);
      CHECK(b.instances[b.gold].first == 0);
      std::set<std::pair<int, EntityPair>> unique(b.instances.begin(), b.instances.end());
      CHECK(unique.size() == b.instances.size());
      if (v == Variant::kIntra) {
        CHECK(b.docs.size() == 1);
      } else {
        REQUIRE(b.docs.size() == 2);
        CHECK(b.docs[0] != b.docs[1]);
        bool other = false;
        for (auto [slot, pair] : b.instances) other |= slot == 1;
        CHECK(other);
      }
    }
  }
}

TEST_CASE("RD with too few NA pairs yields a smaller batch") {
  Document d = MakeDoc("d", {{"a", "b", "c"}}, {{{0, 0, 1}}, {{0, 2, 3}}}, {{0, 1, 0, {}}});
  Vocabulary v = Vocabulary::Build({d}, 2);
  PretrainCorpus pc({d}, v, nullptr);
  Rng rng(1);
  RDBatch b = SampleRD(pc, Variant::kIntra, {}, rng);
  CHECK(b.short_batch);
  CHECK(b.instances.size() == 2);
}

TEST_CASE("RA candidates contain exactly the shared fact once") {
  Fixture f;
  Rng rng(7);
  SamplerConfig sc;
  for (int i = 0; i < 300; ++i) {
    RABatch b = SampleRA(*f.pc, sc, rng);
    CHECK(b.doc_a != b.doc_b);
    CHECK(static_cast<int>(b.candidates.size()) <= sc.k_s);
    const PretrainDocument& a = f.pc->at(b.doc_a);
    const PretrainDocument& q = f.pc->at(b.doc_b);
    auto has_fact = [&](const PretrainDocument& d, EntityPair p) {
      auto it = d.facts.find(p);
      return it != d.facts.end() &&
             std::find(it->second.begin(), it->second.end(), b.fact) != it->second.end();
    };
    CHECK(has_fact(q, b.query));
    for (size_t j = 0; j < b.candidates.size(); ++j) {
      CHECK(has_fact(a, b.candidates[j]) == (static_cast<int>(j) == b.gold));
    }
    // Identity of the gold pair equals the query's.
    EntityPair g = b.candidates[b.gold];
    CHECK(a.identity[g.first] == q.identity[b.query.first]);
    CHECK(a.identity[g.second] == q.identity[b.query.second]);
  }
}

TEST_CASE("RA clips k_s to the available pairs") {
  // Two-entity documents sharing one fact have only 2 pairs.
  Document a = MakeDoc("a", {{"X", "p", "Y"}}, {{{0, 0, 1}}, {{0, 2, 3}}}, {{0, 1, 0, {}}});
  Document b = MakeDoc("b", {{"Y", "q", "X", "s"}}, {{{0, 2, 3}}, {{0, 0, 1}}}, {{0, 1, 0, {}}});
  Vocabulary v = Vocabulary::Build({a, b}, 2);
  PretrainCorpus pc({a, b}, v, nullptr);
  Rng rng(1);
  SamplerConfig sc;
  sc.k_s = 5;
  RABatch r = SampleRA(pc, sc, rng);
  CHECK(r.clipped);
  CHECK(r.candidates.size() == 2);
}

TEST_CASE("every sampled batch has exactly one gold") {
  Fixture f;
  Rng rng(8);
  int checked = 0;
  for (int i = 0; i < 2000; ++i) {
    MMBatch mi = SampleMM(*f.pc, Variant::kIntra, {}, rng);
    CHECK((mi.gold >= 0 && mi.gold < mi.candidate_count));
    MMBatch me = SampleMM(*f.pc, Variant::kInter, {}, rng);
    CHECK((me.gold >= 0 && me.gold < me.candidate_count));
    RDBatch ri = SampleRD(*f.pc, Variant::kIntra, {}, rng);
    RDBatch re = SampleRD(*f.pc, Variant::kInter, {}, rng);
    for (const RDBatch* b : {&ri, &re}) {
      int pos = 0;
      for (auto [slot, pair] : b->instances) pos += IsLabeled(f.pc->at(b->docs[slot]).doc, pair);
      CHECK(pos == 1);
    }
    RABatch ra = SampleRA(*f.pc, {}, rng);
    CHECK(ra.gold < static_cast<int>(ra.candidates.size()));
    checked += 5;
  }
  CHECK(checked == 10000);
}

TEST_CASE("masked query leaks no entity names when alpha = 1") {
  Fixture f(60);
  Rng rng(9);
  SamplerConfig sc;
  sc.alpha = 1.0;
  for (int i = 0; i < 100; ++i) {
    MMBatch b = SampleMM(*f.pc, Variant::kIntra, sc, rng);
    const EncodedDocument& e = b.query_enc;
    for (int ent = 0; ent < e.entity_count(); ++ent) {
      for (size_t m = 0; m < e.mention_surface[ent].size(); ++m) {
        auto [lo, hi] = e.mention_surface[ent][m];
        const bool query = ent == b.query_entity && static_cast<int>(m) == b.query_mention;
        for (int p = lo; p < hi; ++p) {
          CHECK(e.token_ids[p] == (query ? Vocabulary::kMask : Vocabulary::kBlank));
        }
      }
    }
    // Name tokens of every candidate are absent from the whole sequence.
    std::set<int> name_ids;
    for (const Entity& ent : f.pc->at(b.query_doc).doc.entities) {
      for (const Mention& m : ent.mentions) {
        for (const auto& t : m.surface) name_ids.insert(f.vocab.Lookup(t));
      }
    }
    for (int id : e.token_ids) CHECK(name_ids.count(id) == 0);
  }
}

TEST_CASE("Bilinear_M is shared by both matching sub-tasks") {
  Fixture f(100);
  PretrainModel model(TinyParams(f.vocab.size()), 8);
  Rng rng(10);
  MMBatch intra = SampleMM(*f.pc, Variant::kIntra, {}, rng);
  MMBatch inter = SampleMM(*f.pc, Variant::kInter, {}, rng);
  auto before = ScoreBatch(model, inter);
  // Update Bilinear_M alone from the intra gradient.
  ZeroGrads(model.Parameters());
  TaskLoss(model, intra, 1.0);
  Parameter& w = model.bilinear_m().weight();
  for (size_t i = 0; i < w.size(); ++i) w.value[i] -= 0.5 * w.grad[i];
  CHECK(ScoreBatch(model, inter) != before);
  int named = 0;
  for (const Parameter* p : model.Parameters()) named += p->name.rfind("bilinear_m.", 0) == 0;
  CHECK(named == 2);
}

TEST_CASE("task losses match finite differences through the whole model") {
  PipelineFixture f(8, 16);
  Rng rng(12);
  SamplerConfig sc;
  sc.alpha = 0.3;
  PretrainModel& m = *f.model;
  CHECK(TaskGradientError(m, SampleMM(*f.pc, Variant::kIntra, sc, rng)) < 1e-3);
  CHECK(TaskGradientError(m, SampleMM(*f.pc, Variant::kInter, sc, rng)) < 1e-3);
  CHECK(TaskGradientError(m, SampleRD(*f.pc, Variant::kIntra, sc, rng)) < 1e-3);
  CHECK(TaskGradientError(m, SampleRD(*f.pc, Variant::kInter, sc, rng)) < 1e-3);
  CHECK(TaskGradientError(m, SampleRA(*f.pc, sc, rng)) < 1e-3);
}

TEST_CASE("gradient of the summed loss is the sum of task gradients") {
  PipelineFixture f(8, 16);
  Rng rng(13);
  PretrainModel& m = *f.model;
  MMBatch mm = SampleMM(*f.pc, Variant::kIntra, {}, rng);
  RDBatch rd = SampleRD(*f.pc, Variant::kIntra, {}, rng);
  RABatch ra = SampleRA(*f.pc, {}, rng);
  ParameterList params = m.Parameters();
  std::vector<std::vector<double>> sum;
  for (Parameter* p : params) sum.emplace_back(p->size(), 0.0);
  auto add = [&] {
    for (size_t i = 0; i < params.size(); ++i) {
      for (size_t j = 0; j < params[i]->size(); ++j) sum[i][j] += params[i]->grad[j];
    }
    ZeroGrads(params);
  };
  ZeroGrads(params);
  TaskLoss(m, mm, 1.0);
  add();
  TaskLoss(m, rd, 1.0);
  add();
  TaskLoss(m, ra, 1.0);
  add();
  TaskLoss(m, mm, 1.0);
  TaskLoss(m, rd, 1.0);
  TaskLoss(m, ra, 1.0);
  double worst = 0;
  for (size_t i = 0; i < params.size(); ++i) {
    for (size_t j = 0; j < params[i]->size(); ++j) {
      worst = std::max(worst, std::abs(params[i]->grad[j] - sum[i][j]));
    }
  }
  CHECK(worst < 1e-12);
  const double total = TaskLoss(m, mm, 0.0) + TaskLoss(m, rd, 0.0) + TaskLoss(m, ra, 0.0);
  CHECK(total == doctest::Approx(CombinedLoss(
                     {TaskLoss(m, mm, 0.0), TaskLoss(m, rd, 0.0), TaskLoss(m, ra, 0.0)})));
}

TEST_CASE("schedule follows the enabled tasks") {
  PretrainConfig c;
  CHECK(c.Schedule().size() == 5);
  c.tasks.rd = false;
  auto s = c.Schedule();
  CHECK(s == std::vector<PretrainTask>{PretrainTask::kMMIntra, PretrainTask::kMMInter,
                                       PretrainTask::kRA});
  c = PretrainConfig();
  c.inter = false;
  CHECK(c.Schedule() == std::vector<PretrainTask>{PretrainTask::kMMIntra,
                                                  PretrainTask::kRDIntra, PretrainTask::kRA});
  CHECK(PretrainConfig().adam.learning_rate == 3e-5);
  CHECK(PretrainConfig().batch_size == 16);
}

TEST_CASE("pre-training lowers the loss and is deterministic") {
  Fixture f(120);
  PretrainConfig c;
  c.encoder = TinyParams(f.vocab.size(), 16, 1);
  c.relation_dim = 16;
  c.epochs = 5;
  c.batch_size = 16;
  c.adam.learning_rate = 3e-3;
  PretrainModel a(c.encoder, c.relation_dim), b(c.encoder, c.relation_dim);
  PretrainResult ra = Pretrain(a, *f.pc, c);
  PretrainResult rb = Pretrain(b, *f.pc, c);
  REQUIRE(ra.epoch_loss.size() == 5);
  CHECK(ra.epoch_loss.back() < ra.epoch_loss.front());
  CHECK(ra.epoch_loss == rb.epoch_loss);
  auto pa = a.Parameters(), pb = b.Parameters();
  for (size_t i = 0; i < pa.size(); ++i) CHECK(pa[i]->value == pb[i]->value);
}

TEST_CASE("disabling RD removes it from the log") {
  Fixture f(60);
  PretrainConfig c;
  c.encoder = TinyParams(f.vocab.size(), 8, 1);
  c.relation_dim = 8;
  c.epochs = 1;
  c.steps_per_epoch = 3;
  c.tasks.rd = false;
  PretrainModel m(c.encoder, c.relation_dim);
  PretrainResult r = Pretrain(m, *f.pc, c);
  std::set<std::string> tasks;
  for (const auto& rec : r.log) tasks.insert(rec.task);
  CHECK(tasks == std::set<std::string>{"MM-intra", "MM-inter", "RA"});
}

TEST_CASE("divergence aborts with a diagnostic") {
  Fixture f(40);
  PretrainConfig c;
  c.encoder = TinyParams(f.vocab.size(), 8, 1);
  c.relation_dim = 8;
  c.epochs = 1;
  c.steps_per_epoch = 2;
  PretrainModel m(c.encoder, c.relation_dim);
  m.bilinear_m().weight().value[0] = NAN;
  m.rd().weight().value[0] = NAN;
  m.ra().weight().value[0] = NAN;
  try {
    Pretrain(m, *f.pc, c);
    FAIL("expected divergence");
  } catch (const std::runtime_error& e) {
    CHECK(std::string(e.what()).find("diverged at step 1") != std::string::npos);
  }
}

TEST_CASE("pre-trained checkpoint round trip") {
  Fixture f(20);
  PretrainModel m(TinyParams(f.vocab.size()), 8);
  const auto path = std::filesystem::temp_directory_path() / "docre_pre.ckpt";
  m.Save(path.string(), {{"note", "x"}});
  PretrainModel back = PretrainModel::Load(path.string());
  auto pa = m.Parameters(), pb = back.Parameters();
  REQUIRE(pa.size() == pb.size());
  for (size_t i = 0; i < pa.size(); ++i) {
    CHECK(pa[i]->name == pb[i]->name);
    CHECK(pa[i]->value == pb[i]->value);
  }
}
