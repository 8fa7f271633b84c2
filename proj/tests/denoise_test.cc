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
#include <filesystem>
#include <fstream>
#include <set>

#include "docre/denoise.h"
#include "docre/rng.h"
#include "docre/synth.h"
#include "doctest.h"
#include "testing.h"

using namespace docre;
using namespace docre::testing;

namespace {

std::vector<RankedPair> RandomScores(int n_ent, Rng& rng) {
  std::vector<RankedPair> out;
  for (auto [h, t] : EnumeratePairs(n_ent)) {
    // Coarse scores so that ties are common.
    out.push_back({h, t, static_cast<double>(rng.UniformIndex(4))});
  }
  return out;
}

std::set<EntityPair> BruteForceTopK(std::vector<RankedPair> s, int k) {
  std::set<EntityPair> out;
  while (static_cast<int>(out.size()) < k && !s.empty()) {
    auto best = s.begin();
    for (auto it = s.begin(); it != s.end(); ++it) {
      if (it->score > best->score ||
          (it->score == best->score && std::pair(it->head, it->tail) < std::pair(best->head, best->tail))) {
        best = it;
      }
    }
    out.emplace(best->head, best->tail);
    s.erase(best);
  }
  return out;
}

std::string ReadFile(const std::filesystem::path& p) {
  std::ifstream in(p);
  return {std::istreambuf_iterator<char>(in), {}};
}

struct Data {
  SynthCorpus corpus;
  CorpusSplit split;
  Vocabulary vocab;

  Data() {
    SynthConfig c;
    c.n_docs = 150;
    c.n_distant_docs = 20;
    c.rng_seed = 2;
    corpus = Synthesize(c);
    split = Split(corpus.annotated, {0.8, 0.2, 0.0}, 1);
    vocab = Vocabulary::Build(corpus.annotated, 8);
  }

  RankerConfig Config(int epochs) const {
    RankerConfig rc;
    rc.encoder = TinyParams(vocab.size(), 16, 1);
    rc.encoder.max_length = 256;
    rc.relation_dim = 16;
    rc.epochs = epochs;
    rc.adam.learning_rate = 2e-3;
    return rc;
  }
};

}  // namespace

TEST_CASE("filter keeps the highest scores") {
  auto ranked = RankScores("d", {{0, 1, 0.9}, {0, 2, 0.1}, {1, 0, 0.5}}, 3);
  auto kept = FilterTopK(ranked, 2).RetainedPairs();
  CHECK(kept == std::vector<EntityPair>{{0, 1}, {1, 0}});
  CHECK(FilterTopK(ranked, 10).retained == 3);
  CHECK_THROWS(FilterTopK(ranked, 0));
}

TEST_CASE("ties break by (head, tail)") {
  auto ranked = RankScores("d", {{2, 0, 1.0}, {0, 2, 1.0}, {1, 0, 1.0}, {0, 1, 2.0}}, 4);
  std::vector<EntityPair> order;
  for (const auto& p : ranked.pairs) order.emplace_back(p.head, p.tail);
  CHECK(order == std::vector<EntityPair>{{0, 1}, {0, 2}, {1, 0}, {2, 0}});
}

TEST_CASE("filter equals a brute-force selection, is idempotent and monotone") {
  Rng rng(4);
  for (int trial = 0; trial < 100; ++trial) {
    const int n = 2 + rng.UniformIndex(6);
    auto scores = RandomScores(n, rng);
    const int pairs = static_cast<int>(scores.size());
    auto ranked = RankScores("d", scores, pairs);
    for (int k = 1; k <= pairs + 1; ++k) {
      RankedPairs once = FilterTopK(ranked, k);
      auto kept = once.RetainedPairs();
      CHECK(std::set<EntityPair>(kept.begin(), kept.end()) == BruteForceTopK(scores, k));
      CHECK(once.retained == std::min(k, pairs));
      CHECK(FilterTopK(once, k) == once);
      auto next = FilterTopK(ranked, k + 1).RetainedPairs();
      std::set<EntityPair> bigger(next.begin(), next.end());
      for (const EntityPair& p : kept) CHECK(bigger.count(p) == 1);
      for (size_t i = 1; i < once.pairs.size(); ++i) {
        CHECK(once.pairs[i - 1].score >= once.pairs[i].score);
      }
    }
  }
}

TEST_CASE("cutoff rules") {
  Document d = MakeDoc("d", {{"a", "b", "c", "d"}}, {{{0, 0, 1}}, {{0, 1, 2}}, {{0, 2, 3}}});
  CHECK(CutoffRule::Fixed(20).For(d) == 20);
  CHECK(CutoffRule::PerEntity(2).For(d) == 6);
  CHECK_THROWS(CutoffRule().For(d));
}

TEST_CASE("scoring covers every pair and equals w . r + b") {
  Data data;
  Ranker ranker(TinyParams(data.vocab.size()), 8);
  Document d = data.corpus.annotated[0];
  d.entities.resize(3);
  d.labels.clear();
  RankedPairs r = ScorePairs(d, data.vocab, ranker);
  CHECK(r.pairs.size() == 6);
  CHECK(ScorePairs(d, data.vocab, ranker) == r);

  ReprSet reps = ranker.model().Represent(EncodeWithMarkers(d, data.vocab), {{2, 0}});
  double hand = ranker.scorer().bias().value[0];
  for (int k = 0; k < 8; ++k) hand += ranker.scorer().weight().value[k] * reps.relations(0, k);
  auto it = std::find_if(r.pairs.begin(), r.pairs.end(),
                         [](const RankedPair& p) { return p.head == 2 && p.tail == 0; });
  REQUIRE(it != r.pairs.end());
  CHECK(it->score == doctest::Approx(hand).epsilon(1e-12));
}

TEST_CASE("untrained ranker with zero weights falls back to tie-break order") {
  Data data;
  Ranker ranker(TinyParams(data.vocab.size()), 8);
  std::fill(ranker.scorer().weight().value.begin(), ranker.scorer().weight().value.end(), 0.0);
  ranker.scorer().bias().value[0] = 0.25;
  const Document& d = data.corpus.annotated[1];
  RankedPairs r = ScorePairs(d, data.vocab, ranker);
  std::vector<EntityPair> order;
  for (const auto& p : r.pairs) {
    CHECK(p.score == 0.25);
    order.emplace_back(p.head, p.tail);
  }
  CHECK(order == EnumeratePairs(d));
}

TEST_CASE("a corpus without positives cannot train a ranker") {
  Data data;
  std::vector<Document> docs = data.split.train;
  for (Document& d : docs) d.labels.clear();
  CHECK_THROWS_AS(TrainRanker(docs, data.vocab, data.Config(1)), std::invalid_argument);
}

TEST_CASE("trained ranker separates positives from NA pairs on held-out documents") {
  Data data;
  Ranker ranker = TrainRanker(data.split.train, data.vocab, data.Config(4));
  double pos = 0, neg = 0;
  int np = 0, nn = 0;
  for (const Document& d : data.split.dev) {
    std::set<EntityPair> gold;
    for (const auto& l : d.labels) gold.emplace(l.head, l.tail);
    for (const RankedPair& p : ScorePairs(d, data.vocab, ranker).pairs) {
      if (gold.count({p.head, p.tail})) {
        pos += p.score;
        ++np;
      } else {
        neg += p.score;
        ++nn;
      }
    }
  }
  CHECK(pos / np > neg / nn);
  Filtration f = FilterCorpus(data.split.dev, data.vocab, ranker, CutoffRule::PerEntity(2));
  CHECK(GoldPairRecall(data.split.dev, f) >
        RandomRankingRecall(data.split.dev, CutoffRule::PerEntity(2)));
}

TEST_CASE("ranker training is deterministic and checkpoints round trip") {
  Data data;
  RankerConfig rc = data.Config(1);
  std::vector<Document> few(data.split.train.begin(), data.split.train.begin() + 30);
  Ranker a = TrainRanker(few, data.vocab, rc), b = TrainRanker(few, data.vocab, rc);
  const auto dir = std::filesystem::temp_directory_path();
  a.Save((dir / "docre_ra.ckpt").string(), rc.ToJson());
  b.Save((dir / "docre_rb.ckpt").string(), rc.ToJson());
  CHECK(ReadFile(dir / "docre_ra.ckpt") == ReadFile(dir / "docre_rb.ckpt"));
  Ranker back = Ranker::Load((dir / "docre_ra.ckpt").string());
  CHECK(ScorePairs(data.split.dev[0], data.vocab, back) ==
        ScorePairs(data.split.dev[0], data.vocab, a));
}

TEST_CASE("filtration sidecar round trip and idempotent re-filtering") {
  Data data;
  Ranker ranker(TinyParams(data.vocab.size()), 8);
  const auto dir = std::filesystem::temp_directory_path();
  Filtration f = FilterCorpus(data.corpus.distant, data.vocab, ranker, CutoffRule::Fixed(20),
                              {{"k_d", 20}});
  for (const auto& [id, r] : f.docs) CHECK(r.retained <= 20);
  f.Save((dir / "docre_f1.json").string());
  FilterCorpus(data.corpus.distant, data.vocab, ranker, CutoffRule::Fixed(20), {{"k_d", 20}})
      .Save((dir / "docre_f2.json").string());
  CHECK(ReadFile(dir / "docre_f1.json") == ReadFile(dir / "docre_f2.json"));
  Filtration back = Filtration::Load((dir / "docre_f1.json").string());
  CHECK(back.docs == f.docs);
  CHECK(back.header == f.header);
  CHECK_THROWS_AS(back.At("nope"), std::out_of_range);

  Filtration dev = FilterCorpus(data.split.dev, data.vocab, ranker, CutoffRule::PerEntity(2));
  for (const Document& d : data.split.dev) {
    CHECK(dev.At(d.doc_id).retained <= 2 * static_cast<int>(d.entities.size()));
  }
}

TEST_CASE("recall helpers on a hand count") {
  // Three entities, six pairs; gold pairs (0,1) and (2,0).
  Document d = MakeDoc("d", {{"a", "b", "c"}}, {{{0, 0, 1}}, {{0, 1, 2}}, {{0, 2, 3}}},
                       {{0, 1, 0, {}}, {2, 0, 1, {}}});
  Filtration f;
  f.docs["d"] = RankScores("d", {{0, 1, 3.0}, {1, 2, 2.0}, {2, 0, 1.0}}, 2);
  CHECK(GoldPairRecall({d}, f) == 0.5);
  CHECK(RandomRankingRecall({d}, CutoffRule::Fixed(3)) == 0.5);
  CHECK(RandomRankingRecall({d}, CutoffRule::PerEntity(2)) == 1.0);
}
