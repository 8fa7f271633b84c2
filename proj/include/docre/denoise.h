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

#ifndef DOCRE_DENOISE_H_
#define DOCRE_DENOISE_H_

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "docre/corpus.h"
#include "docre/encoder.h"
#include "docre/heads.h"
#include "docre/marking.h"
#include "docre/optimizer.h"
#include "json.hpp"

namespace docre {

struct RankedPair {
  int head = 0;
  int tail = 0;
  double score = 0.0;

  bool operator==(const RankedPair&) const = default;
};

// Pairs sorted by score descending, ties by (head, tail) ascending.
struct RankedPairs {
  std::string doc_id;
  std::vector<RankedPair> pairs;
  int retained = 0;

  std::vector<EntityPair> RetainedPairs() const;
  bool operator==(const RankedPairs&) const = default;
};

// How many pairs a document keeps: either a fixed count or a multiple of
// its entity count.
struct CutoffRule {
  int fixed = 0;
  int per_entity = 0;

  static CutoffRule Fixed(int k) { return {k, 0}; }
  static CutoffRule PerEntity(int m) { return {0, m}; }
  int For(const Document& doc) const;
  nlohmann::json ToJson() const;
};

// Rank model: its own encoder, Bilinear_E and Relation Detection scorer.
class Ranker {
 public:
  Ranker(const EncoderParams& params, int relation_dim);

  DocumentModel& model() { return model_; }
  const DocumentModel& model() const { return model_; }
  AffineScorer& scorer() { return scorer_; }
  const AffineScorer& scorer() const { return scorer_; }

  ParameterList Parameters();
  std::vector<const Parameter*> Parameters() const;

  void Save(const std::string& path, const nlohmann::json& config) const;
  static Ranker Load(const std::string& path);

 private:
  DocumentModel model_;
  AffineScorer scorer_;
};

struct RankerConfig {
  EncoderParams encoder;
  int relation_dim = 256;
  int k_n = 8;
  int epochs = 5;
  int batch_size = 4;  // documents per optimizer step
  double blank_alpha = 0.0;  // BLANK augmentation of training documents
  AdamConfig adam;
  uint64_t seed = 1;

  nlohmann::json ToJson() const;
};

using LogFn = std::function<void(const std::string&)>;

// Trains with intra-document Relation Detection batches: each labeled pair
// against up to k_n - 1 unlabeled pairs of the same document.
Ranker TrainRanker(const std::vector<Document>& annotated, const Vocabulary& vocab,
                   const RankerConfig& config, const LogFn& log = nullptr);

RankedPairs ScorePairs(const Document& doc, const Vocabulary& vocab,
                       const Ranker& ranker);
RankedPairs ScorePairs(const Document& doc, const EncodedDocument& enc,
                       const Ranker& ranker);
// Sorts and assigns `retained` without dropping anything.
RankedPairs RankScores(const std::string& doc_id, std::vector<RankedPair> scored,
                       int k_d);
// Keeps the top min(k_d, |pairs|) pairs.
RankedPairs FilterTopK(const RankedPairs& ranked, int k_d);

// doc_id -> retained pairs, as persisted in the filtration sidecar.
struct Filtration {
  nlohmann::json header;
  std::map<std::string, RankedPairs> docs;

  const RankedPairs& At(const std::string& doc_id) const;
  void Save(const std::string& path) const;
  static Filtration Load(const std::string& path);
};

Filtration FilterCorpus(const std::vector<Document>& docs, const Vocabulary& vocab,
                        const Ranker& ranker, const CutoffRule& rule,
                        nlohmann::json header = {});

// Fraction of gold-labeled pairs inside each document's retained set.
double GoldPairRecall(const std::vector<Document>& docs, const Filtration& filtration);
// Expected recall of a uniformly random ranking at the same per-document
// cutoff: sum over docs of |gold| * min(k, P) / P, divided by total gold.
double RandomRankingRecall(const std::vector<Document>& docs, const CutoffRule& rule);

}  // namespace docre

#endif  // DOCRE_DENOISE_H_
