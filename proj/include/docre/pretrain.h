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

#ifndef DOCRE_PRETRAIN_H_
#define DOCRE_PRETRAIN_H_

#include <map>
#include <set>
#include <string>
#include <vector>

#include "docre/corpus.h"
#include "docre/denoise.h"
#include "docre/encoder.h"
#include "docre/heads.h"
#include "docre/marking.h"
#include "docre/optimizer.h"
#include "json.hpp"

namespace docre {

class Rng;

enum class Variant { kIntra, kInter };

// Raised when a sampler exhausts its retry budget.
class SamplingError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// One pre-training document: its encoding, the denoiser-retained pairs and
// the cross-document identity of each entity.
struct PretrainDocument {
  Document doc;
  EncodedDocument enc;
  std::vector<std::string> identity;    // per entity
  std::vector<EntityPair> retained;     // denoiser-retained pairs
  std::vector<EntityPair> positives;    // retained and labeled
  std::vector<EntityPair> negatives;    // retained and unlabeled (NA)
  std::map<EntityPair, std::vector<FactKey>> facts;  // labeled retained pairs
};

// A pre-training corpus with the cross-document indexes the inter-document
// samplers need.
class PretrainCorpus {
 public:
  // Without a filtration every pair is retained.
  PretrainCorpus(const std::vector<Document>& docs, const Vocabulary& vocab,
                 const Filtration* filtration);

  size_t size() const { return docs_.size(); }
  const PretrainDocument& at(size_t i) const { return docs_.at(i); }
  const std::vector<PretrainDocument>& docs() const { return docs_; }

  // (doc, entity) occurrences of each identity.
  const std::map<std::string, std::vector<std::pair<int, int>>>& entity_index() const {
    return entity_index_;
  }
  // (doc, pair) occurrences of each retained labeled fact.
  const std::map<FactKey, std::vector<std::pair<int, EntityPair>>>& fact_index() const {
    return fact_index_;
  }

  std::vector<int> docs_with_entities;   // >= 2 entities
  std::vector<int> docs_with_positives;  // >= 1 retained labeled and NA pair
  std::vector<std::string> shared_identities;  // seen in >= 2 docs
  std::vector<FactKey> shared_facts;           // seen in >= 2 docs

 private:
  std::vector<PretrainDocument> docs_;
  std::map<std::string, std::vector<std::pair<int, int>>> entity_index_;
  std::map<FactKey, std::vector<std::pair<int, EntityPair>>> fact_index_;
};

// Mention-Entity Matching. Intra: the masked query mention against every
// entity of its own document (k_m = N_ent). Inter: entity e_B^q of d_B
// against every entity of d_A (k_e = N_ent of d_A).
struct MMBatch {
  Variant variant = Variant::kIntra;
  int query_doc = 0;      // corpus index of the query's document
  int candidate_doc = 0;  // == query_doc for intra
  EncodedDocument query_enc;
  EncodedDocument candidate_enc;  // unused for intra
  int query_entity = 0;
  int query_mention = 0;  // intra only
  int gold = 0;
  int candidate_count = 0;
};

// Relation Detection: relational instances of which exactly one is positive.
struct RDBatch {
  Variant variant = Variant::kIntra;
  std::vector<int> docs;  // corpus indexes
  std::vector<EncodedDocument> encs;
  std::vector<std::pair<int, EntityPair>> instances;  // (slot in docs, pair)
  int gold = 0;
  bool short_batch = false;  // fewer than k_n candidates were available
};

// Relational Fact Alignment: r_B^q against k_s instances of d_A.
struct RABatch {
  int doc_a = 0, doc_b = 0;
  EncodedDocument enc_a, enc_b;
  std::vector<EntityPair> candidates;  // pairs of d_A
  EntityPair query;                    // pair of d_B
  FactKey fact;
  int gold = 0;
  bool clipped = false;  // d_A had fewer than k_s pairs
};

// Sampler settings shared by all tasks.
struct SamplerConfig {
  double alpha = 0.7;  // BLANK probability
  int k_n = 8;
  int k_s = 8;
  int retry_budget = 100;
};

MMBatch SampleMM(const PretrainCorpus& corpus, Variant variant,
                 const SamplerConfig& config, Rng& rng);
RDBatch SampleRD(const PretrainCorpus& corpus, Variant variant,
                 const SamplerConfig& config, Rng& rng);
RABatch SampleRA(const PretrainCorpus& corpus, const SamplerConfig& config, Rng& rng);

// Document model plus the three task heads. Bilinear_M is a single
// parameter set used by both matching sub-tasks.
class PretrainModel {
 public:
  PretrainModel(const EncoderParams& params, int relation_dim);

  DocumentModel& model() { return model_; }
  const DocumentModel& model() const { return model_; }
  Bilinear& bilinear_m() { return bilinear_m_; }
  const Bilinear& bilinear_m() const { return bilinear_m_; }
  AffineScorer& rd() { return rd_; }
  const AffineScorer& rd() const { return rd_; }
  AffineScorer& ra() { return ra_; }
  const AffineScorer& ra() const { return ra_; }

  ParameterList Parameters();
  std::vector<const Parameter*> Parameters() const;

  void Save(const std::string& path, const nlohmann::json& config) const;
  static PretrainModel Load(const std::string& path);

 private:
  DocumentModel model_;
  Bilinear bilinear_m_;
  AffineScorer rd_, ra_;
};

// Candidate scores for a batch (no gradients).
std::vector<double> ScoreBatch(const PretrainModel& model, const MMBatch& batch);
std::vector<double> ScoreBatch(const PretrainModel& model, const RDBatch& batch);
std::vector<double> ScoreBatch(const PretrainModel& model, const RABatch& batch);

// Cross-entropy against the gold index; when `scale` is non-zero the
// gradient of scale * loss is accumulated into the model.
double TaskLoss(PretrainModel& model, const MMBatch& batch, double scale);
double TaskLoss(PretrainModel& model, const RDBatch& batch, double scale);
double TaskLoss(PretrainModel& model, const RABatch& batch, double scale);

enum class PretrainTask { kMMIntra, kMMInter, kRDIntra, kRDInter, kRA };
const char* TaskName(PretrainTask task);

struct PretrainConfig {
  EncoderParams encoder;
  int relation_dim = 256;
  SamplerConfig sampler;
  int epochs = 3;
  int batch_size = 16;         // task instances per optimizer step
  long steps_per_epoch = 0;    // 0: ceil(|docs| / batch_size)
  AdamConfig adam;             // learning_rate default 3e-5
  TaskMask tasks;
  bool intra = true;           // MM-intra and RD-intra
  bool inter = true;           // MM-inter and RD-inter
  uint64_t seed = 1;

  std::vector<PretrainTask> Schedule() const;
  nlohmann::json ToJson() const;
};

struct PretrainLogRecord {
  long step = 0;
  std::string task;
  double loss = 0.0;
};

struct PretrainResult {
  std::vector<double> epoch_loss;  // mean combined loss per epoch
  std::vector<PretrainLogRecord> log;
};

// Round-robin over the enabled tasks; each step optimizes the sum over tasks
// of the per-task mean cross-entropy.
PretrainResult Pretrain(PretrainModel& model, const PretrainCorpus& corpus,
                        const PretrainConfig& config, const LogFn& log = nullptr);

void WritePretrainLog(const std::string& path, const PretrainResult& result);

}  // namespace docre

#endif  // DOCRE_PRETRAIN_H_
