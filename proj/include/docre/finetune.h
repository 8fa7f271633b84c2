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


#ifndef DOCRE_FINETUNE_H_
#define DOCRE_FINETUNE_H_

#include <compare>
#include <cstdint>
#include <string>
#include <unordered_set>
#include <vector>

#include "docre/corpus.h"
#include "docre/denoise.h"
#include "docre/encoder.h"
#include "docre/heads.h"
#include "docre/marking.h"
#include "docre/optimizer.h"
#include "docre/pretrain.h"
#include "json.hpp"

namespace docre {

// Exact non-negative fraction, always in lowest terms. 0/0 reads as 0.
class Rational {
 public:
  Rational() = default;
  Rational(int64_t num, int64_t den);

  int64_t num() const { return num_; }
  int64_t den() const { return den_; }
  double value() const { return static_cast<double>(num_) / static_cast<double>(den_); }
  std::string ToString() const;

  friend Rational operator+(const Rational& a, const Rational& b);
  friend Rational operator*(const Rational& a, const Rational& b);
  friend Rational operator/(const Rational& a, const Rational& b);
  bool operator==(const Rational&) const = default;
  std::strong_ordering operator<=>(const Rational& other) const;

 private:
  int64_t num_ = 0;
  int64_t den_ = 1;
};

// 2PR / (P + R), with 0 when both are 0.
Rational HarmonicMean(const Rational& p, const Rational& r);

struct Prediction {
  std::string doc_id;
  int head = 0;
  int tail = 0;
  int relation = 0;
  double confidence = 0.0;
};

struct EvalReport {
  Rational precision, recall, f1, ign_f1;
  int64_t submitted = 0;
  int64_t correct = 0;
  int64_t total_gold = 0;
  int64_t correct_in_train = 0;

  nlohmann::json ToJson() const;
};

using FactSet = std::unordered_set<FactKey, FactKeyHash>;

FactSet TrainFactSet(const std::vector<Document>& train);

// Duplicate predictions (same doc, pair and relation) count once. Throws
// std::invalid_argument on a doc_id missing from `gold`.
EvalReport Evaluate(const std::vector<Prediction>& predictions,
                    const std::vector<Document>& gold, const FactSet& train_facts);

class FinetuneModel {
 public:
  FinetuneModel(const EncoderParams& params, int relation_dim, int relation_count);

  // Copies the encoder and Bilinear_E from a pre-trained model.
  void InitFrom(const PretrainModel& pretrained);

  DocumentModel& model() { return model_; }
  const DocumentModel& model() const { return model_; }
  ClassifierHead& head() { return head_; }
  const ClassifierHead& head() const { return head_; }

  // Per-pair relation probabilities, one row per pair.
  std::vector<std::vector<double>> Probabilities(
      const EncodedDocument& enc, const std::vector<EntityPair>& pairs) const;

  ParameterList Parameters();
  std::vector<const Parameter*> Parameters() const;

  void Save(const std::string& path, const nlohmann::json& config) const;
  static FinetuneModel Load(const std::string& path);

 private:
  DocumentModel model_;
  ClassifierHead head_;
};

// Retained pairs plus every gold pair the filter dropped, sorted.
std::vector<EntityPair> TrainingPairs(const Document& doc,
                                      const std::vector<EntityPair>& retained);

// Every retained (pair, relation) with its probability.
std::vector<Prediction> ScoreCandidates(const std::vector<Document>& docs,
                                        const Vocabulary& vocab,
                                        const FinetuneModel& model,
                                        const Filtration& filtration);
// Keeps candidates with confidence >= threshold.
std::vector<Prediction> Threshold(const std::vector<Prediction>& candidates,
                                  double threshold);
std::vector<Prediction> Predict(const std::vector<Document>& docs, const Vocabulary& vocab,
                                const FinetuneModel& model, const Filtration& filtration,
                                double threshold);

struct ThresholdChoice {
  double threshold = 1.0;
  Rational f1;
};

// Best F1 over every cut of the sorted confidences. A threshold above the
// largest confidence is chosen when no cut scores above zero.
ThresholdChoice SweepThreshold(const std::vector<Prediction>& candidates,
                               const std::vector<Document>& gold);

struct FinetuneConfig {
  int relation_dim = 256;
  int epochs = 10;
  int batch_size = 4;
  AdamConfig adam = [] {
    AdamConfig c;
    c.learning_rate = 1e-5;
    return c;
  }();
  uint64_t seed = 1;

  nlohmann::json ToJson() const;
};

struct FinetuneEpoch {
  double loss = 0.0;
  Rational dev_f1;
  double threshold = 1.0;
};

struct FinetuneResult {
  std::vector<FinetuneEpoch> epochs;
  int best_epoch = -1;  // 0-based
  double threshold = 1.0;
  Rational best_dev_f1;
};

// Trains end to end with per-relation binary cross-entropy and leaves the
// best-dev-F1 epoch's weights in `model`.
FinetuneResult Finetune(FinetuneModel& model, const std::vector<Document>& train,
                        const Filtration& train_filtration,
                        const std::vector<Document>& dev, const Filtration& dev_filtration,
                        const Vocabulary& vocab, const FinetuneConfig& config,
                        const LogFn& log = nullptr);

void WritePredictions(const std::string& path, const std::vector<Prediction>& predictions);
std::vector<Prediction> ReadPredictions(const std::string& path);

}  // namespace docre

#endif  // DOCRE_FINETUNE_H_
