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

#ifndef DOCRE_HEADS_H_
#define DOCRE_HEADS_H_

#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "docre/encoder.h"
#include "docre/tensor.h"

namespace docre {

class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// s = w . r + b  (Relation Detection), or s = w . |a - b| + b  (Relational
// Fact Alignment) via ScoreAbsDiff.
class AffineScorer {
 public:
  AffineScorer() = default;
  AffineScorer(const std::string& name, int dim, Rng& rng);

  int dim() const { return static_cast<int>(weight_.size()); }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }
  const Parameter& weight() const { return weight_; }
  const Parameter& bias() const { return bias_; }

  double Score(std::span<const double> r) const;
  // Accumulates parameter gradients; adds d score / d r * upstream into dr.
  void Backward(std::span<const double> r, double upstream, std::span<double> dr);

  double ScoreAbsDiff(std::span<const double> a, std::span<const double> b) const;
  void BackwardAbsDiff(std::span<const double> a, std::span<const double> b,
                       double upstream, std::span<double> da, std::span<double> db);

  ParameterList Parameters() { return {&weight_, &bias_}; }
  std::vector<const Parameter*> Parameters() const { return {&weight_, &bias_}; }

 private:
  Parameter weight_, bias_;
};

// Mention-entity matching score through the shared Bilinear_M (d_out = 1).
double ScoreMm(std::span<const double> candidate, std::span<const double> query,
               const Bilinear& bilinear_m);
double ScoreRd(std::span<const double> r, const AffineScorer& rd);
double ScoreRa(std::span<const double> r_a, std::span<const double> r_b,
               const AffineScorer& ra);

std::vector<double> Softmax(std::span<const double> scores);

struct SoftmaxLoss {
  double loss = 0.0;
  std::vector<double> d_scores;  // gradient of loss w.r.t. scores
};

// -log softmax(scores)[gold]; throws NonFiniteError on non-finite scores.
SoftmaxLoss SoftmaxCrossEntropy(std::span<const double> scores, int gold);

enum class Task { kMentionEntity, kRelationDetection, kFactAlignment };

struct TaskLosses {
  double mm = 0.0;  // L_M
  double rd = 0.0;  // L_N
  double ra = 0.0;  // L_S
};

struct TaskMask {
  bool mm = true, rd = true, ra = true;
};

// L = L_M + L_S + L_N; disabled tasks contribute zero.
double CombinedLoss(const TaskLosses& losses, const TaskMask& mask = {});

// Multi-label relation classifier: independent sigmoid per relation.
class ClassifierHead {
 public:
  ClassifierHead() = default;
  ClassifierHead(int relation_count, int relation_dim, Rng& rng);

  int relation_count() const { return weight_.shape.empty() ? 0 : weight_.shape[0]; }
  Parameter& weight() { return weight_; }
  Parameter& bias() { return bias_; }

  std::vector<double> Logits(std::span<const double> r) const;
  std::vector<double> Probabilities(std::span<const double> r) const;
  // Binary cross-entropy summed over relations; accumulates parameter
  // gradients scaled by `scale` and adds the input gradient into dr.
  double LossAndBackward(std::span<const double> r,
                         const std::vector<bool>& targets, double scale,
                         std::span<double> dr);

  ParameterList Parameters() { return {&weight_, &bias_}; }
  std::vector<const Parameter*> Parameters() const { return {&weight_, &bias_}; }

 private:
  Parameter weight_, bias_;
};

std::vector<double> ClassifyPair(std::span<const double> r,
                                 const ClassifierHead& head);

double Sigmoid(double x);

}  // namespace docre

#endif  // DOCRE_HEADS_H_
