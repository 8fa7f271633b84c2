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

#include "docre/heads.h"

#include <algorithm>
#include <cmath>

#include "docre/rng.h"

namespace docre {

namespace {

void CheckSize(size_t a, size_t b, const char* what) {
  if (a != b) throw std::invalid_argument(std::string(what) + ": shape mismatch");
}

}  // namespace

AffineScorer::AffineScorer(const std::string& name, int dim, Rng& rng)
    : weight_(name + ".weight", {dim}), bias_(name + ".bias", {1}) {
  weight_.InitUniform(1.0 / std::sqrt(static_cast<double>(dim)), rng);
}

double AffineScorer::Score(std::span<const double> r) const {
  CheckSize(r.size(), weight_.size(), "affine score");
  return Dot(r, weight_.value) + bias_.value[0];
}

void AffineScorer::Backward(std::span<const double> r, double upstream,
                            std::span<double> dr) {
  CheckSize(r.size(), weight_.size(), "affine backward");
  for (size_t i = 0; i < r.size(); ++i) {
    weight_.grad[i] += upstream * r[i];
    if (!dr.empty()) dr[i] += upstream * weight_.value[i];
  }
  bias_.grad[0] += upstream;
}

double AffineScorer::ScoreAbsDiff(std::span<const double> a,
                                  std::span<const double> b) const {
  CheckSize(a.size(), weight_.size(), "abs-diff score");
  CheckSize(b.size(), weight_.size(), "abs-diff score");
  double s = bias_.value[0];
  for (size_t i = 0; i < a.size(); ++i) s += weight_.value[i] * std::abs(a[i] - b[i]);
  return s;
}

void AffineScorer::BackwardAbsDiff(std::span<const double> a,
                                   std::span<const double> b, double upstream,
                                   std::span<double> da, std::span<double> db) {
  for (size_t i = 0; i < a.size(); ++i) {
    const double diff = a[i] - b[i];
    weight_.grad[i] += upstream * std::abs(diff);
    const double sign = diff > 0 ? 1.0 : (diff < 0 ? -1.0 : 0.0);
    const double g = upstream * weight_.value[i] * sign;
    if (!da.empty()) da[i] += g;
    if (!db.empty()) db[i] -= g;
  }
  bias_.grad[0] += upstream;
}

double ScoreMm(std::span<const double> candidate, std::span<const double> query,
               const Bilinear& bilinear_m) {
  if (bilinear_m.out_dim() != 1) {
    throw std::invalid_argument("mention-entity bilinear must have one output");
  }
  return bilinear_m.Apply(candidate, query)[0];
}

double ScoreRd(std::span<const double> r, const AffineScorer& rd) {
  return rd.Score(r);
}

double ScoreRa(std::span<const double> r_a, std::span<const double> r_b,
               const AffineScorer& ra) {
  return ra.ScoreAbsDiff(r_a, r_b);
}

std::vector<double> Softmax(std::span<const double> scores) {
  std::vector<double> p(scores.begin(), scores.end());
  if (p.empty()) return p;
  const double mx = *std::max_element(p.begin(), p.end());
  double sum = 0.0;
  for (double& v : p) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (double& v : p) v /= sum;
  return p;
}

SoftmaxLoss SoftmaxCrossEntropy(std::span<const double> scores, int gold) {
  if (scores.size() < 2) {
    throw std::invalid_argument("softmax loss needs at least two candidates");
  }
  if (gold < 0 || gold >= static_cast<int>(scores.size())) {
    throw std::out_of_range("softmax loss: gold index out of range");
  }
  for (double s : scores) {
    if (!std::isfinite(s)) throw NonFiniteError("non-finite score in softmax loss");
  }
  const double mx = *std::max_element(scores.begin(), scores.end());
  double sum = 0.0;
  for (double s : scores) sum += std::exp(s - mx);
  const double log_z = mx + std::log(sum);
  SoftmaxLoss out;
  out.loss = log_z - scores[gold];
  out.d_scores.resize(scores.size());
  for (size_t i = 0; i < scores.size(); ++i) {
    out.d_scores[i] = std::exp(scores[i] - log_z);
  }
  out.d_scores[gold] -= 1.0;
  return out;
}

double CombinedLoss(const TaskLosses& losses, const TaskMask& mask) {
  const double total = (mask.mm ? losses.mm : 0.0) + (mask.ra ? losses.ra : 0.0) +
                       (mask.rd ? losses.rd : 0.0);
  if (!std::isfinite(total)) throw NonFiniteError("non-finite combined loss");
  return total;
}

double Sigmoid(double x) {
  if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

ClassifierHead::ClassifierHead(int relation_count, int relation_dim, Rng& rng)
    : weight_("classifier.weight", {relation_count, relation_dim}),
      bias_("classifier.bias", {relation_count}) {
  weight_.InitUniform(1.0 / std::sqrt(static_cast<double>(relation_dim)), rng);
}

std::vector<double> ClassifierHead::Logits(std::span<const double> r) const {
  const int rc = weight_.shape[0], dim = weight_.shape[1];
  CheckSize(r.size(), static_cast<size_t>(dim), "classifier");
  std::vector<double> out(rc);
  for (int k = 0; k < rc; ++k) {
    out[k] = bias_.value[k] +
             Dot(std::span<const double>(weight_.data() + static_cast<size_t>(k) * dim, dim), r);
  }
  return out;
}

std::vector<double> ClassifierHead::Probabilities(std::span<const double> r) const {
  std::vector<double> p = Logits(r);
  for (double& v : p) v = Sigmoid(v);
  return p;
}

double ClassifierHead::LossAndBackward(std::span<const double> r,
                                       const std::vector<bool>& targets,
                                       double scale, std::span<double> dr) {
  const int rc = weight_.shape[0], dim = weight_.shape[1];
  CheckSize(targets.size(), static_cast<size_t>(rc), "classifier targets");
  const std::vector<double> z = Logits(r);
  double loss = 0.0;
  for (int k = 0; k < rc; ++k) {
    if (!std::isfinite(z[k])) throw NonFiniteError("non-finite classifier logit");
    // log(1 + e^z) - y z, computed stably.
    const double softplus = z[k] > 0 ? z[k] + std::log1p(std::exp(-z[k]))
                                     : std::log1p(std::exp(z[k]));
    loss += softplus - (targets[k] ? z[k] : 0.0);
    const double g = scale * (Sigmoid(z[k]) - (targets[k] ? 1.0 : 0.0));
    double* w = weight_.data() + static_cast<size_t>(k) * dim;
    double* wg = weight_.grad.data() + static_cast<size_t>(k) * dim;
    for (int i = 0; i < dim; ++i) {
      wg[i] += g * r[i];
      if (!dr.empty()) dr[i] += g * w[i];
    }
    bias_.grad[k] += g;
  }
  return loss;
}

std::vector<double> ClassifyPair(std::span<const double> r,
                                 const ClassifierHead& head) {
  return head.Probabilities(r);
}

}  // namespace docre
