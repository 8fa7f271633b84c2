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

#include "docre/optimizer.h"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace docre {

AdamOptimizer::AdamOptimizer(ParameterList params, AdamConfig config,
                             long total_steps)
    : params_(std::move(params)), config_(config), total_steps_(total_steps) {
  if (config_.learning_rate <= 0) throw std::invalid_argument("learning rate must be > 0");
  for (Parameter* p : params_) {
    m_.emplace_back(p->size(), 0.0);
    v_.emplace_back(p->size(), 0.0);
  }
}

double AdamOptimizer::CurrentLearningRate() const {
  const long warmup = static_cast<long>(
      std::ceil(config_.warmup_fraction * static_cast<double>(total_steps_)));
  if (warmup > 0 && step_ < warmup) {
    return config_.learning_rate * static_cast<double>(step_ + 1) /
           static_cast<double>(warmup);
  }
  return config_.learning_rate;
}

void AdamOptimizer::Step(double grad_scale) {
  double norm_sq = 0.0;
  for (Parameter* p : params_) {
    for (double& g : p->grad) {
      g *= grad_scale;
      norm_sq += g * g;
    }
  }
  if (!std::isfinite(norm_sq)) {
    throw std::runtime_error("optimizer: non-finite gradient (training diverged)");
  }
  double clip = 1.0;
  const double norm = std::sqrt(norm_sq);
  if (config_.clip_norm > 0 && norm > config_.clip_norm) clip = config_.clip_norm / norm;

  const double lr = CurrentLearningRate();
  ++step_;
  const double bc1 = 1.0 - std::pow(config_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(config_.beta2, static_cast<double>(step_));
  for (size_t k = 0; k < params_.size(); ++k) {
    Parameter& p = *params_[k];
    std::vector<double>& m = m_[k];
    std::vector<double>& v = v_[k];
    for (size_t i = 0; i < p.size(); ++i) {
      const double g = p.grad[i] * clip;
      m[i] = config_.beta1 * m[i] + (1.0 - config_.beta1) * g;
      v[i] = config_.beta2 * v[i] + (1.0 - config_.beta2) * g * g;
      p.value[i] -= lr * ((m[i] / bc1) / (std::sqrt(v[i] / bc2) + config_.epsilon) +
                          config_.weight_decay * p.value[i]);
    }
    p.ZeroGrad();
  }
}

}  // namespace docre
