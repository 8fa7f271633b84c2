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

#ifndef DOCRE_OPTIMIZER_H_
#define DOCRE_OPTIMIZER_H_

#include <vector>

#include "docre/tensor.h"

namespace docre {

struct AdamConfig {
  double learning_rate = 3e-5;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double warmup_fraction = 0.05;
  double clip_norm = 1.0;  // <= 0 disables clipping
  double weight_decay = 0.0;  // decoupled, applied to every parameter
};

// Adam with linear warmup over the first `warmup_fraction` of total steps,
// constant learning rate afterwards. Updates are applied in parameter-list
// order, so results are deterministic.
class AdamOptimizer {
 public:
  AdamOptimizer(ParameterList params, AdamConfig config, long total_steps);

  // Scales gradients by `grad_scale`, clips, updates, and zeroes gradients.
  void Step(double grad_scale = 1.0);
  double CurrentLearningRate() const;
  long steps() const { return step_; }

 private:
  ParameterList params_;
  AdamConfig config_;
  long total_steps_;
  long step_ = 0;
  std::vector<std::vector<double>> m_, v_;
};

}  // namespace docre

#endif  // DOCRE_OPTIMIZER_H_
