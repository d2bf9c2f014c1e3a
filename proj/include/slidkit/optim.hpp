// Copyright (c) 2026 slidkit authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//   http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef SLIDKIT_OPTIM_HPP_
#define SLIDKIT_OPTIM_HPP_

#include <vector>

#include "slidkit/tensor.hpp"

namespace slidkit {

struct OptimConfig {
  double lr0 = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 1e-4;
  int total_steps = 1;
};

// lr0 * (1 + cos(pi * step / total_steps)) / 2. Annealed per optimizer
// step, not per epoch. Throws OutOfRange outside [0, total_steps].
double cosine_lr(int step, const OptimConfig& cfg);

// First/second moment accumulators, one pair per parameter tensor.
struct OptimState {
  std::vector<Tensor> m;
  std::vector<Tensor> v;
  int64_t step = 0;

  static OptimState init(const std::vector<Tensor*>& params);
};

// Bias-corrected AdamW with decoupled decay:
//   p <- p - lr * (m_hat / (sqrt(v_hat) + eps) + weight_decay * p).
// Throws NonFiniteGradient if any gradient entry is NaN/Inf.
void adamw_step(const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads, OptimState* state,
                const OptimConfig& cfg, double lr);

}  // namespace slidkit

#endif  // SLIDKIT_OPTIM_HPP_
