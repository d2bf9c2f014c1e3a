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

#include "slidkit/optim.hpp"

#include <cmath>
#include <string>

#include "slidkit/common.hpp"

namespace slidkit {

double cosine_lr(int step, const OptimConfig& cfg) {
  if (cfg.total_steps <= 0) throw OutOfRange("total_steps must be positive");
  if (step < 0 || step > cfg.total_steps) {
    throw OutOfRange("step " + std::to_string(step) + " outside [0, " +
                     std::to_string(cfg.total_steps) + "]");
  }
  const double lr =
      cfg.lr0 * 0.5 *
      (1.0 + std::cos(M_PI * static_cast<double>(step) / cfg.total_steps));
  return lr > 0.0 ? lr : 0.0;
}

OptimState OptimState::init(const std::vector<Tensor*>& params) {
  OptimState st;
  st.m.reserve(params.size());
  st.v.reserve(params.size());
  for (const Tensor* p : params) {
    st.m.push_back(p->zeros_like());
    st.v.push_back(p->zeros_like());
  }
  st.step = 0;
  return st;
}

void adamw_step(const std::vector<Tensor*>& params,
                const std::vector<const Tensor*>& grads, OptimState* state,
                const OptimConfig& cfg, double lr) {
  if (params.size() != grads.size() || params.size() != state->m.size()) {
    throw ShapeMismatch("params/grads/state tensor counts differ");
  }
  if (lr < 0.0) throw OutOfRange("negative learning rate");

  state->step += 1;
  const double t = static_cast<double>(state->step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);

  for (size_t k = 0; k < params.size(); ++k) {
    Tensor& p = *params[k];
    const Tensor& g = *grads[k];
    Tensor& m = state->m[k];
    Tensor& v = state->v[k];
    if (!p.same_shape(g) || !p.same_shape(m)) {
      throw ShapeMismatch("parameter/gradient shape mismatch at tensor " +
                          std::to_string(k));
    }
    for (int64_t i = 0; i < p.numel(); ++i) {
      const double gi = g.data[i];
      if (!std::isfinite(gi)) {
        throw NonFiniteGradient("tensor " + std::to_string(k) + " entry " +
                                std::to_string(i));
      }
      m.data[i] = cfg.beta1 * m.data[i] + (1.0 - cfg.beta1) * gi;
      v.data[i] = cfg.beta2 * v.data[i] + (1.0 - cfg.beta2) * gi * gi;
      const double m_hat = m.data[i] / bc1;
      const double v_hat = v.data[i] / bc2;
      p.data[i] -= lr * (m_hat / (std::sqrt(v_hat) + cfg.eps) +
                         cfg.weight_decay * p.data[i]);
    }
  }
}

}  // namespace slidkit
