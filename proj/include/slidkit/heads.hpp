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

#ifndef SLIDKIT_HEADS_HPP_
#define SLIDKIT_HEADS_HPP_

#include <vector>

#include "slidkit/common.hpp"
#include "slidkit/tensor.hpp"

namespace slidkit {

// C x d prototype matrix, one weight vector per class. Logits are cosines
// of the angles between embeddings and rows, so the stored scale of a row
// never changes a logit.
struct ClassPrototypes {
  Matrix weights;  // C x d

  int num_classes() const { return weights.dim(0); }
  int dim() const { return weights.dim(1); }

  // Per-entry uniform in [-1/sqrt(d), 1/sqrt(d)] so initial cosines sit
  // near zero and margins bite from the first step.
  static ClassPrototypes init(int num_classes, int dim, Rng* rng);
};

struct MarginConfig {
  double scale_s = 30.0;
  double margin_m = 0.2;
};

// cos(i,j) = <e_i, w_j> / (|e_i| |w_j|), clamped to [-1, 1].
// Throws ZeroNorm on a degenerate embedding or prototype row.
Matrix cosine_logits(const Matrix& embeddings, const ClassPrototypes& protos);

struct LossResult {
  double loss = 0.0;
  Matrix grad_cos;  // N x C, d(mean loss)/d(cos entry)
};

// Mean over the batch of -log softmax(s * cos)_{y_i}, log-sum-exp
// stabilized.
LossResult ce_loss(const Matrix& cos, const std::vector<int>& labels,
                   double scale_s);

// Additive angular margin: the target entry cos(theta) becomes
// cos(theta + m) = cos(theta) cos(m) - sin(theta) sin(m), then scaled
// softmax CE. When theta + m would pass pi (cos(theta) < cos(pi - m)) the
// monotone linear fallback cos(theta) - m sin(m) is used instead.
LossResult aam_loss(const Matrix& cos, const std::vector<int>& labels,
                    const MarginConfig& cfg);

// Real additive margin: per sample
//   log(1 + sum_{j != y} exp(max{0, -s (cos_y - cos_j - m)})),
// mean over the batch, exps stabilized by factoring out the row maximum.
// A satisfied margin clamps its term to exp(0); its gradient is zero.
LossResult ram_loss(const Matrix& cos, const std::vector<int>& labels,
                    const MarginConfig& cfg);

struct HeadGrads {
  Matrix d_embeddings;  // N x d
  Matrix d_prototypes;  // C x d
};

// Chains grad_cos through the normalized dot product back to both
// operands of cosine_logits.
HeadGrads head_backward_to_embeddings(const Matrix& grad_cos,
                                      const Matrix& embeddings,
                                      const ClassPrototypes& protos);

}  // namespace slidkit

#endif  // SLIDKIT_HEADS_HPP_
