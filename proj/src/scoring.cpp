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

#include "slidkit/scoring.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "slidkit/common.hpp"

namespace slidkit {

int classify(const std::vector<double>& scores) {
  if (scores.size() < 2) throw ShapeMismatch("need at least 2 class scores");
  int best = 0;
  for (size_t j = 0; j < scores.size(); ++j) {
    if (!std::isfinite(scores[j])) {
      throw NonFiniteScore("class " + std::to_string(j));
    }
    if (scores[j] > scores[best]) best = static_cast<int>(j);
  }
  return best;
}

double cosine_score(const std::vector<double>& a,
                    const std::vector<double>& b) {
  if (a.size() != b.size() || a.empty()) {
    throw ShapeMismatch("embedding dimensions differ");
  }
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  if (na == 0.0 || nb == 0.0) throw ZeroNorm("cosine_score operand");
  return std::clamp(dot / (std::sqrt(na) * std::sqrt(nb)), -1.0, 1.0);
}

std::vector<double> enroll_model(
    const std::vector<std::vector<double>>& embeddings) {
  if (embeddings.empty()) throw EmptyEnrollment("no enrollment utterances");
  const size_t d = embeddings.front().size();
  std::vector<double> mean(d, 0.0);
  for (const auto& e : embeddings) {
    if (e.size() != d) throw ShapeMismatch("enrollment dimensions differ");
    double norm = 0.0;
    for (double x : e) norm += x * x;
    if (norm == 0.0) throw ZeroNorm("enrollment embedding");
    norm = std::sqrt(norm);
    for (size_t i = 0; i < d; ++i) mean[i] += e[i] / norm;
  }
  double norm = 0.0;
  for (double x : mean) norm += x * x;
  if (norm == 0.0) throw ZeroNorm("enrollment mean cancelled to zero");
  norm = std::sqrt(norm);
  for (double& x : mean) x /= norm;
  return mean;
}

}  // namespace slidkit
