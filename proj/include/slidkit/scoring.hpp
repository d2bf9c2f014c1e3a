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

#ifndef SLIDKIT_SCORING_HPP_
#define SLIDKIT_SCORING_HPP_

#include <vector>

namespace slidkit {

// Argmax over class scores; ties break to the lowest class index.
int classify(const std::vector<double>& scores);

// <a, b> / (|a| |b|), clamped to [-1, 1].
double cosine_score(const std::vector<double>& a, const std::vector<double>& b);

// Element-wise mean of the length-normalized embeddings, renormalized to
// unit length.
std::vector<double> enroll_model(
    const std::vector<std::vector<double>>& embeddings);

}  // namespace slidkit

#endif  // SLIDKIT_SCORING_HPP_
