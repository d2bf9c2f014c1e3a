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

#ifndef SLIDKIT_TENSOR_HPP_
#define SLIDKIT_TENSOR_HPP_

#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include "slidkit/common.hpp"

namespace slidkit {

// Dense row-major tensor of doubles, rank 1..3. All model math runs in
// 64-bit so the finite-difference checks are meaningful; checkpoints
// convert to 32-bit on disk.
struct Tensor {
  std::vector<int> shape;
  std::vector<double> data;

  Tensor() = default;

  static Tensor zeros(std::vector<int> s) {
    Tensor t;
    int64_t n = 1;
    for (int d : s) {
      if (d <= 0) throw ShapeMismatch("nonpositive dimension");
      n *= d;
    }
    t.shape = std::move(s);
    t.data.assign(static_cast<size_t>(n), 0.0);
    return t;
  }

  static Tensor full(std::vector<int> s, double v) {
    Tensor t = zeros(std::move(s));
    for (double& x : t.data) x = v;
    return t;
  }

  int rank() const { return static_cast<int>(shape.size()); }
  int64_t numel() const { return static_cast<int64_t>(data.size()); }
  int dim(int i) const { return shape[static_cast<size_t>(i)]; }

  double& at(int i) { return data[static_cast<size_t>(i)]; }
  const double& at(int i) const { return data[static_cast<size_t>(i)]; }

  double& at(int i, int j) {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }
  const double& at(int i, int j) const {
    return data[static_cast<size_t>(i) * shape[1] + j];
  }

  double& at(int i, int j, int k) {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }
  const double& at(int i, int j, int k) const {
    return data[(static_cast<size_t>(i) * shape[1] + j) * shape[2] + k];
  }

  Tensor zeros_like() const { return zeros(shape); }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  bool all_finite() const {
    for (double x : data) {
      if (!std::isfinite(x)) return false;
    }
    return true;
  }

  void fill(double v) {
    for (double& x : data) x = v;
  }
};

inline void require_shape(const Tensor& t, const std::vector<int>& s,
                          const std::string& what) {
  if (t.shape != s) throw ShapeMismatch(what);
}

// Row-major N x C matrix view helpers used by the heads module.
using Matrix = Tensor;

inline Matrix make_matrix(int rows, int cols) {
  return Tensor::zeros({rows, cols});
}

}  // namespace slidkit

#endif  // SLIDKIT_TENSOR_HPP_
