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
//
// Independent brute-force oracles. Everything here is deliberately naive
// (direct sums, O(n^2) sweeps) and shares no code with the library paths
// it checks.

#ifndef SLIDKIT_TESTS_ORACLES_HPP_
#define SLIDKIT_TESTS_ORACLES_HPP_

#include <algorithm>
#include <cmath>
#include <complex>
#include <vector>

#include "slidkit/metrics.hpp"

namespace oracles {

// Direct O(N^2) DFT.
inline std::vector<std::complex<double>> naive_dft(
    const std::vector<double>& x, int size) {
  std::vector<std::complex<double>> out(static_cast<size_t>(size));
  for (int k = 0; k < size; ++k) {
    std::complex<double> acc(0.0, 0.0);
    for (int n = 0; n < static_cast<int>(x.size()) && n < size; ++n) {
      const double ang = -2.0 * M_PI * k * n / size;
      acc += x[n] * std::complex<double>(std::cos(ang), std::sin(ang));
    }
    out[k] = acc;
  }
  return out;
}

// Full linear convolution, O(n*m).
inline std::vector<double> naive_convolve(const std::vector<double>& a,
                                          const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (size_t i = 0; i < a.size(); ++i) {
    for (size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

// Same-length dilated convolution with zero padding, written as the
// plainest possible quadruple loop.
inline std::vector<double> naive_conv1d_same(
    const std::vector<std::vector<double>>& x,  // [C_in][T]
    const std::vector<std::vector<std::vector<double>>>& w,  // [Co][Ci][K]
    const std::vector<double>& bias, int dilation, int co) {
  const int t_len = static_cast<int>(x[0].size());
  const int kernel = static_cast<int>(w[0][0].size());
  const int center = (kernel - 1) / 2;
  std::vector<double> y(static_cast<size_t>(t_len), bias[co]);
  for (int t = 0; t < t_len; ++t) {
    for (size_t ci = 0; ci < x.size(); ++ci) {
      for (int k = 0; k < kernel; ++k) {
        const int src = t + (k - center) * dilation;
        if (src >= 0 && src < t_len) y[t] += w[co][ci][k] * x[ci][src];
      }
    }
  }
  return y;
}

// Exhaustive threshold sweep: recount FAR/FRR from scratch at every
// candidate threshold, then the same crossing interpolation the spec
// defines. O(n^2).
inline double brute_force_eer(const std::vector<slidkit::ScoreRecord>& recs) {
  std::vector<double> thresholds;
  int n_tar = 0, n_non = 0;
  for (const auto& r : recs) {
    thresholds.push_back(r.score);
    if (r.label == slidkit::TrialLabel::kTarget) ++n_tar;
    if (r.label == slidkit::TrialLabel::kNontarget) ++n_non;
  }
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  auto rates = [&](double t, bool sentinel) {
    int fa = 0, fr = 0;
    for (const auto& r : recs) {
      const bool accept = sentinel ? false : r.score >= t;
      if (r.label == slidkit::TrialLabel::kNontarget && accept) ++fa;
      if (r.label == slidkit::TrialLabel::kTarget && !accept) ++fr;
    }
    return std::make_pair(static_cast<double>(fa) / n_non,
                          static_cast<double>(fr) / n_tar);
  };

  std::vector<std::pair<double, double>> points;
  for (double t : thresholds) points.push_back(rates(t, false));
  points.push_back(rates(0.0, true));  // accept nothing

  for (size_t k = 0; k + 1 < points.size(); ++k) {
    const double d0 = points[k].first - points[k].second;
    const double d1 = points[k + 1].first - points[k + 1].second;
    if (d0 == 0.0) return points[k].first;
    if (d0 > 0.0 && d1 <= 0.0) {
      const double lambda = d0 / (d0 - d1);
      return points[k].first + lambda * (points[k + 1].first - points[k].first);
    }
  }
  return -1.0;  // unreachable for valid inputs
}

}  // namespace oracles

#endif  // SLIDKIT_TESTS_ORACLES_HPP_
