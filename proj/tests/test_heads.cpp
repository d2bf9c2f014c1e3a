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

#include "slidkit/heads.hpp"

#include <cmath>
#include <functional>
#include <numeric>
#include <vector>

#include "testing.hpp"

using namespace slidkit;

namespace {

Matrix random_cos(int n, int c, Rng* rng, double lo = -0.95, double hi = 0.95) {
  Matrix m = make_matrix(n, c);
  for (double& v : m.data) v = rng->uniform(lo, hi);
  return m;
}

std::vector<int> random_labels(int n, int c, Rng* rng) {
  std::vector<int> y(static_cast<size_t>(n));
  for (int& v : y) v = rng->uniform_int(c);
  return y;
}

// Central finite differences of a scalar function of the cosine matrix.
Matrix fd_grad_cos(const Matrix& at,
                   const std::function<double(const Matrix&)>& f, double h) {
  Matrix g = at.zeros_like();
  for (int64_t i = 0; i < at.numel(); ++i) {
    Matrix plus = at, minus = at;
    plus.data[i] += h;
    minus.data[i] -= h;
    g.data[i] = (f(plus) - f(minus)) / (2.0 * h);
  }
  return g;
}

void check_grad_close(const Matrix& analytic, const Matrix& numeric,
                      double rel_tol) {
  for (int64_t i = 0; i < analytic.numel(); ++i) {
    const double a = analytic.data[i], b = numeric.data[i];
    const double scale = std::max({1e-8, std::abs(a), std::abs(b)});
    CHECK(std::abs(a - b) / scale < rel_tol);
  }
}

void test_cosine_logits_trivial() {
  ClassPrototypes protos;
  protos.weights = make_matrix(2, 3);
  protos.weights.at(0, 0) = 2.0;  // scale must not matter
  protos.weights.at(1, 1) = -0.5;
  Matrix emb = make_matrix(2, 3);
  emb.at(0, 0) = 1.0;             // parallel to prototype 0
  emb.at(1, 2) = 3.0;             // orthogonal to both
  const Matrix cos = cosine_logits(emb, protos);
  CHECK_CLOSE(cos.at(0, 0), 1.0, 1e-12);
  CHECK_CLOSE(cos.at(0, 1), 0.0, 1e-9);
  CHECK_CLOSE(cos.at(1, 0), 0.0, 1e-9);
  CHECK_CLOSE(cos.at(1, 1), 0.0, 1e-9);
}

void test_cosine_logits_vs_naive() {
  Rng rng(17);
  Matrix emb = make_matrix(2, 3);
  ClassPrototypes protos;
  protos.weights = make_matrix(4, 3);
  for (double& v : emb.data) v = rng.uniform(-1.0, 1.0);
  for (double& v : protos.weights.data) v = rng.uniform(-1.0, 1.0);
  const Matrix cos = cosine_logits(emb, protos);
  for (int i = 0; i < 2; ++i) {
    for (int j = 0; j < 4; ++j) {
      double dot = 0.0, ne = 0.0, nw = 0.0;
      for (int k = 0; k < 3; ++k) {
        dot += emb.at(i, k) * protos.weights.at(j, k);
        ne += emb.at(i, k) * emb.at(i, k);
        nw += protos.weights.at(j, k) * protos.weights.at(j, k);
      }
      CHECK_CLOSE(cos.at(i, j), dot / std::sqrt(ne * nw), 1e-12);
      CHECK(cos.at(i, j) >= -1.0 && cos.at(i, j) <= 1.0);
    }
  }
}

void test_cosine_logits_zero_norm() {
  ClassPrototypes protos;
  protos.weights = make_matrix(2, 2);
  protos.weights.at(0, 0) = 1.0;
  protos.weights.at(1, 1) = 1.0;
  Matrix emb = make_matrix(1, 2);  // all zeros
  CHECK_THROWS(ZeroNorm, cosine_logits(emb, protos));
}

void test_ce_saturated_and_uniform() {
  Matrix cos = make_matrix(1, 2);
  cos.at(0, 0) = 1.0;
  cos.at(0, 1) = -1.0;
  const LossResult r = ce_loss(cos, {0}, 30.0);
  CHECK_CLOSE(r.loss, std::log1p(std::exp(-60.0)), 1e-15);

  Matrix uni = make_matrix(1, 5);
  uni.fill(0.3);
  const LossResult u = ce_loss(uni, {2}, 30.0);
  CHECK_CLOSE(u.loss, std::log(5.0), 1e-12);
}

void test_ce_finite_differences() {
  Rng rng(23);
  const Matrix cos = random_cos(3, 4, &rng);
  const auto labels = random_labels(3, 4, &rng);
  const LossResult r = ce_loss(cos, labels, 7.0);
  const Matrix num = fd_grad_cos(
      cos, [&](const Matrix& m) { return ce_loss(m, labels, 7.0).loss; },
      1e-6);
  check_grad_close(r.grad_cos, num, 1e-6);
}

void test_aam_reduces_to_ce_at_zero_margin() {
  Rng rng(29);
  for (int it = 0; it < 25; ++it) {
    const int n = 1 + rng.uniform_int(5), c = 2 + rng.uniform_int(6);
    const Matrix cos = random_cos(n, c, &rng);
    const auto labels = random_labels(n, c, &rng);
    MarginConfig mc;
    mc.margin_m = 0.0;
    mc.scale_s = 30.0;
    const LossResult a = aam_loss(cos, labels, mc);
    const LossResult b = ce_loss(cos, labels, 30.0);
    CHECK_CLOSE(a.loss, b.loss, 1e-12);
    for (int64_t i = 0; i < a.grad_cos.numel(); ++i) {
      CHECK_CLOSE(a.grad_cos.data[i], b.grad_cos.data[i], 1e-12);
    }
  }
}

void test_aam_hand_value() {
  Matrix cos = make_matrix(1, 2);
  cos.at(0, 0) = 1.0;
  cos.at(0, 1) = -1.0;
  MarginConfig mc;  // m = 0.2, s = 30
  const LossResult r = aam_loss(cos, {0}, mc);
  const double expect = std::log1p(std::exp(-30.0 * (std::cos(0.2) + 1.0)));
  CHECK_CLOSE(r.loss, expect, 1e-22);
  CHECK(r.loss < 1e-20);
}

void test_aam_finite_differences() {
  Rng rng(31);
  MarginConfig mc;
  const Matrix cos = random_cos(3, 5, &rng, -0.9, 0.9);
  const auto labels = random_labels(3, 5, &rng);
  const LossResult r = aam_loss(cos, labels, mc);
  const Matrix num = fd_grad_cos(
      cos, [&](const Matrix& m) { return aam_loss(m, labels, mc).loss; },
      1e-6);
  check_grad_close(r.grad_cos, num, 1e-5);
}

void test_aam_monotone_in_margin() {
  Rng rng(37);
  for (int it = 0; it < 20; ++it) {
    const int n = 1 + rng.uniform_int(4), c = 2 + rng.uniform_int(5);
    const Matrix cos = random_cos(n, c, &rng, -0.8, 0.95);
    const auto labels = random_labels(n, c, &rng);
    double prev = -1.0;
    for (double m = 0.0; m <= 0.5001; m += 0.05) {
      // keep theta + m below pi for every target entry
      bool valid = true;
      for (int i = 0; i < n; ++i) {
        if (std::acos(cos.at(i, labels[i])) + m > M_PI) valid = false;
      }
      if (!valid) break;
      MarginConfig mc;
      mc.margin_m = m;
      const double loss = aam_loss(cos, labels, mc).loss;
      CHECK(loss >= prev - 1e-12);
      prev = loss;
    }
  }
}

void test_ram_satisfied_margins_floor() {
  // every non-target beaten by more than the margin: loss = ln C exactly,
  // gradient identically zero
  Matrix cos = make_matrix(2, 4);
  for (int j = 0; j < 4; ++j) {
    cos.at(0, j) = j == 1 ? 0.9 : -0.5;
    cos.at(1, j) = j == 3 ? 0.8 : -0.7;
  }
  MarginConfig mc;  // m = 0.2
  const LossResult r = ram_loss(cos, {1, 3}, mc);
  CHECK_CLOSE(r.loss, std::log(4.0), 1e-12);
  for (double g : r.grad_cos.data) CHECK(g == 0.0);
}

void test_ram_hand_value() {
  Matrix cos = make_matrix(1, 2);
  cos.at(0, 0) = 0.5;
  cos.at(0, 1) = 0.5;
  MarginConfig mc;
  const LossResult r = ram_loss(cos, {0}, mc);
  CHECK_CLOSE(r.loss, std::log1p(std::exp(6.0)), 1e-9);
}

void test_ram_floor_is_global() {
  Rng rng(41);
  for (int it = 0; it < 50; ++it) {
    const int n = 1 + rng.uniform_int(4), c = 2 + rng.uniform_int(6);
    const Matrix cos = random_cos(n, c, &rng);
    const auto labels = random_labels(n, c, &rng);
    MarginConfig mc;
    CHECK(ram_loss(cos, labels, mc).loss >= std::log(c) - 1e-12);
  }
}

void test_ram_inactive_hinge_gradient_zero() {
  // class 2 is comfortably separated: its column gradient must vanish while
  // the hard negative (class 1) drives the update
  Matrix cos = make_matrix(1, 3);
  cos.at(0, 0) = 0.6;   // target
  cos.at(0, 1) = 0.55;  // inside the margin: active
  cos.at(0, 2) = -0.9;  // far away: inactive
  MarginConfig mc;
  const LossResult r = ram_loss(cos, {0}, mc);
  CHECK(r.grad_cos.at(0, 2) == 0.0);
  CHECK(r.grad_cos.at(0, 1) > 0.0);
  CHECK(r.grad_cos.at(0, 0) < 0.0);
  CHECK(r.loss > std::log(3.0));
}

void test_ram_finite_differences() {
  Rng rng(43);
  MarginConfig mc;
  int tested = 0;
  while (tested < 5) {
    const Matrix cos = random_cos(4, 6, &rng);
    const auto labels = random_labels(4, 6, &rng);
    // skip instances with a hinge near its boundary, where the subgradient
    // convention and finite differences legitimately disagree
    bool near_boundary = false;
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 6; ++j) {
        if (j == labels[i]) continue;
        const double u = cos.at(i, labels[i]) - cos.at(i, j) - mc.margin_m;
        if (std::abs(u) < 1e-3) near_boundary = true;
      }
    }
    if (near_boundary) continue;
    ++tested;
    const LossResult r = ram_loss(cos, labels, mc);
    const Matrix num = fd_grad_cos(
        cos, [&](const Matrix& m) { return ram_loss(m, labels, mc).loss; },
        1e-6);
    check_grad_close(r.grad_cos, num, 1e-5);
  }
}

void test_losses_permutation_equivariant() {
  Rng rng(47);
  const int n = 3, c = 5;
  const Matrix cos = random_cos(n, c, &rng);
  const auto labels = random_labels(n, c, &rng);
  std::vector<int> perm(c);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = c - 1; i > 0; --i) std::swap(perm[i], perm[rng.uniform_int(i + 1)]);

  Matrix cos_p = make_matrix(n, c);
  std::vector<int> labels_p(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) cos_p.at(i, perm[j]) = cos.at(i, j);
    labels_p[i] = perm[labels[i]];
  }

  MarginConfig mc;
  const auto heads = {
      std::function<LossResult(const Matrix&, const std::vector<int>&)>(
          [&](const Matrix& m, const std::vector<int>& y) {
            return ce_loss(m, y, mc.scale_s);
          }),
      std::function<LossResult(const Matrix&, const std::vector<int>&)>(
          [&](const Matrix& m, const std::vector<int>& y) {
            return aam_loss(m, y, mc);
          }),
      std::function<LossResult(const Matrix&, const std::vector<int>&)>(
          [&](const Matrix& m, const std::vector<int>& y) {
            return ram_loss(m, y, mc);
          })};
  for (const auto& head : heads) {
    const LossResult a = head(cos, labels);
    const LossResult b = head(cos_p, labels_p);
    CHECK_CLOSE(a.loss, b.loss, 1e-12);
    for (int i = 0; i < n; ++i) {
      for (int j = 0; j < c; ++j) {
        CHECK_CLOSE(a.grad_cos.at(i, j), b.grad_cos.at(i, perm[j]), 1e-12);
      }
    }
  }
}

void test_losses_finite_on_extremes() {
  Matrix cos = make_matrix(2, 3);
  cos.at(0, 0) = 1.0;
  cos.at(0, 1) = -1.0;
  cos.at(0, 2) = 1.0;
  cos.at(1, 0) = -1.0;
  cos.at(1, 1) = -1.0;
  cos.at(1, 2) = -1.0;
  MarginConfig mc;
  mc.scale_s = 500.0;  // would overflow exp without stabilization
  CHECK(std::isfinite(ce_loss(cos, {1, 0}, mc.scale_s).loss));
  CHECK(std::isfinite(aam_loss(cos, {1, 0}, mc).loss));
  CHECK(std::isfinite(ram_loss(cos, {1, 0}, mc).loss));
}

void test_head_backward_trivial_and_hand() {
  Matrix emb = make_matrix(1, 2);
  emb.at(0, 0) = 2.0;
  ClassPrototypes protos;
  protos.weights = make_matrix(1, 2);
  protos.weights.at(0, 1) = 3.0;

  Matrix zero = make_matrix(1, 1);
  const HeadGrads z = head_backward_to_embeddings(zero, emb, protos);
  for (double v : z.d_embeddings.data) CHECK(v == 0.0);
  for (double v : z.d_prototypes.data) CHECK(v == 0.0);

  // orthogonal pair: d cos/d e = w_hat / |e|, d cos/d w = e_hat / |w|
  Matrix g = make_matrix(1, 1);
  g.at(0, 0) = 1.5;
  const HeadGrads h = head_backward_to_embeddings(g, emb, protos);
  CHECK_CLOSE(h.d_embeddings.at(0, 0), 0.0, 1e-12);
  CHECK_CLOSE(h.d_embeddings.at(0, 1), 1.5 * 1.0 / 2.0, 1e-12);
  CHECK_CLOSE(h.d_prototypes.at(0, 0), 1.5 * 1.0 / 3.0, 1e-12);
  CHECK_CLOSE(h.d_prototypes.at(0, 1), 0.0, 1e-12);
}

void test_head_backward_finite_differences() {
  Rng rng(53);
  const int n = 3, c = 4, d = 5;
  Matrix emb = make_matrix(n, d);
  ClassPrototypes protos;
  protos.weights = make_matrix(c, d);
  for (double& v : emb.data) v = rng.uniform(0.2, 1.0);
  for (double& v : protos.weights.data) v = rng.uniform(0.2, 1.0);
  Matrix g = make_matrix(n, c);
  for (double& v : g.data) v = rng.uniform(-1.0, 1.0);

  auto total = [&](const Matrix& e, const Matrix& w) {
    ClassPrototypes p;
    p.weights = w;
    const Matrix cos = cosine_logits(e, p);
    double s = 0.0;
    for (int64_t i = 0; i < cos.numel(); ++i) s += g.data[i] * cos.data[i];
    return s;
  };

  const HeadGrads grads = head_backward_to_embeddings(g, emb, protos);
  const double h = 1e-6;
  for (int64_t i = 0; i < emb.numel(); ++i) {
    Matrix plus = emb, minus = emb;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double num =
        (total(plus, protos.weights) - total(minus, protos.weights)) / (2 * h);
    const double a = grads.d_embeddings.data[i];
    CHECK(std::abs(a - num) / std::max({1e-8, std::abs(a), std::abs(num)}) <
          1e-5);
  }
  for (int64_t i = 0; i < protos.weights.numel(); ++i) {
    Matrix plus = protos.weights, minus = protos.weights;
    plus.data[i] += h;
    minus.data[i] -= h;
    const double num = (total(emb, plus) - total(emb, minus)) / (2 * h);
    const double a = grads.d_prototypes.data[i];
    CHECK(std::abs(a - num) / std::max({1e-8, std::abs(a), std::abs(num)}) <
          1e-5);
  }
}

void test_prototype_init_range() {
  Rng rng(59);
  const ClassPrototypes p = ClassPrototypes::init(10, 16, &rng);
  const double bound = 1.0 / 4.0;
  for (double v : p.weights.data) CHECK(v >= -bound && v <= bound);
}

}  // namespace

int main() {
  RUN_TEST(test_cosine_logits_trivial);
  RUN_TEST(test_cosine_logits_vs_naive);
  RUN_TEST(test_cosine_logits_zero_norm);
  RUN_TEST(test_ce_saturated_and_uniform);
  RUN_TEST(test_ce_finite_differences);
  RUN_TEST(test_aam_reduces_to_ce_at_zero_margin);
  RUN_TEST(test_aam_hand_value);
  RUN_TEST(test_aam_finite_differences);
  RUN_TEST(test_aam_monotone_in_margin);
  RUN_TEST(test_ram_satisfied_margins_floor);
  RUN_TEST(test_ram_hand_value);
  RUN_TEST(test_ram_floor_is_global);
  RUN_TEST(test_ram_inactive_hinge_gradient_zero);
  RUN_TEST(test_ram_finite_differences);
  RUN_TEST(test_losses_permutation_equivariant);
  RUN_TEST(test_losses_finite_on_extremes);
  RUN_TEST(test_head_backward_trivial_and_hand);
  RUN_TEST(test_head_backward_finite_differences);
  RUN_TEST(test_prototype_init_range);
  return testutil::finish();
}
