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

#include <algorithm>
#include <cmath>

namespace slidkit {

namespace {

void check_batch(const Matrix& cos, const std::vector<int>& labels) {
  if (cos.rank() != 2) throw ShapeMismatch("cosine logits must be N x C");
  const int n = cos.dim(0), c = cos.dim(1);
  if (c < 2) throw ShapeMismatch("need at least 2 classes");
  if (static_cast<int>(labels.size()) != n) {
    throw ShapeMismatch("label count does not match batch size");
  }
  for (int y : labels) {
    if (y < 0 || y >= c) throw OutOfRange("label outside [0, C)");
  }
}

double row_norm(const Matrix& m, int row) {
  double s = 0.0;
  for (int j = 0; j < m.dim(1); ++j) s += m.at(row, j) * m.at(row, j);
  return std::sqrt(s);
}

// Scaled softmax CE on a prepared logit row (target entry already margined).
// Returns per-sample loss; fills dL/d(prepared logit) * s into grad row.
double softmax_ce_row(const std::vector<double>& z, int target, double s,
                      std::vector<double>* dz) {
  const int c = static_cast<int>(z.size());
  double zmax = z[0];
  for (int j = 1; j < c; ++j) zmax = std::max(zmax, z[j]);
  double denom = 0.0;
  for (int j = 0; j < c; ++j) denom += std::exp(s * (z[j] - zmax));
  const double log_denom = std::log(denom);
  const double loss = -(s * (z[target] - zmax) - log_denom);
  for (int j = 0; j < c; ++j) {
    const double p = std::exp(s * (z[j] - zmax)) / denom;
    (*dz)[j] = s * (p - (j == target ? 1.0 : 0.0));
  }
  return loss;
}

}  // namespace

ClassPrototypes ClassPrototypes::init(int num_classes, int dim, Rng* rng) {
  if (num_classes < 2) throw ShapeMismatch("need at least 2 classes");
  if (dim < 1) throw ShapeMismatch("embedding dim must be positive");
  ClassPrototypes p;
  p.weights = make_matrix(num_classes, dim);
  const double bound = 1.0 / std::sqrt(static_cast<double>(dim));
  for (double& w : p.weights.data) w = rng->uniform(-bound, bound);
  return p;
}

Matrix cosine_logits(const Matrix& embeddings, const ClassPrototypes& protos) {
  if (embeddings.rank() != 2 || protos.weights.rank() != 2) {
    throw ShapeMismatch("cosine_logits expects matrices");
  }
  const int n = embeddings.dim(0), d = embeddings.dim(1);
  const int c = protos.num_classes();
  if (protos.dim() != d) {
    throw ShapeMismatch("embedding dim " + std::to_string(d) +
                        " vs prototype dim " + std::to_string(protos.dim()));
  }
  std::vector<double> enorm(static_cast<size_t>(n)), wnorm(static_cast<size_t>(c));
  for (int i = 0; i < n; ++i) {
    enorm[i] = row_norm(embeddings, i);
    if (enorm[i] == 0.0) throw ZeroNorm("embedding row " + std::to_string(i));
  }
  for (int j = 0; j < c; ++j) {
    wnorm[j] = row_norm(protos.weights, j);
    if (wnorm[j] == 0.0) throw ZeroNorm("prototype row " + std::to_string(j));
  }
  Matrix cos = make_matrix(n, c);
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      double dot = 0.0;
      for (int k = 0; k < d; ++k) {
        dot += embeddings.at(i, k) * protos.weights.at(j, k);
      }
      cos.at(i, j) = std::clamp(dot / (enorm[i] * wnorm[j]), -1.0, 1.0);
    }
  }
  return cos;
}

LossResult ce_loss(const Matrix& cos, const std::vector<int>& labels,
                   double scale_s) {
  check_batch(cos, labels);
  const int n = cos.dim(0), c = cos.dim(1);
  LossResult res;
  res.grad_cos = make_matrix(n, c);
  std::vector<double> z(static_cast<size_t>(c)), dz(static_cast<size_t>(c));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) z[j] = cos.at(i, j);
    total += softmax_ce_row(z, labels[i], scale_s, &dz);
    for (int j = 0; j < c; ++j) res.grad_cos.at(i, j) = dz[j] / n;
  }
  res.loss = total / n;
  return res;
}

LossResult aam_loss(const Matrix& cos, const std::vector<int>& labels,
                    const MarginConfig& cfg) {
  check_batch(cos, labels);
  if (cfg.margin_m < 0.0 || cfg.margin_m >= M_PI / 2) {
    throw OutOfRange("AAM margin must lie in [0, pi/2)");
  }
  const int n = cos.dim(0), c = cos.dim(1);
  const double cos_m = std::cos(cfg.margin_m);
  const double sin_m = std::sin(cfg.margin_m);
  // Below this the margined cosine stops being monotone in cos(theta).
  const double flip = std::cos(M_PI - cfg.margin_m);

  LossResult res;
  res.grad_cos = make_matrix(n, c);
  std::vector<double> z(static_cast<size_t>(c)), dz(static_cast<size_t>(c));
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    const double ct = cos.at(i, y);
    double phi, dphi;  // margined target logit and d(phi)/d(cos theta)
    if (ct < flip) {
      phi = ct - cfg.margin_m * sin_m;
      dphi = 1.0;
    } else {
      const double sin_t = std::sqrt(std::max(1.0 - ct * ct, 1e-24));
      phi = ct * cos_m - sin_t * sin_m;
      dphi = cos_m + sin_m * ct / sin_t;
    }
    for (int j = 0; j < c; ++j) z[j] = cos.at(i, j);
    z[y] = phi;
    total += softmax_ce_row(z, y, cfg.scale_s, &dz);
    for (int j = 0; j < c; ++j) {
      res.grad_cos.at(i, j) = (j == y ? dz[j] * dphi : dz[j]) / n;
    }
  }
  res.loss = total / n;
  return res;
}

LossResult ram_loss(const Matrix& cos, const std::vector<int>& labels,
                    const MarginConfig& cfg) {
  check_batch(cos, labels);
  const int n = cos.dim(0), c = cos.dim(1);
  const double s = cfg.scale_s, m = cfg.margin_m;

  LossResult res;
  res.grad_cos = make_matrix(n, c);
  std::vector<double> h(static_cast<size_t>(c), 0.0);
  std::vector<bool> active(static_cast<size_t>(c), false);
  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    const int y = labels[i];
    double hmax = 0.0;  // the bare 1 in the log contributes exp(0)
    for (int j = 0; j < c; ++j) {
      if (j == y) continue;
      const double u = -s * (cos.at(i, y) - cos.at(i, j) - m);
      active[j] = u > 0.0;  // subgradient 0 on the boundary
      h[j] = std::max(0.0, u);
      hmax = std::max(hmax, h[j]);
    }
    double denom = std::exp(-hmax);  // the leading 1
    for (int j = 0; j < c; ++j) {
      if (j != y) denom += std::exp(h[j] - hmax);
    }
    total += hmax + std::log(denom);
    double dy = 0.0;
    for (int j = 0; j < c; ++j) {
      if (j == y) continue;
      const double g = std::exp(h[j] - hmax) / denom;  // dL_i/dh_j
      if (active[j]) {
        res.grad_cos.at(i, j) = g * s / n;
        dy -= g * s / n;
      }
    }
    res.grad_cos.at(i, y) = dy;
  }
  res.loss = total / n;
  return res;
}

HeadGrads head_backward_to_embeddings(const Matrix& grad_cos,
                                      const Matrix& embeddings,
                                      const ClassPrototypes& protos) {
  const int n = embeddings.dim(0), d = embeddings.dim(1);
  const int c = protos.num_classes();
  if (grad_cos.rank() != 2 || grad_cos.dim(0) != n || grad_cos.dim(1) != c ||
      protos.dim() != d) {
    throw StateError("grad_cos does not match a cosine_logits call");
  }
  std::vector<double> enorm(static_cast<size_t>(n)), wnorm(static_cast<size_t>(c));
  for (int i = 0; i < n; ++i) {
    enorm[i] = row_norm(embeddings, i);
    if (enorm[i] == 0.0) throw ZeroNorm("embedding row " + std::to_string(i));
  }
  for (int j = 0; j < c; ++j) {
    wnorm[j] = row_norm(protos.weights, j);
    if (wnorm[j] == 0.0) throw ZeroNorm("prototype row " + std::to_string(j));
  }

  HeadGrads out;
  out.d_embeddings = make_matrix(n, d);
  out.d_prototypes = make_matrix(c, d);
  // d cos / d e = (w_hat - cos * e_hat) / |e|, symmetrically for w.
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < c; ++j) {
      const double g = grad_cos.at(i, j);
      if (g == 0.0) continue;
      double dot = 0.0;
      for (int k = 0; k < d; ++k) {
        dot += embeddings.at(i, k) * protos.weights.at(j, k);
      }
      const double cosv = dot / (enorm[i] * wnorm[j]);
      for (int k = 0; k < d; ++k) {
        const double eh = embeddings.at(i, k) / enorm[i];
        const double wh = protos.weights.at(j, k) / wnorm[j];
        out.d_embeddings.at(i, k) += g * (wh - cosv * eh) / enorm[i];
        out.d_prototypes.at(j, k) += g * (eh - cosv * wh) / wnorm[j];
      }
    }
  }
  return out;
}

}  // namespace slidkit
