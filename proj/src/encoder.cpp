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

#include "slidkit/encoder.hpp"

#include <algorithm>
#include <cmath>

namespace slidkit {

namespace {

void check_rank3(const Tensor& x, int ch, const char* what) {
  if (x.rank() != 3) throw ShapeMismatch(std::string(what) + ": expected N x C x T");
  if (x.dim(1) != ch) {
    throw ShapeMismatch(std::string(what) + ": got " + std::to_string(x.dim(1)) +
                        " channels, expected " + std::to_string(ch));
  }
}

// Uniform in +-sqrt(1/fan_in), the usual default for conv/affine tensors.
void init_uniform(Tensor* t, int fan_in, Rng* rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
  for (double& v : t->data) v = rng->uniform(-bound, bound);
}

}  // namespace

void EncoderConfig::validate() const {
  const size_t L = layer_channels.size();
  if (L == 0 || kernel_sizes.size() != L || dilations.size() != L) {
    throw ConfigError("layer_channels/kernel_sizes/dilations lengths differ");
  }
  if (input_dim <= 0) throw ConfigError("input_dim must be positive");
  if (embedding_dim < 1) throw ConfigError("embedding_dim must be >= 1");
  if (res2_scale < 1) throw ConfigError("res2_scale must be >= 1");
  if (se_bottleneck < 1 || attention_hidden < 1) {
    throw ConfigError("se_bottleneck and attention_hidden must be >= 1");
  }
  for (size_t i = 0; i < L; ++i) {
    if (layer_channels[i] <= 0 || kernel_sizes[i] <= 0 || dilations[i] <= 0) {
      throw ConfigError("layer sizes must be positive");
    }
    if (layer_channels[i] % res2_scale != 0) {
      throw ConfigError("layer_channels must be divisible by res2_scale");
    }
    if (i > 0 && layer_channels[i] != layer_channels[i - 1]) {
      throw ConfigError("multi-scale blocks preserve channels; "
                        "layer_channels must be constant");
    }
  }
}

// ---------------------------------------------------------------------- Conv

Conv1d Conv1d::make(int in_ch, int out_ch, int kernel, int dilation) {
  Conv1d c;
  c.in_ch = in_ch;
  c.out_ch = out_ch;
  c.kernel = kernel;
  c.dilation = dilation;
  c.weight = Tensor::zeros({out_ch, in_ch, kernel});
  c.bias = Tensor::zeros({out_ch});
  return c;
}

void Conv1d::init(Rng* rng) { init_uniform(&weight, in_ch * kernel, rng); }

Tensor Conv1d::forward(const Tensor& x) const {
  check_rank3(x, in_ch, "conv1d");
  const int n = x.dim(0), t_len = x.dim(2);
  const int center = (kernel - 1) / 2;
  Tensor y = Tensor::zeros({n, out_ch, t_len});
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < out_ch; ++co) {
      double* yrow = &y.at(b, co, 0);
      const double bv = bias.at(co);
      for (int t = 0; t < t_len; ++t) yrow[t] = bv;
      for (int ci = 0; ci < in_ch; ++ci) {
        const double* xrow = &x.at(b, ci, 0);
        for (int k = 0; k < kernel; ++k) {
          const double w = weight.at(co, ci, k);
          if (w == 0.0) continue;
          const int off = (k - center) * dilation;
          const int t0 = std::max(0, -off);
          const int t1 = std::min(t_len, t_len - off);
          for (int t = t0; t < t1; ++t) yrow[t] += w * xrow[t + off];
        }
      }
    }
  }
  return y;
}

Tensor Conv1d::backward(const Tensor& x, const Tensor& dy, Conv1d* grad) const {
  check_rank3(x, in_ch, "conv1d backward");
  check_rank3(dy, out_ch, "conv1d backward dy");
  const int n = x.dim(0), t_len = x.dim(2);
  const int center = (kernel - 1) / 2;
  Tensor dx = x.zeros_like();
  for (int b = 0; b < n; ++b) {
    for (int co = 0; co < out_ch; ++co) {
      const double* dyrow = &dy.at(b, co, 0);
      double db = 0.0;
      for (int t = 0; t < t_len; ++t) db += dyrow[t];
      grad->bias.at(co) += db;
      for (int ci = 0; ci < in_ch; ++ci) {
        const double* xrow = &x.at(b, ci, 0);
        double* dxrow = &dx.at(b, ci, 0);
        for (int k = 0; k < kernel; ++k) {
          const int off = (k - center) * dilation;
          const int t0 = std::max(0, -off);
          const int t1 = std::min(t_len, t_len - off);
          const double w = weight.at(co, ci, k);
          double dw = 0.0;
          for (int t = t0; t < t1; ++t) {
            dw += dyrow[t] * xrow[t + off];
            dxrow[t + off] += w * dyrow[t];
          }
          grad->weight.at(co, ci, k) += dw;
        }
      }
    }
  }
  return dx;
}

// ----------------------------------------------------------------- BatchNorm

BatchNorm1d BatchNorm1d::make(int ch) {
  BatchNorm1d bn;
  bn.ch = ch;
  bn.gamma = Tensor::full({ch}, 1.0);
  bn.beta = Tensor::zeros({ch});
  bn.running_mean = Tensor::zeros({ch});
  bn.running_var = Tensor::full({ch}, 1.0);
  return bn;
}

Tensor BatchNorm1d::forward(const Tensor& x, Mode mode, Cache* cache) const {
  check_rank3(x, ch, "batchnorm");
  const int n = x.dim(0), t_len = x.dim(2);
  Tensor y = x.zeros_like();
  if (mode == Mode::kEval) {
    if (cache != nullptr) cache->train = false;
    for (int c = 0; c < ch; ++c) {
      const double inv = 1.0 / std::sqrt(running_var.at(c) + eps);
      const double g = gamma.at(c), bta = beta.at(c), mu = running_mean.at(c);
      for (int b = 0; b < n; ++b) {
        const double* xr = &x.at(b, c, 0);
        double* yr = &y.at(b, c, 0);
        for (int t = 0; t < t_len; ++t) yr[t] = g * (xr[t] - mu) * inv + bta;
      }
    }
    return y;
  }

  if (cache == nullptr) throw StateError("train-mode batchnorm needs a cache");
  cache->train = true;
  cache->mu.assign(static_cast<size_t>(ch), 0.0);
  cache->var.assign(static_cast<size_t>(ch), 0.0);
  cache->invstd.assign(static_cast<size_t>(ch), 0.0);
  cache->xhat = x.zeros_like();
  const double count = static_cast<double>(n) * t_len;
  for (int c = 0; c < ch; ++c) {
    double mu = 0.0;
    for (int b = 0; b < n; ++b) {
      const double* xr = &x.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) mu += xr[t];
    }
    mu /= count;
    double var = 0.0;
    for (int b = 0; b < n; ++b) {
      const double* xr = &x.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) {
        const double d = xr[t] - mu;
        var += d * d;
      }
    }
    var /= count;
    const double inv = 1.0 / std::sqrt(var + eps);
    cache->mu[c] = mu;
    cache->var[c] = var;
    cache->invstd[c] = inv;
    const double g = gamma.at(c), bta = beta.at(c);
    for (int b = 0; b < n; ++b) {
      const double* xr = &x.at(b, c, 0);
      double* hr = &cache->xhat.at(b, c, 0);
      double* yr = &y.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) {
        hr[t] = (xr[t] - mu) * inv;
        yr[t] = g * hr[t] + bta;
      }
    }
  }
  return y;
}

Tensor BatchNorm1d::backward(const Cache& cache, const Tensor& dy,
                             BatchNorm1d* grad) const {
  if (!cache.train) throw StateError("batchnorm backward needs a train cache");
  check_rank3(dy, ch, "batchnorm backward");
  const int n = dy.dim(0), t_len = dy.dim(2);
  const double count = static_cast<double>(n) * t_len;
  Tensor dx = dy.zeros_like();
  for (int c = 0; c < ch; ++c) {
    double sum_dy = 0.0, sum_dy_xhat = 0.0;
    for (int b = 0; b < n; ++b) {
      const double* dyr = &dy.at(b, c, 0);
      const double* hr = &cache.xhat.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) {
        sum_dy += dyr[t];
        sum_dy_xhat += dyr[t] * hr[t];
      }
    }
    grad->beta.at(c) += sum_dy;
    grad->gamma.at(c) += sum_dy_xhat;
    const double g = gamma.at(c);
    const double inv = cache.invstd[c];
    const double mean_dy = sum_dy / count;
    const double mean_dy_xhat = sum_dy_xhat / count;
    for (int b = 0; b < n; ++b) {
      const double* dyr = &dy.at(b, c, 0);
      const double* hr = &cache.xhat.at(b, c, 0);
      double* dxr = &dx.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) {
        dxr[t] = g * inv * (dyr[t] - mean_dy - hr[t] * mean_dy_xhat);
      }
    }
  }
  return dx;
}

void BatchNorm1d::update_running(const Cache& cache, double momentum) {
  if (!cache.train) throw StateError("no batch statistics cached");
  for (int c = 0; c < ch; ++c) {
    running_mean.at(c) =
        (1.0 - momentum) * running_mean.at(c) + momentum * cache.mu[c];
    running_var.at(c) =
        (1.0 - momentum) * running_var.at(c) + momentum * cache.var[c];
  }
}

// ---------------------------------------------------------------- TdnnLayer

TdnnLayer TdnnLayer::make(int in_ch, int out_ch, int kernel, int dilation,
                          bool use_norm) {
  TdnnLayer l;
  l.conv = Conv1d::make(in_ch, out_ch, kernel, dilation);
  l.norm = BatchNorm1d::make(out_ch);
  l.use_norm = use_norm;
  return l;
}

void TdnnLayer::init(Rng* rng) { conv.init(rng); }

Tensor TdnnLayer::forward(const Tensor& x, Mode mode, Cache* cache) const {
  Tensor z = conv.forward(x);
  Tensor r = z.zeros_like();
  for (int64_t i = 0; i < z.numel(); ++i) r.data[i] = std::max(0.0, z.data[i]);
  if (cache != nullptr) {
    cache->input = x;
    cache->conv_out = std::move(z);
  }
  if (!use_norm) return r;
  return norm.forward(r, mode, cache != nullptr ? &cache->bn : nullptr);
}

Tensor TdnnLayer::backward(const Cache& cache, const Tensor& dy,
                           TdnnLayer* grad) const {
  Tensor d = use_norm ? norm.backward(cache.bn, dy, &grad->norm) : dy;
  for (int64_t i = 0; i < d.numel(); ++i) {
    if (cache.conv_out.data[i] <= 0.0) d.data[i] = 0.0;
  }
  return conv.backward(cache.input, d, &grad->conv);
}

// ---------------------------------------------------------------- Res2Layer

Res2Layer Res2Layer::make(int channels, int scale, int kernel, int dilation) {
  if (scale < 1 || channels % scale != 0) {
    throw ConfigError("channels must divide evenly into res2 groups");
  }
  Res2Layer l;
  l.channels = channels;
  l.scale = scale;
  l.norm = BatchNorm1d::make(channels);
  const int group = channels / scale;
  if (scale == 1) {
    l.convs.push_back(Conv1d::make(channels, channels, kernel, dilation));
  } else {
    for (int k = 1; k < scale; ++k) {
      l.convs.push_back(Conv1d::make(group, group, kernel, dilation));
    }
  }
  return l;
}

void Res2Layer::init(Rng* rng) {
  for (auto& c : convs) c.init(rng);
}

namespace {

Tensor slice_channels(const Tensor& x, int c0, int c1) {
  const int n = x.dim(0), t_len = x.dim(2);
  Tensor out = Tensor::zeros({n, c1 - c0, t_len});
  for (int b = 0; b < n; ++b) {
    for (int c = c0; c < c1; ++c) {
      const double* src = &x.at(b, c, 0);
      double* dst = &out.at(b, c - c0, 0);
      std::copy(src, src + t_len, dst);
    }
  }
  return out;
}

void paste_channels(const Tensor& part, int c0, Tensor* x) {
  const int n = part.dim(0), pc = part.dim(1), t_len = part.dim(2);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < pc; ++c) {
      const double* src = &part.at(b, c, 0);
      double* dst = &x->at(b, c0 + c, 0);
      std::copy(src, src + t_len, dst);
    }
  }
}

void add_channels(const Tensor& part, int c0, Tensor* x) {
  const int n = part.dim(0), pc = part.dim(1), t_len = part.dim(2);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < pc; ++c) {
      const double* src = &part.at(b, c, 0);
      double* dst = &x->at(b, c0 + c, 0);
      for (int t = 0; t < t_len; ++t) dst[t] += src[t];
    }
  }
}

}  // namespace

Tensor Res2Layer::forward(const Tensor& x, Mode mode, Cache* cache) const {
  check_rank3(x, channels, "res2");
  Tensor pre;
  std::vector<Tensor> conv_in;
  if (scale == 1) {
    conv_in.push_back(x);
    pre = convs[0].forward(x);
  } else {
    const int group = channels / scale;
    pre = x.zeros_like();
    Tensor prev = slice_channels(x, 0, group);  // group 1 passes through
    paste_channels(prev, 0, &pre);
    for (int k = 1; k < scale; ++k) {
      Tensor in_k = slice_channels(x, k * group, (k + 1) * group);
      for (int64_t i = 0; i < in_k.numel(); ++i) in_k.data[i] += prev.data[i];
      prev = convs[k - 1].forward(in_k);
      paste_channels(prev, k * group, &pre);
      conv_in.push_back(std::move(in_k));
    }
  }
  Tensor r = pre.zeros_like();
  for (int64_t i = 0; i < pre.numel(); ++i) {
    r.data[i] = std::max(0.0, pre.data[i]);
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->conv_in = std::move(conv_in);
    cache->pre = std::move(pre);
  }
  return norm.forward(r, mode, cache != nullptr ? &cache->bn : nullptr);
}

Tensor Res2Layer::backward(const Cache& cache, const Tensor& dy,
                           Res2Layer* grad) const {
  Tensor d = norm.backward(cache.bn, dy, &grad->norm);
  for (int64_t i = 0; i < d.numel(); ++i) {
    if (cache.pre.data[i] <= 0.0) d.data[i] = 0.0;
  }
  if (scale == 1) {
    return convs[0].backward(cache.conv_in[0], d, &grad->convs[0]);
  }
  const int group = channels / scale;
  Tensor dx = cache.input.zeros_like();
  // Walk the group chain backwards, carrying the gradient into the
  // previous group's output.
  Tensor carry;  // gradient w.r.t. y_{k-1}
  for (int k = scale - 1; k >= 1; --k) {
    Tensor dyk = slice_channels(d, k * group, (k + 1) * group);
    if (carry.numel() > 0) {
      for (int64_t i = 0; i < dyk.numel(); ++i) dyk.data[i] += carry.data[i];
    }
    carry = convs[k - 1].backward(cache.conv_in[k - 1], dyk, &grad->convs[k - 1]);
    add_channels(carry, k * group, &dx);  // d x_k
  }
  // group 1: pass-through output plus the carried-in gradient
  Tensor dy0 = slice_channels(d, 0, group);
  if (carry.numel() > 0) {
    for (int64_t i = 0; i < dy0.numel(); ++i) dy0.data[i] += carry.data[i];
  }
  add_channels(dy0, 0, &dx);
  return dx;
}

// ------------------------------------------------------------------- SeGate

SeGate SeGate::make(int ch, int bottleneck) {
  SeGate s;
  s.ch = ch;
  s.bottleneck = bottleneck;
  s.w1 = Tensor::zeros({bottleneck, ch});
  s.b1 = Tensor::zeros({bottleneck});
  s.w2 = Tensor::zeros({ch, bottleneck});
  s.b2 = Tensor::zeros({ch});
  return s;
}

void SeGate::init(Rng* rng) {
  init_uniform(&w1, ch, rng);
  init_uniform(&w2, bottleneck, rng);
}

Tensor SeGate::forward(const Tensor& x, Cache* cache) const {
  check_rank3(x, ch, "se_gate");
  const int n = x.dim(0), t_len = x.dim(2);
  Matrix z = make_matrix(n, ch);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double* xr = &x.at(b, c, 0);
      double s = 0.0;
      for (int t = 0; t < t_len; ++t) s += xr[t];
      z.at(b, c) = s / t_len;
    }
  }
  Matrix pre1 = make_matrix(n, bottleneck);
  Matrix hidden = make_matrix(n, bottleneck);
  for (int b = 0; b < n; ++b) {
    for (int j = 0; j < bottleneck; ++j) {
      double s = b1.at(j);
      for (int c = 0; c < ch; ++c) s += w1.at(j, c) * z.at(b, c);
      pre1.at(b, j) = s;
      hidden.at(b, j) = std::max(0.0, s);
    }
  }
  Matrix gate = make_matrix(n, ch);
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ch; ++c) {
      double s = b2.at(c);
      for (int j = 0; j < bottleneck; ++j) s += w2.at(c, j) * hidden.at(b, j);
      gate.at(b, c) = 1.0 / (1.0 + std::exp(-s));
    }
  }
  Tensor y = x.zeros_like();
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double g = gate.at(b, c);
      const double* xr = &x.at(b, c, 0);
      double* yr = &y.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) yr[t] = g * xr[t];
    }
  }
  if (cache != nullptr) {
    cache->input = x;
    cache->z = std::move(z);
    cache->pre1 = std::move(pre1);
    cache->hidden = std::move(hidden);
    cache->gate = std::move(gate);
  }
  return y;
}

Tensor SeGate::backward(const Cache& cache, const Tensor& dy,
                        SeGate* grad) const {
  const Tensor& x = cache.input;
  check_rank3(dy, ch, "se backward");
  const int n = x.dim(0), t_len = x.dim(2);
  Tensor dx = x.zeros_like();
  for (int b = 0; b < n; ++b) {
    // direct term and gate gradient
    std::vector<double> dgate(static_cast<size_t>(ch), 0.0);
    for (int c = 0; c < ch; ++c) {
      const double g = cache.gate.at(b, c);
      const double* xr = &x.at(b, c, 0);
      const double* dyr = &dy.at(b, c, 0);
      double* dxr = &dx.at(b, c, 0);
      double acc = 0.0;
      for (int t = 0; t < t_len; ++t) {
        acc += dyr[t] * xr[t];
        dxr[t] += g * dyr[t];
      }
      dgate[c] = acc;
    }
    std::vector<double> da(static_cast<size_t>(ch));
    for (int c = 0; c < ch; ++c) {
      const double g = cache.gate.at(b, c);
      da[c] = dgate[c] * g * (1.0 - g);
      grad->b2.at(c) += da[c];
    }
    std::vector<double> dhid(static_cast<size_t>(bottleneck), 0.0);
    for (int c = 0; c < ch; ++c) {
      for (int j = 0; j < bottleneck; ++j) {
        grad->w2.at(c, j) += da[c] * cache.hidden.at(b, j);
        dhid[j] += w2.at(c, j) * da[c];
      }
    }
    std::vector<double> dz(static_cast<size_t>(ch), 0.0);
    for (int j = 0; j < bottleneck; ++j) {
      const double dpre = cache.pre1.at(b, j) > 0.0 ? dhid[j] : 0.0;
      grad->b1.at(j) += dpre;
      for (int c = 0; c < ch; ++c) {
        grad->w1.at(j, c) += dpre * cache.z.at(b, c);
        dz[c] += w1.at(j, c) * dpre;
      }
    }
    for (int c = 0; c < ch; ++c) {
      const double add = dz[c] / t_len;
      double* dxr = &dx.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) dxr[t] += add;
    }
  }
  return dx;
}

// ------------------------------------------------------------------ AspPool

AspPool AspPool::make(int ch, int hidden) {
  AspPool a;
  a.ch = ch;
  a.hidden = hidden;
  a.w1 = Tensor::zeros({hidden, ch});
  a.b1 = Tensor::zeros({hidden});
  a.w2 = Tensor::zeros({hidden});
  a.b2 = Tensor::zeros({1});
  return a;
}

void AspPool::init(Rng* rng) {
  init_uniform(&w1, ch, rng);
  init_uniform(&w2, hidden, rng);
}

Matrix AspPool::forward(const Tensor& h, Cache* cache) const {
  check_rank3(h, ch, "asp_pool");
  const int n = h.dim(0), t_len = h.dim(2);
  if (t_len < 1) throw ShapeMismatch("asp_pool needs T >= 1");

  Tensor tanh_hidden = Tensor::zeros({n, hidden, t_len});
  Matrix alpha = make_matrix(n, t_len);
  Matrix mu = make_matrix(n, ch);
  Matrix sigma = make_matrix(n, ch);
  Matrix var = make_matrix(n, ch);
  Matrix out = make_matrix(n, 2 * ch);

  std::vector<double> scores(static_cast<size_t>(t_len));
  for (int b = 0; b < n; ++b) {
    for (int t = 0; t < t_len; ++t) {
      double u = b2.at(0);
      for (int j = 0; j < hidden; ++j) {
        double s = b1.at(j);
        for (int c = 0; c < ch; ++c) s += w1.at(j, c) * h.at(b, c, t);
        const double th = std::tanh(s);
        tanh_hidden.at(b, j, t) = th;
        u += w2.at(j) * th;
      }
      scores[t] = u;
    }
    double smax = scores[0];
    for (int t = 1; t < t_len; ++t) smax = std::max(smax, scores[t]);
    double denom = 0.0;
    for (int t = 0; t < t_len; ++t) denom += std::exp(scores[t] - smax);
    for (int t = 0; t < t_len; ++t) {
      alpha.at(b, t) = std::exp(scores[t] - smax) / denom;
    }
    for (int c = 0; c < ch; ++c) {
      double m = 0.0, q = 0.0;
      const double* hr = &h.at(b, c, 0);
      for (int t = 0; t < t_len; ++t) {
        m += alpha.at(b, t) * hr[t];
        q += alpha.at(b, t) * hr[t] * hr[t];
      }
      const double v = q - m * m;
      mu.at(b, c) = m;
      var.at(b, c) = v;
      sigma.at(b, c) = std::sqrt(std::max(v, eps_var));
      out.at(b, c) = m;
      out.at(b, ch + c) = sigma.at(b, c);
    }
  }
  if (cache != nullptr) {
    cache->input = h;
    cache->tanh_hidden = std::move(tanh_hidden);
    cache->alpha = std::move(alpha);
    cache->mu = std::move(mu);
    cache->sigma = std::move(sigma);
    cache->var = std::move(var);
  }
  return out;
}

Tensor AspPool::backward(const Cache& cache, const Matrix& dy,
                         AspPool* grad) const {
  const Tensor& h = cache.input;
  const int n = h.dim(0), t_len = h.dim(2);
  if (dy.rank() != 2 || dy.dim(0) != n || dy.dim(1) != 2 * ch) {
    throw ShapeMismatch("asp backward dy must be N x 2C");
  }
  Tensor dh = h.zeros_like();
  std::vector<double> dmu(static_cast<size_t>(ch));
  std::vector<double> dq(static_cast<size_t>(ch));
  std::vector<double> dalpha(static_cast<size_t>(t_len));
  std::vector<double> du(static_cast<size_t>(t_len));
  for (int b = 0; b < n; ++b) {
    for (int c = 0; c < ch; ++c) {
      const double g_mu = dy.at(b, c);
      const double g_sig = dy.at(b, ch + c);
      const double v = cache.var.at(b, c);
      const double dvar =
          v > eps_var ? g_sig / (2.0 * cache.sigma.at(b, c)) : 0.0;
      dq[c] = dvar;
      dmu[c] = g_mu - 2.0 * cache.mu.at(b, c) * dvar;
    }
    for (int t = 0; t < t_len; ++t) {
      double a = 0.0;
      for (int c = 0; c < ch; ++c) {
        const double hv = h.at(b, c, t);
        a += dmu[c] * hv + dq[c] * hv * hv;
      }
      dalpha[t] = a;
      for (int c = 0; c < ch; ++c) {
        const double hv = h.at(b, c, t);
        dh.at(b, c, t) +=
            cache.alpha.at(b, t) * (dmu[c] + 2.0 * dq[c] * hv);
      }
    }
    double weighted = 0.0;
    for (int t = 0; t < t_len; ++t) weighted += cache.alpha.at(b, t) * dalpha[t];
    for (int t = 0; t < t_len; ++t) {
      du[t] = cache.alpha.at(b, t) * (dalpha[t] - weighted);
    }
    for (int t = 0; t < t_len; ++t) {
      grad->b2.at(0) += du[t];
      for (int j = 0; j < hidden; ++j) {
        const double th = cache.tanh_hidden.at(b, j, t);
        grad->w2.at(j) += du[t] * th;
        const double dpre = w2.at(j) * du[t] * (1.0 - th * th);
        grad->b1.at(j) += dpre;
        for (int c = 0; c < ch; ++c) {
          grad->w1.at(j, c) += dpre * h.at(b, c, t);
          dh.at(b, c, t) += w1.at(j, c) * dpre;
        }
      }
    }
  }
  return dh;
}

// ------------------------------------------------------------------- Linear

Linear Linear::make(int in_dim, int out_dim) {
  Linear l;
  l.in_dim = in_dim;
  l.out_dim = out_dim;
  l.weight = Tensor::zeros({out_dim, in_dim});
  l.bias = Tensor::zeros({out_dim});
  return l;
}

void Linear::init(Rng* rng) { init_uniform(&weight, in_dim, rng); }

Matrix Linear::forward(const Matrix& x, Cache* cache) const {
  if (x.rank() != 2 || x.dim(1) != in_dim) {
    throw ShapeMismatch("linear input must be N x in_dim");
  }
  const int n = x.dim(0);
  Matrix y = make_matrix(n, out_dim);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      double s = bias.at(o);
      for (int i = 0; i < in_dim; ++i) s += weight.at(o, i) * x.at(b, i);
      y.at(b, o) = s;
    }
  }
  if (cache != nullptr) cache->input = x;
  return y;
}

Matrix Linear::backward(const Cache& cache, const Matrix& dy,
                        Linear* grad) const {
  const Matrix& x = cache.input;
  const int n = x.dim(0);
  if (dy.rank() != 2 || dy.dim(0) != n || dy.dim(1) != out_dim) {
    throw ShapeMismatch("linear backward dy must be N x out_dim");
  }
  Matrix dx = make_matrix(n, in_dim);
  for (int b = 0; b < n; ++b) {
    for (int o = 0; o < out_dim; ++o) {
      const double g = dy.at(b, o);
      grad->bias.at(o) += g;
      for (int i = 0; i < in_dim; ++i) {
        grad->weight.at(o, i) += g * x.at(b, i);
        dx.at(b, i) += weight.at(o, i) * g;
      }
    }
  }
  return dx;
}

// ------------------------------------------------------------ EncoderParams

EncoderParams EncoderParams::make(const EncoderConfig& cfg) {
  cfg.validate();
  EncoderParams p;
  p.cfg = cfg;
  const int L = cfg.num_layers();
  const int ch = cfg.layer_channels[0];
  p.entry = TdnnLayer::make(cfg.input_dim, ch, cfg.kernel_sizes[0],
                            cfg.dilations[0]);
  for (int i = 1; i < L; ++i) {
    p.res2_blocks.push_back(Res2Layer::make(ch, cfg.res2_scale,
                                            cfg.kernel_sizes[i],
                                            cfg.dilations[i]));
    p.se_gates.push_back(SeGate::make(ch, cfg.se_bottleneck));
  }
  p.mfa = Conv1d::make(L * ch, ch, 1, 1);
  p.asp = AspPool::make(ch, cfg.attention_hidden);
  p.proj = Linear::make(2 * ch, cfg.embedding_dim);
  return p;
}

EncoderParams EncoderParams::init(const EncoderConfig& cfg, Rng* rng) {
  EncoderParams p = make(cfg);
  p.entry.init(rng);
  for (auto& r : p.res2_blocks) r.init(rng);
  for (auto& s : p.se_gates) s.init(rng);
  p.mfa.init(rng);
  p.asp.init(rng);
  p.proj.init(rng);
  return p;
}

EncoderParams EncoderParams::zeros_like() const {
  EncoderParams p = EncoderParams::make(cfg);
  // make() seeds norm scales at one; a gradient container must be all zero
  p.visit([](const std::string&, Tensor* t, bool) { t->fill(0.0); });
  return p;
}

void EncoderParams::visit(
    const std::function<void(const std::string&, Tensor*, bool)>& fn) {
  fn("entry.conv.weight", &entry.conv.weight, true);
  fn("entry.conv.bias", &entry.conv.bias, true);
  fn("entry.norm.gamma", &entry.norm.gamma, true);
  fn("entry.norm.beta", &entry.norm.beta, true);
  fn("entry.norm.running_mean", &entry.norm.running_mean, false);
  fn("entry.norm.running_var", &entry.norm.running_var, false);
  for (size_t i = 0; i < res2_blocks.size(); ++i) {
    const std::string base = "block" + std::to_string(i + 1);
    auto& r = res2_blocks[i];
    for (size_t k = 0; k < r.convs.size(); ++k) {
      const std::string cb = base + ".res2.conv" + std::to_string(k);
      fn(cb + ".weight", &r.convs[k].weight, true);
      fn(cb + ".bias", &r.convs[k].bias, true);
    }
    fn(base + ".res2.norm.gamma", &r.norm.gamma, true);
    fn(base + ".res2.norm.beta", &r.norm.beta, true);
    fn(base + ".res2.norm.running_mean", &r.norm.running_mean, false);
    fn(base + ".res2.norm.running_var", &r.norm.running_var, false);
    auto& s = se_gates[i];
    fn(base + ".se.w1", &s.w1, true);
    fn(base + ".se.b1", &s.b1, true);
    fn(base + ".se.w2", &s.w2, true);
    fn(base + ".se.b2", &s.b2, true);
  }
  fn("mfa.weight", &mfa.weight, true);
  fn("mfa.bias", &mfa.bias, true);
  fn("asp.w1", &asp.w1, true);
  fn("asp.b1", &asp.b1, true);
  fn("asp.w2", &asp.w2, true);
  fn("asp.b2", &asp.b2, true);
  fn("proj.weight", &proj.weight, true);
  fn("proj.bias", &proj.bias, true);
}

void EncoderParams::visit(
    const std::function<void(const std::string&, const Tensor*, bool)>& fn) const {
  const_cast<EncoderParams*>(this)->visit(
      [&](const std::string& name, Tensor* t, bool trainable) {
        fn(name, t, trainable);
      });
}

// ----------------------------------------------------------------- Full net

Matrix encoder_forward(const EncoderParams& params,
                       const std::vector<const FeatureMatrix*>& batch,
                       Mode mode, EncoderCache* cache) {
  const EncoderConfig& cfg = params.cfg;
  if (batch.empty()) throw ShapeMismatch("empty batch");
  const int n = static_cast<int>(batch.size());
  const int t_len = batch[0]->frames;
  if (t_len < 1) throw ShapeMismatch("empty feature matrix");
  for (const FeatureMatrix* f : batch) {
    if (f->dims != cfg.input_dim) {
      throw ShapeMismatch("feature dim " + std::to_string(f->dims) +
                          " vs encoder input_dim " +
                          std::to_string(cfg.input_dim));
    }
    if (f->frames != t_len) {
      throw ShapeMismatch("batch feature lengths differ");
    }
  }
  EncoderCache local;
  EncoderCache* cc = cache != nullptr ? cache : &local;
  cc->valid = false;
  cc->batch = n;

  Tensor x0 = Tensor::zeros({n, cfg.input_dim, t_len});
  for (int b = 0; b < n; ++b) {
    for (int t = 0; t < t_len; ++t) {
      for (int d = 0; d < cfg.input_dim; ++d) {
        x0.at(b, d, t) = batch[b]->at(t, d);
      }
    }
  }

  const int L = cfg.num_layers();
  cc->c_res2.assign(static_cast<size_t>(L - 1), {});
  cc->c_se.assign(static_cast<size_t>(L - 1), {});
  cc->block_out.clear();
  cc->block_out.reserve(static_cast<size_t>(L));

  Tensor h = params.entry.forward(x0, mode, &cc->c_entry);
  cc->block_out.push_back(h);
  for (int i = 1; i < L; ++i) {
    Tensor r = params.res2_blocks[i - 1].forward(cc->block_out.back(), mode,
                                                 &cc->c_res2[i - 1]);
    Tensor g = params.se_gates[i - 1].forward(r, &cc->c_se[i - 1]);
    cc->block_out.push_back(std::move(g));
  }

  const int ch = cfg.layer_channels[0];
  Tensor cat = Tensor::zeros({n, L * ch, t_len});
  for (int i = 0; i < L; ++i) paste_channels(cc->block_out[i], i * ch, &cat);

  Tensor m_pre = params.mfa.forward(cat);
  Tensor m = m_pre.zeros_like();
  for (int64_t i = 0; i < m_pre.numel(); ++i) {
    m.data[i] = std::max(0.0, m_pre.data[i]);
  }
  cc->mfa_pre = std::move(m_pre);
  cc->x0 = std::move(x0);

  Matrix pooled = params.asp.forward(m, &cc->c_asp);
  Matrix emb = params.proj.forward(pooled, &cc->c_proj);
  if (!emb.all_finite()) {
    throw NonFiniteActivation("encoder produced NaN/Inf embedding");
  }
  cc->valid = mode == Mode::kTrain;
  return emb;
}

EncoderParams encoder_backward(const EncoderParams& params,
                               const EncoderCache& cache,
                               const Matrix& d_embeddings) {
  if (!cache.valid) {
    throw StateError("encoder_backward requires a train-mode forward cache");
  }
  const EncoderConfig& cfg = params.cfg;
  const int L = cfg.num_layers();
  const int ch = cfg.layer_channels[0];

  EncoderParams grads = params.zeros_like();
  Matrix d_pooled = params.proj.backward(cache.c_proj, d_embeddings, &grads.proj);
  Tensor d_m = params.asp.backward(cache.c_asp, d_pooled, &grads.asp);
  for (int64_t i = 0; i < d_m.numel(); ++i) {
    if (cache.mfa_pre.data[i] <= 0.0) d_m.data[i] = 0.0;
  }
  // The aggregation conv consumed the concatenated block outputs; rebuild
  // them from the cache for its input gradient.
  const int n = cache.batch;
  const int t_len = cache.block_out[0].dim(2);
  Tensor cat = Tensor::zeros({n, L * ch, t_len});
  for (int i = 0; i < L; ++i) paste_channels(cache.block_out[i], i * ch, &cat);
  Tensor d_cat = params.mfa.backward(cat, d_m, &grads.mfa);

  std::vector<Tensor> d_block(static_cast<size_t>(L));
  for (int i = 0; i < L; ++i) {
    d_block[i] = slice_channels(d_cat, i * ch, (i + 1) * ch);
  }
  for (int i = L - 1; i >= 1; --i) {
    Tensor d_r = params.se_gates[i - 1].backward(cache.c_se[i - 1], d_block[i],
                                                 &grads.se_gates[i - 1]);
    Tensor d_prev = params.res2_blocks[i - 1].backward(cache.c_res2[i - 1], d_r,
                                                       &grads.res2_blocks[i - 1]);
    for (int64_t k = 0; k < d_prev.numel(); ++k) {
      d_block[i - 1].data[k] += d_prev.data[k];
    }
  }
  params.entry.backward(cache.c_entry, d_block[0], &grads.entry);
  return grads;
}

void encoder_update_running_stats(EncoderParams* params,
                                  const EncoderCache& cache, double momentum) {
  if (!cache.valid) throw StateError("no train-mode cache");
  params->entry.norm.update_running(cache.c_entry.bn, momentum);
  for (size_t i = 0; i < params->res2_blocks.size(); ++i) {
    params->res2_blocks[i].norm.update_running(cache.c_res2[i].bn, momentum);
  }
}

std::vector<double> embed(const FeatureMatrix& feats,
                          const EncoderParams& params) {
  std::vector<const FeatureMatrix*> batch = {&feats};
  Matrix emb = encoder_forward(params, batch, Mode::kEval, nullptr);
  std::vector<double> out(static_cast<size_t>(emb.dim(1)));
  for (int i = 0; i < emb.dim(1); ++i) out[i] = emb.at(0, i);
  return out;
}

}  // namespace slidkit
