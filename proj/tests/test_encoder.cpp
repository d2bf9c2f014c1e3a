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

#include <cmath>
#include <vector>

#include "oracles.hpp"
#include "testing.hpp"

using namespace slidkit;

namespace {

Tensor random_input(int n, int c, int t, Rng* rng, double amp = 1.0) {
  Tensor x = Tensor::zeros({n, c, t});
  for (double& v : x.data) v = rng->uniform(-amp, amp);
  return x;
}

EncoderConfig tiny_config() {
  EncoderConfig cfg;
  cfg.input_dim = 6;
  cfg.layer_channels = {8, 8};
  cfg.kernel_sizes = {3, 3};
  cfg.dilations = {1, 2};
  cfg.res2_scale = 2;
  cfg.se_bottleneck = 4;
  cfg.attention_hidden = 4;
  cfg.embedding_dim = 5;
  return cfg;
}

FeatureMatrix random_feats(int frames, int dims, Rng* rng) {
  FeatureMatrix f;
  f.frames = frames;
  f.dims = dims;
  f.values.resize(static_cast<size_t>(frames) * dims);
  for (auto& v : f.values) v = rng->uniform(-1.0, 1.0);
  return f;
}

void test_tdnn_identity_tap_is_relu() {
  TdnnLayer layer = TdnnLayer::make(1, 1, 1, 1, /*use_norm=*/false);
  layer.conv.weight.at(0, 0, 0) = 1.0;
  Rng rng(1);
  const Tensor x = random_input(2, 1, 7, &rng);
  TdnnLayer::Cache cache;
  const Tensor y = layer.forward(x, Mode::kTrain, &cache);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK_CLOSE(y.data[i], std::max(0.0, x.data[i]), 0.0);
  }
}

void test_conv_three_tap_by_hand() {
  Conv1d conv = Conv1d::make(1, 1, 3, 1);
  conv.weight.at(0, 0, 0) = 1.0;
  conv.weight.at(0, 0, 1) = 2.0;
  conv.weight.at(0, 0, 2) = 1.0;
  Tensor x = Tensor::zeros({1, 1, 5});
  for (int t = 0; t < 5; ++t) x.at(0, 0, t) = t + 1.0;
  const Tensor y = conv.forward(x);
  const double expect[5] = {4.0, 8.0, 12.0, 16.0, 14.0};
  for (int t = 0; t < 5; ++t) CHECK_CLOSE(y.at(0, 0, t), expect[t], 0.0);
}

void test_conv_matches_naive_loops() {
  Rng rng(2);
  Conv1d conv = Conv1d::make(3, 2, 3, 2);
  conv.init(&rng);
  for (double& v : conv.bias.data) v = rng.uniform(-0.2, 0.2);
  const Tensor x = random_input(1, 3, 9, &rng);

  std::vector<std::vector<double>> xin(3, std::vector<double>(9));
  for (int c = 0; c < 3; ++c) {
    for (int t = 0; t < 9; ++t) xin[c][t] = x.at(0, c, t);
  }
  std::vector<std::vector<std::vector<double>>> w(
      2, std::vector<std::vector<double>>(3, std::vector<double>(3)));
  for (int co = 0; co < 2; ++co) {
    for (int ci = 0; ci < 3; ++ci) {
      for (int k = 0; k < 3; ++k) w[co][ci][k] = conv.weight.at(co, ci, k);
    }
  }
  const std::vector<double> bias = {conv.bias.at(0), conv.bias.at(1)};
  const Tensor y = conv.forward(x);
  for (int co = 0; co < 2; ++co) {
    const auto ref = oracles::naive_conv1d_same(xin, w, bias, 2, co);
    for (int t = 0; t < 9; ++t) CHECK_CLOSE(y.at(0, co, t), ref[t], 1e-12);
  }
}

void test_dilation_receptive_field() {
  Rng rng(3);
  Conv1d conv = Conv1d::make(1, 1, 3, 2);
  conv.weight.at(0, 0, 0) = 0.3;
  conv.weight.at(0, 0, 1) = -0.7;
  conv.weight.at(0, 0, 2) = 0.5;
  const Tensor x = random_input(1, 1, 11, &rng);
  const Tensor base = conv.forward(x);
  for (int p = 0; p < 11; ++p) {
    Tensor probe = x;
    probe.at(0, 0, p) += 0.5;
    const Tensor y = conv.forward(probe);
    for (int t = 0; t < 11; ++t) {
      const bool reachable = (t == p) || (t == p - 2) || (t == p + 2);
      if (reachable) {
        CHECK(std::abs(y.at(0, 0, t) - base.at(0, 0, t)) > 1e-12);
      } else {
        CHECK_CLOSE(y.at(0, 0, t), base.at(0, 0, t), 0.0);
      }
    }
  }
}

void test_res2_scale_one_equals_tdnn() {
  Rng rng(4);
  Res2Layer res2 = Res2Layer::make(4, 1, 3, 2);
  res2.init(&rng);
  TdnnLayer tdnn = TdnnLayer::make(4, 4, 3, 2);
  tdnn.conv.weight = res2.convs[0].weight;
  tdnn.conv.bias = res2.convs[0].bias;

  const Tensor x = random_input(2, 4, 6, &rng);
  Res2Layer::Cache rc;
  TdnnLayer::Cache tc;
  const Tensor a = res2.forward(x, Mode::kTrain, &rc);
  const Tensor b = tdnn.forward(x, Mode::kTrain, &tc);
  for (int64_t i = 0; i < a.numel(); ++i) CHECK_CLOSE(a.data[i], b.data[i], 0.0);
}

void test_res2_zero_weights_zero_output() {
  Res2Layer res2 = Res2Layer::make(4, 2, 3, 1);  // weights default to zero
  res2.norm.gamma.fill(0.0);
  Rng rng(5);
  const Tensor x = random_input(1, 4, 5, &rng);
  Res2Layer::Cache cache;
  const Tensor y = res2.forward(x, Mode::kTrain, &cache);
  for (double v : y.data) CHECK(v == 0.0);
}

void test_res2_scale_two_vs_naive() {
  Rng rng(6);
  const int ch = 4, t_len = 4;
  Res2Layer res2 = Res2Layer::make(ch, 2, 3, 1);
  res2.init(&rng);
  for (double& v : res2.convs[0].bias.data) v = rng.uniform(-0.3, 0.3);
  for (double& v : res2.norm.gamma.data) v = rng.uniform(0.5, 1.5);
  for (double& v : res2.norm.beta.data) v = rng.uniform(-0.2, 0.2);
  const Tensor x = random_input(1, ch, t_len, &rng);
  Res2Layer::Cache cache;
  const Tensor y = res2.forward(x, Mode::kTrain, &cache);

  // independent naive reimplementation: y0 = x0, y1 = conv(x1 + y0),
  // concat, relu, batch norm over (n, t) per channel
  const int g = ch / 2;
  std::vector<std::vector<double>> group_in(g, std::vector<double>(t_len));
  for (int c = 0; c < g; ++c) {
    for (int t = 0; t < t_len; ++t) {
      group_in[c][t] = x.at(0, g + c, t) + x.at(0, c, t);
    }
  }
  std::vector<std::vector<std::vector<double>>> w(
      g, std::vector<std::vector<double>>(g, std::vector<double>(3)));
  std::vector<double> bias(static_cast<size_t>(g));
  for (int co = 0; co < g; ++co) {
    bias[co] = res2.convs[0].bias.at(co);
    for (int ci = 0; ci < g; ++ci) {
      for (int k = 0; k < 3; ++k) w[co][ci][k] = res2.convs[0].weight.at(co, ci, k);
    }
  }
  std::vector<std::vector<double>> pre(ch, std::vector<double>(t_len));
  for (int c = 0; c < g; ++c) {
    for (int t = 0; t < t_len; ++t) pre[c][t] = x.at(0, c, t);
  }
  for (int co = 0; co < g; ++co) {
    const auto row = oracles::naive_conv1d_same(group_in, w, bias, 1, co);
    for (int t = 0; t < t_len; ++t) pre[g + co][t] = row[t];
  }
  for (int c = 0; c < ch; ++c) {
    for (int t = 0; t < t_len; ++t) pre[c][t] = std::max(0.0, pre[c][t]);
  }
  for (int c = 0; c < ch; ++c) {
    double mu = 0.0;
    for (int t = 0; t < t_len; ++t) mu += pre[c][t];
    mu /= t_len;
    double var = 0.0;
    for (int t = 0; t < t_len; ++t) var += (pre[c][t] - mu) * (pre[c][t] - mu);
    var /= t_len;
    for (int t = 0; t < t_len; ++t) {
      const double xhat = (pre[c][t] - mu) / std::sqrt(var + res2.norm.eps);
      const double ref = res2.norm.gamma.at(c) * xhat + res2.norm.beta.at(c);
      CHECK_CLOSE(y.at(0, c, t), ref, 1e-10);
    }
  }
}

void test_se_gate_trivials() {
  Rng rng(7);
  const Tensor x = random_input(2, 3, 5, &rng);
  SeGate se = SeGate::make(3, 2);  // all-zero excitation weights
  SeGate::Cache cache;
  const Tensor y = se.forward(x, &cache);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK_CLOSE(y.data[i], 0.5 * x.data[i], 1e-12);
  }
  SeGate open = SeGate::make(3, 2);
  open.b2.fill(30.0);  // saturate the sigmoid
  SeGate::Cache c2;
  const Tensor z = open.forward(x, &c2);
  for (int64_t i = 0; i < x.numel(); ++i) {
    CHECK_CLOSE(z.data[i], x.data[i], 1e-9);
  }
}

void test_se_gate_vs_naive_and_bounded() {
  Rng rng(8);
  const int ch = 4, bn = 3, t_len = 6;
  SeGate se = SeGate::make(ch, bn);
  se.init(&rng);
  for (double& v : se.b1.data) v = rng.uniform(-0.3, 0.3);
  for (double& v : se.b2.data) v = rng.uniform(-0.3, 0.3);
  const Tensor x = random_input(1, ch, t_len, &rng);
  SeGate::Cache cache;
  const Tensor y = se.forward(x, &cache);

  std::vector<double> squeeze(static_cast<size_t>(ch), 0.0);
  for (int c = 0; c < ch; ++c) {
    for (int t = 0; t < t_len; ++t) squeeze[c] += x.at(0, c, t);
    squeeze[c] /= t_len;
  }
  std::vector<double> hid(static_cast<size_t>(bn));
  for (int j = 0; j < bn; ++j) {
    double s = se.b1.at(j);
    for (int c = 0; c < ch; ++c) s += se.w1.at(j, c) * squeeze[c];
    hid[j] = std::max(0.0, s);
  }
  for (int c = 0; c < ch; ++c) {
    double a = se.b2.at(c);
    for (int j = 0; j < bn; ++j) a += se.w2.at(c, j) * hid[j];
    const double gate = 1.0 / (1.0 + std::exp(-a));
    CHECK(gate > 0.0 && gate < 1.0);
    for (int t = 0; t < t_len; ++t) {
      CHECK_CLOSE(y.at(0, c, t), gate * x.at(0, c, t), 1e-12);
      CHECK(std::abs(y.at(0, c, t)) <= std::abs(x.at(0, c, t)));
    }
  }
}

void test_asp_uniform_attention_is_mean_std() {
  Rng rng(9);
  const int ch = 3, t_len = 7;
  AspPool asp = AspPool::make(ch, 4);  // zero scorer -> uniform attention
  const Tensor h = random_input(2, ch, t_len, &rng);
  AspPool::Cache cache;
  const Matrix out = asp.forward(h, &cache);
  for (int b = 0; b < 2; ++b) {
    for (int c = 0; c < ch; ++c) {
      double mu = 0.0;
      for (int t = 0; t < t_len; ++t) mu += h.at(b, c, t);
      mu /= t_len;
      double var = 0.0;
      for (int t = 0; t < t_len; ++t) {
        var += (h.at(b, c, t) - mu) * (h.at(b, c, t) - mu);
      }
      var /= t_len;
      CHECK_CLOSE(out.at(b, c), mu, 1e-9);
      CHECK_CLOSE(out.at(b, ch + c), std::sqrt(var), 1e-9);
    }
  }
}

void test_asp_single_frame() {
  Rng rng(10);
  AspPool asp = AspPool::make(2, 3);
  asp.init(&rng);
  const Tensor h = random_input(1, 2, 1, &rng);
  AspPool::Cache cache;
  const Matrix out = asp.forward(h, &cache);
  CHECK_CLOSE(out.at(0, 0), h.at(0, 0, 0), 1e-12);
  CHECK_CLOSE(out.at(0, 1), h.at(0, 1, 0), 1e-12);
  CHECK_CLOSE(out.at(0, 2), 1e-4, 1e-15);  // sqrt of the variance clamp
  CHECK_CLOSE(out.at(0, 3), 1e-4, 1e-15);
}

void test_asp_hand_weighted_stats() {
  // one-channel scorer picking channel 0 gives hand-computable attention
  AspPool asp = AspPool::make(2, 1);
  asp.w1.at(0, 0) = 1.0;
  asp.w2.at(0) = 1.0;
  Tensor h = Tensor::zeros({1, 2, 3});
  const double h0[3] = {0.2, -0.4, 0.7};
  const double h1[3] = {1.0, 2.0, -1.5};
  for (int t = 0; t < 3; ++t) {
    h.at(0, 0, t) = h0[t];
    h.at(0, 1, t) = h1[t];
  }
  AspPool::Cache cache;
  const Matrix out = asp.forward(h, &cache);

  double alpha[3], denom = 0.0;
  for (int t = 0; t < 3; ++t) {
    alpha[t] = std::exp(std::tanh(h0[t]));
    denom += alpha[t];
  }
  for (int t = 0; t < 3; ++t) alpha[t] /= denom;
  for (int c = 0; c < 2; ++c) {
    const double* row = c == 0 ? h0 : h1;
    double mu = 0.0, q = 0.0;
    for (int t = 0; t < 3; ++t) {
      mu += alpha[t] * row[t];
      q += alpha[t] * row[t] * row[t];
    }
    CHECK_CLOSE(out.at(0, c), mu, 1e-12);
    CHECK_CLOSE(out.at(0, 2 + c), std::sqrt(q - mu * mu), 1e-12);
  }
}

void test_embed_deterministic_and_total() {
  Rng rng(11);
  const EncoderConfig cfg = tiny_config();
  const EncoderParams params = EncoderParams::init(cfg, &rng);
  const FeatureMatrix feats = random_feats(12, cfg.input_dim, &rng);

  const auto a = embed(feats, params);
  const auto b = embed(feats, params);
  CHECK(static_cast<int>(a.size()) == cfg.embedding_dim);
  CHECK(a == b);  // bit-identical

  FeatureMatrix longer = feats;
  longer.frames += 10;
  longer.values.resize(static_cast<size_t>(longer.frames) * longer.dims, 0.0);
  const auto c = embed(longer, params);
  for (double v : c) CHECK(std::isfinite(v));
  for (double v : a) CHECK(std::isfinite(v));
}

void test_forward_rejects_bad_shapes() {
  Rng rng(12);
  const EncoderConfig cfg = tiny_config();
  const EncoderParams params = EncoderParams::init(cfg, &rng);
  FeatureMatrix bad = random_feats(10, cfg.input_dim + 1, &rng);
  CHECK_THROWS(ShapeMismatch, embed(bad, params));

  EncoderConfig broken = cfg;
  broken.layer_channels = {8, 6};  // blocks must preserve channels
  CHECK_THROWS(ConfigError, EncoderParams::make(broken));
  broken = cfg;
  broken.res2_scale = 3;  // 8 % 3 != 0
  CHECK_THROWS(ConfigError, EncoderParams::make(broken));
}

void test_eval_uses_running_stats() {
  Rng rng(13);
  const EncoderConfig cfg = tiny_config();
  EncoderParams params = EncoderParams::init(cfg, &rng);
  const FeatureMatrix feats = random_feats(10, cfg.input_dim, &rng);

  const auto before = embed(feats, params);
  // a train-mode pass plus a running-stat update must change eval output
  std::vector<const FeatureMatrix*> batch = {&feats};
  EncoderCache cache;
  encoder_forward(params, batch, Mode::kTrain, &cache);
  encoder_update_running_stats(&params, cache, 0.5);
  const auto after = embed(feats, params);
  bool changed = false;
  for (size_t i = 0; i < before.size(); ++i) {
    if (before[i] != after[i]) changed = true;
  }
  CHECK(changed);
}

}  // namespace

int main() {
  RUN_TEST(test_tdnn_identity_tap_is_relu);
  RUN_TEST(test_conv_three_tap_by_hand);
  RUN_TEST(test_conv_matches_naive_loops);
  RUN_TEST(test_dilation_receptive_field);
  RUN_TEST(test_res2_scale_one_equals_tdnn);
  RUN_TEST(test_res2_zero_weights_zero_output);
  RUN_TEST(test_res2_scale_two_vs_naive);
  RUN_TEST(test_se_gate_trivials);
  RUN_TEST(test_se_gate_vs_naive_and_bounded);
  RUN_TEST(test_asp_uniform_attention_is_mean_std);
  RUN_TEST(test_asp_single_frame);
  RUN_TEST(test_asp_hand_weighted_stats);
  RUN_TEST(test_embed_deterministic_and_total);
  RUN_TEST(test_forward_rejects_bad_shapes);
  RUN_TEST(test_eval_uses_running_stats);
  return testutil::finish();
}
