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
// Small TDNN utterance encoder: a plain dilated-conv entry block, Res2-style
// multi-scale blocks gated by squeeze-excitation, concatenation of the block
// outputs into a 1x1 aggregation conv, attentive statistics pooling, and an
// affine projection to the embedding. Forward passes are pure; training
// gradients are exact reverse-mode and checked against finite differences.

#ifndef SLIDKIT_ENCODER_HPP_
#define SLIDKIT_ENCODER_HPP_

#include <string>
#include <vector>

#include "slidkit/common.hpp"
#include "slidkit/features.hpp"
#include "slidkit/tensor.hpp"

namespace slidkit {

enum class Mode { kTrain, kEval };

struct EncoderConfig {
  int input_dim = 64;
  std::vector<int> layer_channels = {128, 128, 128};
  std::vector<int> kernel_sizes = {5, 3, 3};
  std::vector<int> dilations = {1, 2, 3};
  int res2_scale = 4;
  int se_bottleneck = 32;
  int attention_hidden = 64;
  int embedding_dim = 192;

  int num_layers() const { return static_cast<int>(layer_channels.size()); }
  void validate() const;
};

// ---------------------------------------------------------------------------
// Layers. Each struct owns its parameters; forward fills a cache, backward
// consumes it and accumulates parameter gradients into a same-shaped layer.

// Dilated 1-D convolution over time with zero padding, length preserving.
struct Conv1d {
  int in_ch = 0, out_ch = 0, kernel = 1, dilation = 1;
  Tensor weight;  // out_ch x in_ch x kernel
  Tensor bias;    // out_ch

  static Conv1d make(int in_ch, int out_ch, int kernel, int dilation);
  void init(Rng* rng);
  // x: N x in_ch x T -> N x out_ch x T
  Tensor forward(const Tensor& x) const;
  // returns dx; adds weight/bias grads into *grad
  Tensor backward(const Tensor& x, const Tensor& dy, Conv1d* grad) const;
};

// Channel-wise batch normalization over (batch, time). Train mode uses the
// batch statistics; eval mode the stored running estimates.
struct BatchNorm1d {
  int ch = 0;
  double eps = 1e-5;
  Tensor gamma, beta, running_mean, running_var;

  struct Cache {
    bool train = false;
    Tensor xhat;                      // N x C x T
    std::vector<double> mu, var, invstd;
  };

  static BatchNorm1d make(int ch);
  Tensor forward(const Tensor& x, Mode mode, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& dy, BatchNorm1d* grad) const;
  // momentum update from the cached batch statistics
  void update_running(const Cache& cache, double momentum);
};

// conv -> ReLU -> batch norm (norm can be disabled).
struct TdnnLayer {
  Conv1d conv;
  BatchNorm1d norm;
  bool use_norm = true;

  struct Cache {
    Tensor input;
    Tensor conv_out;  // pre-ReLU
    BatchNorm1d::Cache bn;
  };

  static TdnnLayer make(int in_ch, int out_ch, int kernel, int dilation,
                        bool use_norm = true);
  void init(Rng* rng);
  Tensor forward(const Tensor& x, Mode mode, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& dy, TdnnLayer* grad) const;
};

// Res2-style multi-scale block. Channels split into `scale` groups: group 1
// passes through, group k >= 2 is convolved after adding the previous
// group's output. The concatenation goes through ReLU and batch norm, so
// scale = 1 degenerates to exactly a TdnnLayer with the same weights.
struct Res2Layer {
  int channels = 0, scale = 1;
  std::vector<Conv1d> convs;  // scale == 1 ? 1 conv : scale - 1 group convs
  BatchNorm1d norm;

  struct Cache {
    Tensor input;
    std::vector<Tensor> conv_in;  // input of each group conv
    Tensor pre;                   // pre-ReLU concatenation
    BatchNorm1d::Cache bn;
  };

  static Res2Layer make(int channels, int scale, int kernel, int dilation);
  void init(Rng* rng);
  Tensor forward(const Tensor& x, Mode mode, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& dy, Res2Layer* grad) const;
};

// Squeeze-excitation: mean over time, affine -> ReLU -> affine -> sigmoid,
// then each channel is scaled by its gate in (0, 1).
struct SeGate {
  int ch = 0, bottleneck = 0;
  Tensor w1, b1;  // bottleneck x ch, bottleneck
  Tensor w2, b2;  // ch x bottleneck, ch

  struct Cache {
    Tensor input;
    Matrix z;       // N x C squeeze
    Matrix pre1;    // N x B pre-ReLU
    Matrix hidden;  // N x B
    Matrix gate;    // N x C
  };

  static SeGate make(int ch, int bottleneck);
  void init(Rng* rng);
  Tensor forward(const Tensor& x, Cache* cache) const;
  Tensor backward(const Cache& cache, const Tensor& dy, SeGate* grad) const;
};

// Attentive statistics pooling: scalar frame scores via affine-tanh-affine,
// softmax over time, attention-weighted mean and std per channel,
// concatenated. Variance is clamped at eps_var before the sqrt.
struct AspPool {
  int ch = 0, hidden = 0;
  double eps_var = 1e-8;
  Tensor w1, b1;  // hidden x ch, hidden
  Tensor w2;      // hidden
  Tensor b2;      // scalar

  struct Cache {
    Tensor input;
    Tensor tanh_hidden;  // N x H x T
    Matrix alpha;        // N x T
    Matrix mu, sigma, var;  // N x C
  };

  static AspPool make(int ch, int hidden);
  void init(Rng* rng);
  // h: N x C x T -> N x 2C
  Matrix forward(const Tensor& h, Cache* cache) const;
  Tensor backward(const Cache& cache, const Matrix& dy, AspPool* grad) const;
};

struct Linear {
  int in_dim = 0, out_dim = 0;
  Tensor weight;  // out x in
  Tensor bias;    // out

  struct Cache {
    Matrix input;
  };

  static Linear make(int in_dim, int out_dim);
  void init(Rng* rng);
  Matrix forward(const Matrix& x, Cache* cache) const;
  Matrix backward(const Cache& cache, const Matrix& dy, Linear* grad) const;
};

// ---------------------------------------------------------------------------

struct EncoderParams {
  EncoderConfig cfg;
  TdnnLayer entry;
  std::vector<Res2Layer> res2_blocks;  // num_layers - 1
  std::vector<SeGate> se_gates;        // num_layers - 1
  Conv1d mfa;                          // 1x1 aggregation conv
  AspPool asp;
  Linear proj;

  // Zero-valued parameter set with the right shapes.
  static EncoderParams make(const EncoderConfig& cfg);
  // Randomly initialized (uniform fan-in scaling, unit norm scales).
  static EncoderParams init(const EncoderConfig& cfg, Rng* rng);

  EncoderParams zeros_like() const;

  // Enumerates every tensor with a stable name. `trainable` is false for
  // the batch-norm running statistics.
  void visit(const std::function<void(const std::string&, Tensor*, bool)>& fn);
  void visit(const std::function<void(const std::string&, const Tensor*, bool)>& fn) const;
};

struct EncoderCache {
  bool valid = false;
  int batch = 0;
  Tensor x0;
  TdnnLayer::Cache c_entry;
  std::vector<Res2Layer::Cache> c_res2;
  std::vector<SeGate::Cache> c_se;
  std::vector<Tensor> block_out;  // per-layer outputs feeding the concat
  Tensor mfa_pre;                 // aggregation conv output, pre-ReLU
  AspPool::Cache c_asp;
  Linear::Cache c_proj;
};

// Batched forward over same-length feature matrices; returns N x emb_dim.
// Throws NonFiniteActivation when the output contains NaN/Inf.
Matrix encoder_forward(const EncoderParams& params,
                       const std::vector<const FeatureMatrix*>& batch,
                       Mode mode, EncoderCache* cache);

// Exact reverse-mode gradients for every parameter tensor given the
// gradient w.r.t. the embeddings. Requires a train-mode forward cache.
EncoderParams encoder_backward(const EncoderParams& params,
                               const EncoderCache& cache,
                               const Matrix& d_embeddings);

// Momentum update of all batch-norm running statistics from a train cache.
void encoder_update_running_stats(EncoderParams* params,
                                  const EncoderCache& cache,
                                  double momentum = 0.1);

// Single-utterance eval-mode embedding.
std::vector<double> embed(const FeatureMatrix& feats,
                          const EncoderParams& params);

}  // namespace slidkit

#endif  // SLIDKIT_ENCODER_HPP_
