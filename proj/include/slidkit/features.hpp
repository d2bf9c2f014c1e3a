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

#ifndef SLIDKIT_FEATURES_HPP_
#define SLIDKIT_FEATURES_HPP_

#include <complex>
#include <string>
#include <vector>

#include "slidkit/wav.hpp"

namespace slidkit {

struct FeatureConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  int fft_size = 512;  // power of two
  int mel_bands = 64;
  double fmin_hz = 20.0;
  double fmax_hz = 7600.0;
  double log_floor = 1e-10;

  int frame_samples(int sample_rate_hz) const;
  int shift_samples(int sample_rate_hz) const;

  // Throws ConfigError when an invariant is violated
  // (fmin < fmax <= sr/2, shift <= length, fft_size >= frame, power of two).
  void validate(int sample_rate_hz) const;
};

// T x D grid of log mel energies, row per frame.
struct FeatureMatrix {
  int frames = 0;  // T
  int dims = 0;    // D
  std::vector<double> values;  // row-major T x D

  double& at(int t, int d) { return values[static_cast<size_t>(t) * dims + d]; }
  double at(int t, int d) const {
    return values[static_cast<size_t>(t) * dims + d];
  }
};

// Hann window -> magnitude spectrum (size-fft_size DFT) -> triangular mel
// filterbank on the 2595*log10(1 + f/700) scale -> ln(max(energy, floor)).
// Frame count is floor((n_samples - frame)/shift) + 1; throws TooShort when
// the input holds less than one frame.
FeatureMatrix log_mel(const Waveform& wave, const FeatureConfig& cfg);

// Per-utterance, per-dimension mean subtraction. Shape preserved.
FeatureMatrix cmvn(const FeatureMatrix& feats);

// In-place radix-2 FFT, size must be a power of two. Exposed so the test
// suite can probe it directly against a naive DFT.
void fft_radix2(std::vector<std::complex<double>>* buf);

// Triangular filterbank weights, mel_bands x (fft_size/2 + 1).
std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& cfg,
                                                int sample_rate_hz);

// Feature dump: 16-byte header (magic "LMEL", version u32, T u32, D u32),
// then row-major little-endian 32-bit floats.
void write_feature_dump(const std::string& path, const FeatureMatrix& feats);
FeatureMatrix read_feature_dump(const std::string& path);

}  // namespace slidkit

#endif  // SLIDKIT_FEATURES_HPP_
