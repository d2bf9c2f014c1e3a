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

#include "slidkit/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>

#include "slidkit/common.hpp"

namespace slidkit {

namespace {

constexpr char kDumpMagic[4] = {'L', 'M', 'E', 'L'};
constexpr uint32_t kDumpVersion = 1;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }

double mel_to_hz(double mel) {
  return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0);
}

bool is_pow2(int n) { return n > 0 && (n & (n - 1)) == 0; }

void put_u32le(std::ostream& out, uint32_t v) {
  char b[4] = {static_cast<char>(v & 0xff), static_cast<char>((v >> 8) & 0xff),
               static_cast<char>((v >> 16) & 0xff),
               static_cast<char>((v >> 24) & 0xff)};
  out.write(b, 4);
}

uint32_t get_u32le(std::istream& in) {
  unsigned char b[4];
  in.read(reinterpret_cast<char*>(b), 4);
  return static_cast<uint32_t>(b[0]) | (static_cast<uint32_t>(b[1]) << 8) |
         (static_cast<uint32_t>(b[2]) << 16) |
         (static_cast<uint32_t>(b[3]) << 24);
}

}  // namespace

int FeatureConfig::frame_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(frame_length_ms * sample_rate_hz / 1000.0));
}

int FeatureConfig::shift_samples(int sample_rate_hz) const {
  return static_cast<int>(std::lround(frame_shift_ms * sample_rate_hz / 1000.0));
}

void FeatureConfig::validate(int sample_rate_hz) const {
  if (mel_bands <= 0) throw ConfigError("mel_bands must be positive");
  if (!(fmin_hz < fmax_hz && fmax_hz <= sample_rate_hz / 2.0)) {
    throw ConfigError("need fmin < fmax <= sample_rate/2");
  }
  if (frame_shift_ms > frame_length_ms) {
    throw ConfigError("frame_shift_ms must not exceed frame_length_ms");
  }
  if (fft_size < frame_samples(sample_rate_hz)) {
    throw ConfigError("fft_size smaller than frame length");
  }
  if (!is_pow2(fft_size)) throw ConfigError("fft_size must be a power of two");
  if (log_floor <= 0.0) throw ConfigError("log_floor must be positive");
}

void fft_radix2(std::vector<std::complex<double>>* buf) {
  auto& a = *buf;
  const size_t n = a.size();
  if (!is_pow2(static_cast<int>(n))) {
    throw ConfigError("fft size must be a power of two");
  }
  // bit reversal permutation
  for (size_t i = 1, j = 0; i < n; ++i) {
    size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * M_PI / static_cast<double>(len);
    const std::complex<double> wl(std::cos(ang), std::sin(ang));
    for (size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wl;
      }
    }
  }
}

std::vector<std::vector<double>> mel_filterbank(const FeatureConfig& cfg,
                                                int sample_rate_hz) {
  const int bins = cfg.fft_size / 2 + 1;
  const double mel_lo = hz_to_mel(cfg.fmin_hz);
  const double mel_hi = hz_to_mel(cfg.fmax_hz);
  std::vector<double> edges(static_cast<size_t>(cfg.mel_bands) + 2);
  for (int i = 0; i < cfg.mel_bands + 2; ++i) {
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * i / (cfg.mel_bands + 1));
  }
  std::vector<std::vector<double>> bank(
      static_cast<size_t>(cfg.mel_bands),
      std::vector<double>(static_cast<size_t>(bins), 0.0));
  for (int m = 0; m < cfg.mel_bands; ++m) {
    const double f0 = edges[m], f1 = edges[m + 1], f2 = edges[m + 2];
    for (int k = 0; k < bins; ++k) {
      const double fk =
          static_cast<double>(k) * sample_rate_hz / cfg.fft_size;
      double w = 0.0;
      if (fk > f0 && fk < f1) {
        w = (fk - f0) / (f1 - f0);
      } else if (fk >= f1 && fk < f2) {
        w = (f2 - fk) / (f2 - f1);
      }
      bank[m][k] = w;
    }
  }
  return bank;
}

FeatureMatrix log_mel(const Waveform& wave, const FeatureConfig& cfg) {
  cfg.validate(wave.sample_rate_hz);
  const int frame = cfg.frame_samples(wave.sample_rate_hz);
  const int shift = cfg.shift_samples(wave.sample_rate_hz);
  const int n = wave.num_samples();
  if (n < frame) {
    throw TooShort("waveform has " + std::to_string(n) +
                   " samples, one frame needs " + std::to_string(frame));
  }
  const int num_frames = (n - frame) / shift + 1;
  const int bins = cfg.fft_size / 2 + 1;

  std::vector<double> window(static_cast<size_t>(frame));
  for (int i = 0; i < frame; ++i) {
    window[i] = 0.5 - 0.5 * std::cos(2.0 * M_PI * i / (frame - 1));
  }
  const auto bank = mel_filterbank(cfg, wave.sample_rate_hz);

  FeatureMatrix out;
  out.frames = num_frames;
  out.dims = cfg.mel_bands;
  out.values.assign(static_cast<size_t>(num_frames) * cfg.mel_bands, 0.0);

  std::vector<std::complex<double>> buf(static_cast<size_t>(cfg.fft_size));
  std::vector<double> mag(static_cast<size_t>(bins));
  for (int t = 0; t < num_frames; ++t) {
    const int start = t * shift;
    for (int i = 0; i < cfg.fft_size; ++i) {
      buf[i] = (i < frame)
                   ? std::complex<double>(wave.samples[start + i] * window[i], 0.0)
                   : std::complex<double>(0.0, 0.0);
    }
    fft_radix2(&buf);
    for (int k = 0; k < bins; ++k) mag[k] = std::abs(buf[k]);
    for (int m = 0; m < cfg.mel_bands; ++m) {
      double e = 0.0;
      const auto& row = bank[m];
      for (int k = 0; k < bins; ++k) e += row[k] * mag[k];
      out.at(t, m) = std::log(std::max(e, cfg.log_floor));
    }
  }
  return out;
}

FeatureMatrix cmvn(const FeatureMatrix& feats) {
  if (feats.frames < 1) throw TooShort("cmvn needs at least one frame");
  FeatureMatrix out = feats;
  for (int d = 0; d < feats.dims; ++d) {
    double mean = 0.0;
    for (int t = 0; t < feats.frames; ++t) mean += feats.at(t, d);
    mean /= feats.frames;
    for (int t = 0; t < feats.frames; ++t) out.at(t, d) -= mean;
  }
  return out;
}

void write_feature_dump(const std::string& path, const FeatureMatrix& feats) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path);
  out.write(kDumpMagic, 4);
  put_u32le(out, kDumpVersion);
  put_u32le(out, static_cast<uint32_t>(feats.frames));
  put_u32le(out, static_cast<uint32_t>(feats.dims));
  for (double v : feats.values) {
    const float f = static_cast<float>(v);
    uint32_t bits;
    std::memcpy(&bits, &f, 4);
    put_u32le(out, bits);
  }
  if (!out) throw IoError("short write to " + path);
}

FeatureMatrix read_feature_dump(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kDumpMagic, 4) != 0) {
    throw UnsupportedFormat(path + ": bad feature dump magic");
  }
  const uint32_t version = get_u32le(in);
  if (version != kDumpVersion) {
    throw UnsupportedFormat(path + ": feature dump version " +
                            std::to_string(version));
  }
  const uint32_t t = get_u32le(in);
  const uint32_t d = get_u32le(in);
  FeatureMatrix feats;
  feats.frames = static_cast<int>(t);
  feats.dims = static_cast<int>(d);
  feats.values.resize(static_cast<size_t>(t) * d);
  for (auto& v : feats.values) {
    const uint32_t bits = get_u32le(in);
    float f;
    std::memcpy(&f, &bits, 4);
    v = static_cast<double>(f);
  }
  if (!in) throw UnsupportedFormat(path + ": truncated feature dump");
  return feats;
}

}  // namespace slidkit
