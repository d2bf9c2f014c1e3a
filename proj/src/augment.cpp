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

#include "slidkit/augment.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>

namespace slidkit {

namespace {

double energy(const std::vector<double>& x) {
  double e = 0.0;
  for (double v : x) e += v * v;
  return e;
}

// Loop or randomly crop the noise to exactly n samples.
std::vector<double> fit_noise(const Waveform& noise, int n, Rng* rng) {
  const int m = noise.num_samples();
  std::vector<double> out(static_cast<size_t>(n));
  if (m >= n) {
    const int offset = (m == n) ? 0 : rng->uniform_int(m - n + 1);
    for (int i = 0; i < n; ++i) out[i] = noise.samples[offset + i];
  } else {
    for (int i = 0; i < n; ++i) out[i] = noise.samples[i % m];
  }
  return out;
}

}  // namespace

Waveform mix_noise(const Waveform& speech, const Waveform& noise,
                   double snr_db, Rng* rng) {
  if (speech.samples.empty()) throw EmptySpeech("mix_noise");
  if (noise.samples.empty() || energy(noise.samples) == 0.0) {
    throw ZeroEnergyNoise("mix_noise");
  }
  const int n = speech.num_samples();
  std::vector<double> fitted = fit_noise(noise, n, rng);
  const double e_noise = energy(fitted);
  if (e_noise == 0.0) throw ZeroEnergyNoise("cropped noise segment is silent");
  const double e_speech = energy(speech.samples);
  // alpha chosen so 10*log10(E_speech / E_scaled_noise) == snr_db exactly
  const double alpha =
      std::sqrt(e_speech / (e_noise * std::pow(10.0, snr_db / 10.0)));

  Waveform out;
  out.sample_rate_hz = speech.sample_rate_hz;
  out.samples.resize(static_cast<size_t>(n));
  double peak = 0.0;
  for (int i = 0; i < n; ++i) {
    out.samples[i] = speech.samples[i] + alpha * fitted[i];
    peak = std::max(peak, std::abs(out.samples[i]));
  }
  if (peak > 1.0) {
    for (double& v : out.samples) v /= peak;
  }
  return out;
}

Waveform apply_rir(const Waveform& speech, const Waveform& rir) {
  if (rir.samples.empty()) throw EmptyImpulse("apply_rir");
  if (speech.samples.empty()) throw EmptySpeech("apply_rir");
  const int n = speech.num_samples();
  const int m = rir.num_samples();

  Waveform out;
  out.sample_rate_hz = speech.sample_rate_hz;
  out.samples.assign(static_cast<size_t>(n), 0.0);
  for (int i = 0; i < n; ++i) {
    double acc = 0.0;
    const int kmax = std::min(i, m - 1);
    for (int k = 0; k <= kmax; ++k) {
      acc += rir.samples[k] * speech.samples[i - k];
    }
    out.samples[i] = acc;
  }

  double in_peak = 0.0, out_peak = 0.0;
  for (double v : speech.samples) in_peak = std::max(in_peak, std::abs(v));
  for (double v : out.samples) out_peak = std::max(out_peak, std::abs(v));
  if (out_peak > 0.0 && in_peak > 0.0) {
    const double g = in_peak / out_peak;
    for (double& v : out.samples) v *= g;
  }
  return out;
}

WavPool::WavPool(const std::string& dir) {
  std::vector<std::string> paths;
  for (const auto& entry : std::filesystem::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".wav") {
      paths.push_back(entry.path().string());
    }
  }
  std::sort(paths.begin(), paths.end());
  items_.reserve(paths.size());
  for (const auto& p : paths) items_.push_back(load_wav(p));
}

const Waveform& WavPool::pick(Rng* rng) const {
  if (items_.empty()) throw EmptyPool("wav pool is empty");
  return items_[static_cast<size_t>(rng->uniform_int(static_cast<int>(items_.size())))];
}

AugmentResult maybe_augment(const Waveform& speech, const AugmentConfig& cfg,
                            const WavPool& noise_pool, const WavPool& rir_pool,
                            Rng* rng) {
  if (cfg.apply_probability < 0.0 || cfg.apply_probability > 1.0) {
    throw OutOfRange("apply_probability outside [0, 1]");
  }
  if (cfg.snr_db_lo > cfg.snr_db_hi) throw OutOfRange("snr range reversed");

  AugmentResult res;
  if (cfg.apply_probability > 0.0 && noise_pool.empty() && rir_pool.empty()) {
    throw EmptyPool("augmentation enabled but both pools are empty");
  }
  // One uniform draw decides apply-or-not so the application rate is exact.
  const double u = rng->uniform();
  if (u >= cfg.apply_probability) {
    res.wave = speech;
    res.kind = AugmentKind::kNone;
    return res;
  }

  bool use_noise;
  if (noise_pool.empty()) {
    use_noise = false;
  } else if (rir_pool.empty()) {
    use_noise = true;
  } else {
    use_noise = rng->uniform_int(2) == 0;
  }

  if (use_noise) {
    const double snr = rng->uniform(cfg.snr_db_lo, cfg.snr_db_hi);
    res.wave = mix_noise(speech, noise_pool.pick(rng), snr, rng);
    res.kind = AugmentKind::kNoise;
    res.snr_db = snr;
  } else {
    res.wave = apply_rir(speech, rir_pool.pick(rng));
    res.kind = AugmentKind::kReverb;
  }
  return res;
}

}  // namespace slidkit
