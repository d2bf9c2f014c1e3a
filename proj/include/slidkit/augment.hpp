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

#ifndef SLIDKIT_AUGMENT_HPP_
#define SLIDKIT_AUGMENT_HPP_

#include <string>
#include <vector>

#include "slidkit/common.hpp"
#include "slidkit/wav.hpp"

namespace slidkit {

struct AugmentConfig {
  double apply_probability = 0.8;
  double snr_db_lo = 0.0;
  double snr_db_hi = 20.0;
  std::string noise_dir;  // pools of 16 kHz mono PCM16 wavs
  std::string rir_dir;
};

// Noise is looped or randomly cropped to the speech length, scaled so the
// achieved SNR equals snr_db exactly, added, and the mix is scaled down if
// its peak exceeds 1.
Waveform mix_noise(const Waveform& speech, const Waveform& noise,
                   double snr_db, Rng* rng);

// Full convolution with the impulse response, truncated to the speech
// length and renormalized to the original speech peak.
Waveform apply_rir(const Waveform& speech, const Waveform& rir);

// Preloaded directory of wav files, deterministic (sorted) order.
class WavPool {
 public:
  WavPool() = default;
  explicit WavPool(const std::string& dir);

  bool empty() const { return items_.empty(); }
  size_t size() const { return items_.size(); }
  const Waveform& pick(Rng* rng) const;

 private:
  std::vector<Waveform> items_;
};

enum class AugmentKind { kNone, kNoise, kReverb };

struct AugmentResult {
  Waveform wave;
  AugmentKind kind = AugmentKind::kNone;
  double snr_db = 0.0;  // meaningful for kNoise only
};

// With probability apply_probability picks one perturbation type uniformly
// among the nonempty pools (noise at a uniform SNR in range, or
// reverberation); otherwise passes the input through untouched. Fully
// determined by the rng state.
AugmentResult maybe_augment(const Waveform& speech, const AugmentConfig& cfg,
                            const WavPool& noise_pool, const WavPool& rir_pool,
                            Rng* rng);

}  // namespace slidkit

#endif  // SLIDKIT_AUGMENT_HPP_
