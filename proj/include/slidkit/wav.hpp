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

#ifndef SLIDKIT_WAV_HPP_
#define SLIDKIT_WAV_HPP_

#include <string>
#include <vector>

namespace slidkit {

constexpr int kSampleRateHz = 16000;

// Mono audio, amplitudes nominally in [-1, 1].
struct Waveform {
  std::vector<double> samples;
  int sample_rate_hz = kSampleRateHz;

  int num_samples() const { return static_cast<int>(samples.size()); }
  double duration_s() const {
    return static_cast<double>(samples.size()) / sample_rate_hz;
  }
};

// Reads a RIFF/WAVE file. Only PCM 16-bit mono 16 kHz is accepted;
// anything else raises UnsupportedFormat naming the offending property.
// Samples are scaled to [-1, 1] by dividing by 32768.
Waveform load_wav(const std::string& path);

// Writes PCM 16-bit mono 16 kHz. Amplitudes are clamped to [-1, 1] and
// quantized with round-to-nearest.
void write_wav(const std::string& path, const Waveform& wave);

}  // namespace slidkit

#endif  // SLIDKIT_WAV_HPP_
