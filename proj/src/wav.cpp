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

#include "slidkit/wav.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <fstream>

#include "slidkit/common.hpp"

namespace slidkit {

namespace {

uint32_t read_u32le(const unsigned char* p) {
  return static_cast<uint32_t>(p[0]) | (static_cast<uint32_t>(p[1]) << 8) |
         (static_cast<uint32_t>(p[2]) << 16) |
         (static_cast<uint32_t>(p[3]) << 24);
}

uint16_t read_u16le(const unsigned char* p) {
  return static_cast<uint16_t>(p[0] | (p[1] << 8));
}

void put_u32le(std::string* out, uint32_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
  out->push_back(static_cast<char>((v >> 16) & 0xff));
  out->push_back(static_cast<char>((v >> 24) & 0xff));
}

void put_u16le(std::string* out, uint16_t v) {
  out->push_back(static_cast<char>(v & 0xff));
  out->push_back(static_cast<char>((v >> 8) & 0xff));
}

}  // namespace

Waveform load_wav(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path);
  std::string bytes((std::istreambuf_iterator<char>(in)),
                    std::istreambuf_iterator<char>());
  const unsigned char* p = reinterpret_cast<const unsigned char*>(bytes.data());
  const size_t n = bytes.size();
  if (n < 12 || std::memcmp(p, "RIFF", 4) != 0 ||
      std::memcmp(p + 8, "WAVE", 4) != 0) {
    throw UnsupportedFormat(path + ": not a RIFF/WAVE file");
  }

  bool have_fmt = false;
  uint16_t audio_format = 0, channels = 0, bits = 0;
  uint32_t rate = 0;
  size_t data_off = 0, data_len = 0;

  size_t off = 12;
  while (off + 8 <= n) {
    const char* id = reinterpret_cast<const char*>(p + off);
    const uint32_t len = read_u32le(p + off + 4);
    const size_t body = off + 8;
    if (body + len > n) throw UnsupportedFormat(path + ": truncated chunk");
    if (std::memcmp(id, "fmt ", 4) == 0) {
      if (len < 16) throw UnsupportedFormat(path + ": short fmt chunk");
      audio_format = read_u16le(p + body);
      channels = read_u16le(p + body + 2);
      rate = read_u32le(p + body + 4);
      bits = read_u16le(p + body + 14);
      have_fmt = true;
    } else if (std::memcmp(id, "data", 4) == 0) {
      data_off = body;
      data_len = len;
    }
    off = body + len + (len & 1);  // chunks are word-aligned
  }

  if (!have_fmt || data_off == 0) {
    throw UnsupportedFormat(path + ": missing fmt or data chunk");
  }
  if (audio_format != 1) {
    throw UnsupportedFormat(path + ": audio format " +
                            std::to_string(audio_format) + " is not PCM");
  }
  if (channels != 1) {
    throw UnsupportedFormat(path + ": " + std::to_string(channels) +
                            " channels, expected mono");
  }
  if (bits != 16) {
    throw UnsupportedFormat(path + ": " + std::to_string(bits) +
                            " bits per sample, expected 16");
  }
  if (rate != kSampleRateHz) {
    throw UnsupportedFormat(path + ": sample rate " + std::to_string(rate) +
                            " Hz, expected 16000");
  }

  const size_t count = data_len / 2;
  Waveform wave;
  wave.sample_rate_hz = kSampleRateHz;
  wave.samples.resize(count);
  for (size_t i = 0; i < count; ++i) {
    const int16_t s = static_cast<int16_t>(read_u16le(p + data_off + 2 * i));
    wave.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return wave;
}

void write_wav(const std::string& path, const Waveform& wave) {
  const uint32_t count = static_cast<uint32_t>(wave.samples.size());
  const uint32_t data_len = count * 2;

  std::string out;
  out.reserve(44 + data_len);
  out.append("RIFF");
  put_u32le(&out, 36 + data_len);
  out.append("WAVE");
  out.append("fmt ");
  put_u32le(&out, 16);
  put_u16le(&out, 1);  // PCM
  put_u16le(&out, 1);  // mono
  put_u32le(&out, static_cast<uint32_t>(wave.sample_rate_hz));
  put_u32le(&out, static_cast<uint32_t>(wave.sample_rate_hz) * 2);
  put_u16le(&out, 2);   // block align
  put_u16le(&out, 16);  // bits
  out.append("data");
  put_u32le(&out, data_len);
  for (uint32_t i = 0; i < count; ++i) {
    const double x = std::clamp(wave.samples[i], -1.0, 1.0);
    const int v = static_cast<int>(std::lrint(x * 32767.0));
    put_u16le(&out, static_cast<uint16_t>(static_cast<int16_t>(v)));
  }

  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path);
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw IoError("short write to " + path);
}

}  // namespace slidkit
