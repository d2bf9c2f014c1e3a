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

#ifndef SLIDKIT_COMMON_HPP_
#define SLIDKIT_COMMON_HPP_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

namespace slidkit {

// Every failure mode gets its own exception type so callers (and tests)
// can catch precisely. All derive from Error -> std::runtime_error.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

#define SLIDKIT_DEFINE_ERROR(Name)                                 \
  struct Name : Error {                                            \
    explicit Name(const std::string& msg) : Error(#Name ": " + msg) {} \
  }

SLIDKIT_DEFINE_ERROR(NotFound);
SLIDKIT_DEFINE_ERROR(UnsupportedFormat);
SLIDKIT_DEFINE_ERROR(TooShort);
SLIDKIT_DEFINE_ERROR(ConfigError);
SLIDKIT_DEFINE_ERROR(ShapeMismatch);
SLIDKIT_DEFINE_ERROR(NonFiniteActivation);
SLIDKIT_DEFINE_ERROR(StateError);
SLIDKIT_DEFINE_ERROR(ZeroNorm);
SLIDKIT_DEFINE_ERROR(OutOfRange);
SLIDKIT_DEFINE_ERROR(NonFiniteGradient);
SLIDKIT_DEFINE_ERROR(ZeroEnergyNoise);
SLIDKIT_DEFINE_ERROR(EmptySpeech);
SLIDKIT_DEFINE_ERROR(EmptyImpulse);
SLIDKIT_DEFINE_ERROR(EmptyPool);
SLIDKIT_DEFINE_ERROR(EmptySet);
SLIDKIT_DEFINE_ERROR(EmptyClass);
SLIDKIT_DEFINE_ERROR(DegenerateLabels);
SLIDKIT_DEFINE_ERROR(NonFiniteScore);
SLIDKIT_DEFINE_ERROR(EmptyEnrollment);
SLIDKIT_DEFINE_ERROR(IoError);
SLIDKIT_DEFINE_ERROR(InfeasibleSpec);
SLIDKIT_DEFINE_ERROR(InfeasibleSplit);
SLIDKIT_DEFINE_ERROR(InfeasibleTrials);
SLIDKIT_DEFINE_ERROR(DataError);
SLIDKIT_DEFINE_ERROR(DivergenceError);
SLIDKIT_DEFINE_ERROR(UnknownLabel);
SLIDKIT_DEFINE_ERROR(MissingUtterance);
SLIDKIT_DEFINE_ERROR(CorruptCheckpoint);
SLIDKIT_DEFINE_ERROR(VersionMismatch);

#undef SLIDKIT_DEFINE_ERROR

// Deterministic random stream. mt19937_64 is fully specified by the
// standard; the distributions are hand-rolled because the std ones are
// implementation-defined and would break cross-platform reproducibility.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  uint64_t next_u64() { return engine_(); }

  // [0, 1)
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // [0, n)
  int uniform_int(int n) {
    if (n <= 0) throw OutOfRange("uniform_int needs n > 0");
    return static_cast<int>(uniform() * n) % n;
  }

  // Standard normal via Box-Muller, one cached value.
  double gauss();

  // Derives an independent stream for (parent seed, string id, salt).
  // Used to give every utterance its own reproducible stream.
  static uint64_t derive_seed(uint64_t seed, const std::string& id,
                              uint64_t salt = 0);

 private:
  std::mt19937_64 engine_;
  bool has_cached_ = false;
  double cached_ = 0.0;
};

// Splitmix64 finalizer; good enough to decorrelate derived seeds.
uint64_t mix64(uint64_t x);

// Worker count for embarrassingly parallel per-utterance work, taken from
// the SLIDKIT_WORKERS environment variable. Defaults to 1 (strict mode,
// bit-reproducible logs). Results never depend on the worker count.
int worker_count();

// Runs fn(i) for i in [0, n). Output must only depend on i.
void parallel_for(int n, int workers, const std::function<void(int)>& fn);

}  // namespace slidkit

#endif  // SLIDKIT_COMMON_HPP_
