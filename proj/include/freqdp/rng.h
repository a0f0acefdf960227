// Copyright 2026 The FreqDP Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FREQDP_RNG_H_
#define FREQDP_RNG_H_

#include <cstdint>
#include <random>

namespace freqdp {

// Seedable, splittable generator. The engine is std::mt19937_64 and child
// streams are seeded through std::seed_seq, both of which are fully specified
// by the standard, so a (seed, stream) pair produces the same numbers on every
// conforming implementation. Distributions are implemented here rather than
// through <random> distribution classes, whose output is implementation
// defined.
class Rng {
 public:
  explicit Rng(uint64_t seed) : Rng(seed, 0, 0) {}

  // Independent stream for (seed, a, b), e.g. (master seed, image index).
  Rng(uint64_t seed, uint64_t a, uint64_t b = 0) {
    std::seed_seq seq{
        static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32),
        static_cast<uint32_t>(a),    static_cast<uint32_t>(a >> 32),
        static_cast<uint32_t>(b),    static_cast<uint32_t>(b >> 32),
        0x46445031u};
    engine_.seed(seq);
  }

  // Child stream keyed on the next engine output and `stream`.
  Rng Split(uint64_t stream) { return Rng(engine_(), stream, 1); }

  uint64_t NextU64() { return engine_(); }

  // Uniform in [0, 1) with 53 random bits.
  double Uniform01() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform integer in [0, n). Rejection sampling, n > 0.
  uint64_t UniformInt(uint64_t n) {
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  // Standard normal via Box-Muller (one output per call).
  double Normal();

 private:
  std::mt19937_64 engine_;
};

}  // namespace freqdp

#endif  // FREQDP_RNG_H_
