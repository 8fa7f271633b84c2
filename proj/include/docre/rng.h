// Copyright 2026 The docre Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DOCRE_RNG_H_
#define DOCRE_RNG_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <utility>
#include <vector>

namespace docre {

// Seeded random source. Wraps the standard 64-bit Mersenne twister and
// derives every variate from raw engine output so that streams are
// identical across standard library implementations.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) : engine_(seed) {}

  uint64_t Next() { return engine_(); }

  // Uniform in [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  // Uniform integer in [0, n); rejection sampling avoids modulo bias.
  uint64_t UniformInt(uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::UniformInt: empty range");
    const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    uint64_t x;
    do {
      x = engine_();
    } while (x >= limit);
    return x % n;
  }

  int UniformIndex(size_t n) { return static_cast<int>(UniformInt(n)); }

  bool Bernoulli(double p) { return Uniform() < p; }

  template <typename T>
  void Shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[UniformInt(i)]);
    }
  }

  // Independent child stream; used to hand out per-worker seeds.
  uint64_t DeriveSeed() { return engine_() ^ 0x9e3779b97f4a7c15ULL; }

 private:
  std::mt19937_64 engine_;
};

// Draws `count` distinct indices from [0, n) in random order.
std::vector<int> SampleWithoutReplacement(int n, int count, Rng& rng);

}  // namespace docre

#endif  // DOCRE_RNG_H_
