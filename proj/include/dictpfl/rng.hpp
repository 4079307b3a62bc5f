// Copyright 2026 The dictpfl Authors
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

#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "dictpfl/errors.hpp"

namespace dictpfl {

/// SplitMix64 output function. Used to derive well-separated substream
/// seeds from (seed, domain, index) triples.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Deterministic random stream with portable, bit-reproducible output.
///
/// The engine is std::mt19937_64, whose sequence is fully specified by the
/// C++ standard. All value transforms (uniform, normal, gamma, ...) are
/// implemented here rather than with std::*_distribution, because the
/// standard leaves distribution algorithms implementation-defined and the
/// simulator promises identical draws across platforms and runs.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  /// Named substream: same (seed, domain, index) always yields the same
  /// stream, and distinct triples yield statistically independent streams.
  /// Callers tag domains with small constants (per module, per client,
  /// per round) so no two sites ever share a stream by accident.
  static Rng stream(std::uint64_t seed, std::uint64_t domain,
                    std::uint64_t index = 0) {
    std::uint64_t s = splitmix64(seed) ^ splitmix64(domain * 0x2545f4914f6cdd1dULL + 0x9e3779b97f4a7c15ULL);
    s = splitmix64(s) ^ splitmix64(index + 0x632be59bd9b4e019ULL);
    return Rng(s);
  }

  std::uint64_t next_u64() { return engine_(); }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  /// Uniform double in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw ParameterError("Rng::below: n must be positive");
    if ((n & (n - 1)) == 0) return next_u64() & (n - 1);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x;
    do {
      x = next_u64();
    } while (x >= limit);
    return x % n;
  }

  /// Standard normal via the Marsaglia polar method.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    double u, v, s;
    do {
      u = 2.0 * uniform() - 1.0;
      v = 2.0 * uniform() - 1.0;
      s = u * u + v * v;
    } while (s >= 1.0 || s == 0.0);
    const double f = std::sqrt(-2.0 * std::log(s) / s);
    spare_ = v * f;
    has_spare_ = true;
    return u * f;
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  /// Gamma(shape, 1) via Marsaglia-Tsang squeeze; shape < 1 handled with
  /// the boost trick gamma(a) = gamma(a+1) * U^(1/a).
  double gamma(double shape) {
    if (!(shape > 0.0)) throw ParameterError("Rng::gamma: shape must be positive");
    if (shape < 1.0) {
      const double u = uniform();
      if (u == 0.0) return 0.0;
      return gamma(shape + 1.0) * std::pow(u, 1.0 / shape);
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
      double x, v;
      do {
        x = normal();
        v = 1.0 + c * x;
      } while (v <= 0.0);
      v = v * v * v;
      const double u = uniform();
      if (u < 1.0 - 0.0331 * x * x * x * x) return d * v;
      if (u != 0.0 && std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v))) {
        return d * v;
      }
    }
  }

  /// Bernoulli draw; exact at p = 0 and p = 1.
  bool bernoulli(double p) {
    if (p < 0.0 || p > 1.0) {
      throw ParameterError("Rng::bernoulli: p must lie in [0, 1]");
    }
    return uniform() < p;
  }

  /// Fisher-Yates shuffle.
  template <typename Container>
  void shuffle(Container& c) {
    const std::size_t n = c.size();
    for (std::size_t i = n; i > 1; --i) {
      std::swap(c[i - 1], c[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// Stream domain tags. One per draw site; never reuse across modules.
namespace streams {
inline constexpr std::uint64_t kModelInit = 1;
inline constexpr std::uint64_t kSynthMeans = 2;
inline constexpr std::uint64_t kSynthSamples = 3;
inline constexpr std::uint64_t kPartition = 4;
inline constexpr std::uint64_t kKeygen = 5;
inline constexpr std::uint64_t kEncrypt = 6;
inline constexpr std::uint64_t kReactivation = 7;
inline constexpr std::uint64_t kCalibration = 8;
}  // namespace streams

}  // namespace dictpfl
