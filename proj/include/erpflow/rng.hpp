//
// Project erpflow - Copyright 2026 the erpflow authors.
// SPDX-License-Identifier: Apache-2.0
//
#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "erpflow/hash.hpp"

namespace erpflow {

// Thin wrapper over mt19937_64 with portable draw helpers. The standard
// distributions are implementation-defined, so every draw goes through the
// functions below instead.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next_u64() { return engine_(); }

  // Unbiased integer in [0, n).
  std::uint64_t below(std::uint64_t n) {
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t v = engine_();
    while (v >= limit) v = engine_();
    return v % n;
  }

  // Uniform real in [0, 1).
  double real() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * real(); }

  bool bernoulli(double p) { return real() < p; }

  // Box-Muller; one value per call, the mate is discarded.
  double normal(double mean, double stddev);

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      std::swap(v[i - 1], v[below(i)]);
    }
  }

 private:
  std::mt19937_64 engine_;
};

// Stateless counter-based generator: the value at position `i` under key
// (seed, stream, step) never depends on any other draw. Used for dropout
// masks so a (seed, layer, step) triple always reproduces the same mask.
inline double counter_real(std::uint64_t seed, std::uint64_t stream,
                           std::uint64_t step, std::uint64_t i) {
  const std::uint64_t h = mix64(mix64(mix64(seed, stream), step), i);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

}  // namespace erpflow
