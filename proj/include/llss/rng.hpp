// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace llss {

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

// Named deterministic RNG stream. Each consumer derives its own stream from a
// global seed and a stable name, so adding or removing one consumer never
// shifts the draws seen by another. The uniform mapping is pinned here rather
// than delegated to std::uniform_real_distribution, whose output sequence is
// implementation-defined.
struct RngStream {
  std::mt19937_64 eng;

  explicit RngStream(std::uint64_t seed) : eng(seed) {}
  RngStream(std::uint64_t global_seed, std::string_view name)
      : eng(global_seed ^ fnv1a64(name)) {}

  // Uniform in [0, 1) with 53-bit resolution.
  double unit() { return static_cast<double>(eng() >> 11) * 0x1.0p-53; }

  double uniform(double a, double b) { return a + (b - a) * unit(); }

  // Uniform integer in [0, n); n > 0. Modulo bias is irrelevant at our n.
  std::uint64_t index(std::uint64_t n) { return eng() % n; }
};

}  // namespace llss
