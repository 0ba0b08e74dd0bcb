// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Shared test helpers: a deterministic value stream that oracle fixtures were
// generated from, and a self-cleaning temporary directory.

#pragma once

#include <unistd.h>

#include <cstdint>
#include <filesystem>
#include <string>

#include "llss/config.hpp"
#include "llss/tensor.hpp"

namespace testutil {

// Small operating point used across tests: every channel count shrunk, shift
// pyramid at D=64/S=8, so whole-codec runs take fractions of a second.
inline llss::CodecConfig toy_config() {
  llss::CodecConfig c;
  c.feature_channels = 16;
  c.motion_ae_channels = 16;
  c.context_ae_channels = 32;
  c.hyper_channels = 32;
  c.bishift_channels = 8;
  c.bishift_group_channels = 8;
  c.bishift_cat_channels = 4;
  c.bishift_groups = 2;
  c.deform_groups = 2;
  c.base_max_disparity = 64;
  c.base_shift_stride = 8;
  return c;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// i-th value of the seeded unit stream; matches the fixture generator.
inline double stream_unit(std::uint64_t seed, std::uint64_t i) {
  return static_cast<double>(splitmix64(seed * 0x100000000ULL + i) >> 11) * 0x1.0p-53;
}

template <typename T>
llss::Tensor<T> stream_tensor(std::uint64_t seed, const std::vector<int>& shape, double lo,
                              double hi) {
  llss::Tensor<T> t(shape);
  for (std::size_t i = 0; i < t.v.size(); ++i) {
    const double u = stream_unit(seed, i) * (hi - lo) + lo;
    t.v[i] = static_cast<T>(static_cast<float>(u));
  }
  return t;
}

class TempDir {
 public:
  TempDir() {
    auto base = std::filesystem::temp_directory_path();
    for (int i = 0;; ++i) {
      path_ = base / ("llss_test_" + std::to_string(::getpid()) + "_" + std::to_string(i));
      if (std::filesystem::create_directory(path_)) break;
    }
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  std::string str() const { return path_.string(); }
  std::string sub(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

}  // namespace testutil
