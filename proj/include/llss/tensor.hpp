// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

namespace llss {

// Dense row-major tensor. Layout is batch x channel x height x width unless a
// caller states otherwise; rank is free for small auxiliary arrays.
template <typename T>
struct Tensor {
  std::vector<int> shape;
  std::vector<T> v;

  Tensor() = default;
  explicit Tensor(std::vector<int> s) : shape(std::move(s)), v(checked_numel(shape)) {}
  Tensor(std::vector<int> s, T fill) : shape(std::move(s)), v(checked_numel(shape), fill) {}

  static Tensor zeros(std::vector<int> s) { return Tensor(std::move(s)); }
  static Tensor full(std::vector<int> s, T val) { return Tensor(std::move(s), val); }

  static std::size_t checked_numel(const std::vector<int>& s) {
    std::size_t n = 1;
    for (int d : s) {
      if (d < 1) throw std::invalid_argument("tensor dims must be >= 1");
      n *= static_cast<std::size_t>(d);
    }
    return n;
  }

  std::int64_t numel() const { return static_cast<std::int64_t>(v.size()); }
  int rank() const { return static_cast<int>(shape.size()); }

  // Negative indices count from the back, matching common tensor APIs.
  int dim(int i) const {
    if (i < 0) i += rank();
    assert(i >= 0 && i < rank());
    return shape[static_cast<std::size_t>(i)];
  }

  bool same_shape(const Tensor& o) const { return shape == o.shape; }

  T* data() { return v.data(); }
  const T* data() const { return v.data(); }

  // 4D helpers; valid only for rank-4 tensors.
  std::int64_t idx4(int n, int c, int h, int w) const {
    return ((static_cast<std::int64_t>(n) * shape[1] + c) * shape[2] + h) * shape[3] + w;
  }
  T& at(int n, int c, int h, int w) { return v[static_cast<std::size_t>(idx4(n, c, h, w))]; }
  const T& at(int n, int c, int h, int w) const {
    return v[static_cast<std::size_t>(idx4(n, c, h, w))];
  }

  bool all_finite() const {
    for (const T& x : v)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  template <typename U>
  Tensor<U> cast() const {
    Tensor<U> out(shape);
    for (std::size_t i = 0; i < v.size(); ++i) out.v[i] = static_cast<U>(v[i]);
    return out;
  }
};

using TensorF = Tensor<float>;
using TensorD = Tensor<double>;

inline std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (i) out += ",";
    out += std::to_string(s[i]);
  }
  return out + ")";
}

}  // namespace llss
