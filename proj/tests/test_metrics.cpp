// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Quality metrics against an independent reference implementation. The frozen
// expected values below were produced by a widely used multi-scale SSIM
// implementation (float64 math, renormalized scale weights, valid-only 11x11
// Gaussian window) on deterministically generated images; the input recipe is
// testutil::stream_tensor, so the exact same pixels are reproducible here.

#include <doctest.h>

#include <cmath>

#include "llss/errors.hpp"
#include "llss/metrics.hpp"
#include "test_util.hpp"

using namespace llss;
using testutil::stream_tensor;

namespace {

// y = clip(x * 0.92 + noise * 0.08, 0, 1): a correlated pair, as produced by
// the oracle script for seeds (a, b).
TensorF correlated(const TensorF& x, const TensorF& noise) {
  TensorF y = x;
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    float v = x.v[i] * 0.92f + noise.v[i] * 0.08f;
    y.v[i] = std::min(1.0f, std::max(0.0f, v));
  }
  return y;
}

}  // namespace

TEST_CASE("psnr and mse basics") {
  TensorF a = stream_tensor<float>(40, {3, 32, 32}, 0.f, 1.f);
  CHECK(mse(a, a) == 0.0);
  CHECK(psnr(a, a) == doctest::Approx(120.0));  // floored mse

  TensorF b = a;
  for (auto& v : b.v) v += 0.1f;
  CHECK(mse(a, b) == doctest::Approx(0.01).epsilon(1e-5));
  CHECK(psnr(a, b) == doctest::Approx(20.0).epsilon(1e-5));
}

TEST_CASE("scale count tracks image size") {
  CHECK(ms_ssim_scales(256, 256) == 5);
  CHECK(ms_ssim_scales(176, 176) == 5);
  CHECK(ms_ssim_scales(160, 160) == 4);
  CHECK(ms_ssim_scales(160, 640) == 4);  // limited by the smaller side
  CHECK(ms_ssim_scales(96, 96) == 4);
  CHECK(ms_ssim_scales(64, 64) == 3);
  CHECK(ms_ssim_scales(16, 16) == 1);
}

TEST_CASE("ms-ssim agrees with the reference implementation") {
  // Independent images, 5 scales.
  {
    TensorF x = stream_tensor<float>(1, {3, 256, 256}, 0.f, 1.f);
    TensorF y = stream_tensor<float>(2, {3, 256, 256}, 0.f, 1.f);
    CHECK(ms_ssim(x, y) == doctest::Approx(0.079954862595).epsilon(1e-5));
  }
  // Correlated pairs across sizes/scale counts.
  {
    TensorF x = stream_tensor<float>(3, {3, 256, 256}, 0.f, 1.f);
    TensorF y = correlated(x, stream_tensor<float>(4, {3, 256, 256}, 0.f, 1.f));
    CHECK(ms_ssim(x, y) == doctest::Approx(0.994304120541).epsilon(1e-5));
  }
  {
    TensorF x = stream_tensor<float>(5, {3, 64, 64}, 0.f, 1.f);
    TensorF y = correlated(x, stream_tensor<float>(6, {3, 64, 64}, 0.f, 1.f));
    CHECK(ms_ssim(x, y) == doctest::Approx(0.994175970554).epsilon(1e-5));
  }
  {
    TensorF x = stream_tensor<float>(7, {3, 160, 160}, 0.f, 1.f);
    TensorF y = correlated(x, stream_tensor<float>(8, {3, 160, 160}, 0.f, 1.f));
    CHECK(ms_ssim(x, y) == doctest::Approx(0.993810892105).epsilon(1e-5));
  }
  {
    TensorF x = stream_tensor<float>(9, {3, 176, 176}, 0.f, 1.f);
    TensorF y = correlated(x, stream_tensor<float>(10, {3, 176, 176}, 0.f, 1.f));
    CHECK(ms_ssim(x, y) == doctest::Approx(0.994437515736).epsilon(1e-5));
  }
  // Single-channel input.
  {
    TensorF x = stream_tensor<float>(13, {1, 96, 96}, 0.f, 1.f);
    TensorF y = correlated(x, stream_tensor<float>(14, {1, 96, 96}, 0.f, 1.f));
    CHECK(ms_ssim(x, y) == doctest::Approx(0.993149220943).epsilon(1e-5));
  }
}

TEST_CASE("single-scale ssim agrees with the reference implementation") {
  TensorF x = stream_tensor<float>(11, {3, 64, 64}, 0.f, 1.f);
  TensorF y = correlated(x, stream_tensor<float>(12, {3, 64, 64}, 0.f, 1.f));
  CHECK(ssim(x, y) == doctest::Approx(0.992898881435).epsilon(1e-5));
}

TEST_CASE("ms-ssim identities and guards") {
  TensorF x = stream_tensor<float>(15, {3, 64, 64}, 0.f, 1.f);
  CHECK(ms_ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(ssim(x, x) == doctest::Approx(1.0).epsilon(1e-9));

  // Batched rank-4 input matches the rank-3 result.
  TensorF x4 = x, y4 = correlated(x, stream_tensor<float>(16, {3, 64, 64}, 0.f, 1.f));
  TensorF xb({1, 3, 64, 64}), yb({1, 3, 64, 64});
  xb.v = x4.v;
  yb.v = y4.v;
  CHECK(ms_ssim(xb, yb) == doctest::Approx(ms_ssim(x4, y4)).epsilon(1e-12));

  TensorF tiny = stream_tensor<float>(17, {3, 8, 8}, 0.f, 1.f);
  CHECK_THROWS_AS(ms_ssim(tiny, tiny), DataError);
  TensorF other = stream_tensor<float>(18, {3, 32, 32}, 0.f, 1.f);
  CHECK_THROWS_AS(ms_ssim(x, other), DataError);
}
