// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Times the parallel kernels against the serial reference implementations and
// cross-checks their outputs on the same inputs.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <string>

#include "llss/kernels.hpp"
#include "llss/rng.hpp"
#include "llss/tensor.hpp"

using namespace llss;
using TensorF = Tensor<float>;

namespace {

TensorF random_tensor(const std::vector<int>& shape, RngStream& rng, float scale = 1.0f) {
  TensorF t(shape);
  for (float& v : t.v) v = static_cast<float>(rng.uniform(-scale, scale));
  return t;
}

double time_best_ms(const std::function<void()>& fn, int iters) {
  double best = 1e30;
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    fn();
    const auto t1 = std::chrono::steady_clock::now();
    best = std::min(best, std::chrono::duration<double, std::milli>(t1 - t0).count());
  }
  return best;
}

double max_abs_diff(const TensorF& a, const TensorF& b) {
  double m = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i)
    m = std::max(m, static_cast<double>(std::fabs(a.v[i] - b.v[i])));
  return m;
}

void report(const std::string& name, double ref_ms, double par_ms, double diff) {
  std::printf("%-28s ref %9.3f ms   par %9.3f ms   speedup %5.2fx   max|diff| %.3g\n",
              name.c_str(), ref_ms, par_ms, ref_ms / par_ms, diff);
}

}  // namespace

int main() {
  RngStream rng(42);
  const int iters = 3;

  {  // 3x3 convolution at feature resolution.
    const TensorF x = random_tensor({1, 64, 128, 128}, rng);
    const TensorF w = random_tensor({64, 64, 3, 3}, rng, 0.05f);
    const TensorF b = random_tensor({64}, rng, 0.05f);
    TensorF yr, yp;
    const double tr = time_best_ms([&] { yr = ref::conv2d_fwd(x, w, b, 1, 1, 1); }, iters);
    const double tp = time_best_ms([&] { yp = par::conv2d_fwd(x, w, b, 1, 1, 1); }, iters);
    report("conv2d 64ch 128x128 fwd", tr, tp, max_abs_diff(yr, yp));

    const TensorF gy = random_tensor(yr.shape, rng);
    TensorF gxr, gwr, gbr, gxp, gwp, gbp;
    const double br =
        time_best_ms([&] { ref::conv2d_bwd(x, w, gy, 1, 1, 1, &gxr, &gwr, &gbr); }, iters);
    const double bp =
        time_best_ms([&] { par::conv2d_bwd(x, w, gy, 1, 1, 1, &gxp, &gwp, &gbp); }, iters);
    report("conv2d 64ch 128x128 bwd", br, bp,
           std::max({max_abs_diff(gxr, gxp), max_abs_diff(gwr, gwp), max_abs_diff(gbr, gbp)}));
  }

  {  // Strided 5x5 analysis convolution.
    const TensorF x = random_tensor({1, 128, 64, 64}, rng);
    const TensorF w = random_tensor({128, 128, 5, 5}, rng, 0.02f);
    const TensorF b = random_tensor({128}, rng, 0.02f);
    TensorF yr, yp;
    const double tr = time_best_ms([&] { yr = ref::conv2d_fwd(x, w, b, 2, 2, 1); }, iters);
    const double tp = time_best_ms([&] { yp = par::conv2d_fwd(x, w, b, 2, 2, 1); }, iters);
    report("conv2d 128ch 5x5 s2 fwd", tr, tp, max_abs_diff(yr, yp));
  }

  {  // Strided 5x5 synthesis deconvolution.
    const TensorF x = random_tensor({1, 128, 32, 32}, rng);
    const TensorF w = random_tensor({128, 128, 5, 5}, rng, 0.02f);
    const TensorF b = random_tensor({128}, rng, 0.02f);
    TensorF yr, yp;
    const double tr = time_best_ms([&] { yr = ref::deconv2d_fwd(x, w, b, 2, 2, 1); }, iters);
    const double tp = time_best_ms([&] { yp = par::deconv2d_fwd(x, w, b, 2, 2, 1); }, iters);
    report("deconv2d 128ch 5x5 s2 fwd", tr, tp, max_abs_diff(yr, yp));

    const TensorF gy = random_tensor(yr.shape, rng);
    TensorF gxr, gwr, gbr, gxp, gwp, gbp;
    const double br =
        time_best_ms([&] { ref::deconv2d_bwd(x, w, gy, 2, 2, &gxr, &gwr, &gbr); }, iters);
    const double bp =
        time_best_ms([&] { par::deconv2d_bwd(x, w, gy, 2, 2, &gxp, &gwp, &gbp); }, iters);
    report("deconv2d 128ch 5x5 s2 bwd", br, bp,
           std::max({max_abs_diff(gxr, gxp), max_abs_diff(gwr, gwp), max_abs_diff(gbr, gbp)}));
  }

  {  // Deformable 3x3 convolution with 8 offset groups (motion compensation).
    const int groups = 8, k = 3;
    const TensorF x = random_tensor({1, 64, 64, 64}, rng);
    const TensorF off = random_tensor({1, 2 * k * k * groups, 64, 64}, rng, 2.0f);
    const TensorF w = random_tensor({64, 64, k, k}, rng, 0.05f);
    const TensorF b = random_tensor({64}, rng, 0.05f);
    TensorF yr, yp;
    const double tr = time_best_ms([&] { yr = ref::deform_conv2d_fwd(x, off, w, b, groups); },
                                   iters);
    const double tp = time_best_ms([&] { yp = par::deform_conv2d_fwd(x, off, w, b, groups); },
                                   iters);
    report("deform_conv2d 64ch fwd", tr, tp, max_abs_diff(yr, yp));
  }

  return 0;
}
