// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Central-difference gradient checks for every graph op, in double precision,
// plus forward-semantics checks for the ops whose definitions carry
// conventions (shift fill, group_dot normalization, gauss_bits formula).

#include <doctest.h>

#include <cmath>
#include <functional>
#include <vector>

#include "llss/autodiff.hpp"
#include "llss/tensor.hpp"
#include "test_util.hpp"

using llss::PadMode;
using llss::Tensor;
using GraphD = llss::Graph<double>;
using TensorD = Tensor<double>;
using testutil::stream_tensor;

namespace {

// Builds the graph over leaves made from `inputs`, reduces the root to a
// scalar, and compares every analytic input gradient against a central
// difference of the scalar output.
void check_gradients(std::vector<TensorD> inputs,
                     const std::function<int(GraphD&, const std::vector<int>&)>& build,
                     double tol = 1e-6) {
  auto eval = [&](const std::vector<TensorD>& vals) {
    GraphD g;
    std::vector<int> ids;
    for (const auto& t : vals) ids.push_back(g.leaf(t, false));
    return g.val(g.reduce_sum(build(g, ids))).v[0];
  };

  GraphD g;
  std::vector<int> ids;
  for (const auto& t : inputs) ids.push_back(g.leaf(t, true));
  g.backward(g.reduce_sum(build(g, ids)));

  for (std::size_t k = 0; k < inputs.size(); ++k) {
    const TensorD& grad = g.grad(ids[k]);
    REQUIRE(grad.numel() == inputs[k].numel());
    for (std::size_t i = 0; i < inputs[k].v.size(); ++i) {
      const double h = 1e-5 * std::max(1.0, std::fabs(inputs[k].v[i]));
      std::vector<TensorD> pert = inputs;
      pert[k].v[i] += h;
      const double f1 = eval(pert);
      pert[k].v[i] = inputs[k].v[i] - h;
      const double f2 = eval(pert);
      const double num = (f1 - f2) / (2 * h);
      const double ana = grad.v[i];
      const double denom = std::max({1e-6, std::fabs(num), std::fabs(ana)});
      CHECK_MESSAGE(std::fabs(num - ana) / denom <= tol,
                    "input ", k, " elem ", i, ": numeric ", num, " analytic ", ana);
    }
  }
}

TensorD away_from_zero(std::uint64_t seed, const std::vector<int>& shape) {
  TensorD t = stream_tensor<double>(seed, shape, -1.0, 1.0);
  for (double& v : t.v) v += (v >= 0 ? 0.15 : -0.15);
  return t;
}

}  // namespace

TEST_CASE("tensor layout and constructors") {
  TensorD t({2, 3, 4, 5});
  CHECK(t.numel() == 120);
  CHECK(t.idx4(0, 0, 0, 1) == 1);
  CHECK(t.idx4(0, 0, 1, 0) == 5);
  CHECK(t.idx4(0, 1, 0, 0) == 20);
  CHECK(t.idx4(1, 0, 0, 0) == 60);
  t.at(1, 2, 3, 4) = 7.0;
  CHECK(t.v[119] == 7.0);
  CHECK(TensorD::full({3}, 2.5).v == std::vector<double>({2.5, 2.5, 2.5}));
  CHECK(TensorD::zeros({2, 2}).numel() == 4);
}

TEST_CASE("elementwise op gradients") {
  const std::vector<int> s{1, 3, 4, 5};
  const TensorD a = stream_tensor<double>(101, s, -1, 1);
  const TensorD b = stream_tensor<double>(102, s, 0.5, 1.5);

  check_gradients({a, b}, [](GraphD& g, const std::vector<int>& id) {
    return g.add(id[0], id[1]);
  });
  check_gradients({a, b}, [](GraphD& g, const std::vector<int>& id) {
    return g.sub(id[0], id[1]);
  });
  check_gradients({a, b}, [](GraphD& g, const std::vector<int>& id) {
    return g.mul(id[0], id[1]);
  });
  check_gradients({a, b}, [](GraphD& g, const std::vector<int>& id) {
    return g.divv(id[0], id[1]);
  });
  check_gradients({a}, [](GraphD& g, const std::vector<int>& id) {
    return g.add_scalar(id[0], 0.7);
  });
  check_gradients({a}, [](GraphD& g, const std::vector<int>& id) {
    return g.mul_scalar(id[0], -1.3);
  });
  check_gradients({away_from_zero(103, s)}, [](GraphD& g, const std::vector<int>& id) {
    return g.relu(id[0]);
  });
  check_gradients({stream_tensor<double>(104, s, -2, 2)},
                  [](GraphD& g, const std::vector<int>& id) { return g.mish(id[0]); });
  check_gradients({stream_tensor<double>(105, s, 0.2, 1.5)},
                  [](GraphD& g, const std::vector<int>& id) {
                    return g.pow_scalar(id[0], 1.7);
                  });
}

TEST_CASE("structural op gradients") {
  const TensorD a = stream_tensor<double>(110, {1, 2, 3, 4}, -1, 1);
  const TensorD b = stream_tensor<double>(111, {1, 3, 3, 4}, -1, 1);

  check_gradients({a, b}, [](GraphD& g, const std::vector<int>& id) {
    const int cat = g.concat_ch({id[0], id[1]});
    return g.mul(cat, cat);  // make every channel matter nonuniformly
  });
  check_gradients({b}, [](GraphD& g, const std::vector<int>& id) {
    const int sl = g.slice_ch(id[0], 1, 3);
    return g.mul(sl, sl);
  });
  check_gradients({a}, [](GraphD& g, const std::vector<int>& id) {
    const int sh = g.shift(id[0], 2);
    return g.mul(sh, sh);
  });
  check_gradients({a, a}, [](GraphD& g, const std::vector<int>& id) {
    return g.group_dot(id[0], id[1], 2);
  });
  check_gradients({a}, [](GraphD& g, const std::vector<int>& id) {
    const int p = g.pad2d(id[0], 1, 2, 0, 1, PadMode::Zero);
    return g.mul(p, p);
  });
  check_gradients({a}, [](GraphD& g, const std::vector<int>& id) {
    const int p = g.pad2d(id[0], 2, 1, 1, 2, PadMode::Symmetric);
    return g.mul(p, p);
  });
  check_gradients({stream_tensor<double>(112, {1, 2, 4, 6}, -1, 1)},
                  [](GraphD& g, const std::vector<int>& id) {
                    const int p = g.avgpool2(id[0]);
                    return g.mul(p, p);
                  });
  check_gradients({stream_tensor<double>(113, {3}, -1, 1)},
                  [](GraphD& g, const std::vector<int>& id) {
                    const int p = g.broadcast_ch(id[0], 2, 2, 3);
                    return g.mul(p, p);
                  });
  check_gradients({a}, [](GraphD& g, const std::vector<int>& id) {
    return g.reduce_mean(g.mul(id[0], id[0]));
  });
}

TEST_CASE("convolution op gradients") {
  const TensorD x = stream_tensor<double>(120, {1, 4, 5, 6}, -1, 1);
  const TensorD w = stream_tensor<double>(121, {6, 2, 3, 3}, -0.5, 0.5);
  const TensorD bias = stream_tensor<double>(122, {6}, -0.5, 0.5);
  check_gradients({x, w, bias}, [](GraphD& g, const std::vector<int>& id) {
    const int y = g.conv2d(id[0], id[1], id[2], 2, 1, 2);
    return g.mul(y, y);
  });

  // Without bias the op takes -1; the weight leaf still gets gradients.
  check_gradients({x, w}, [](GraphD& g, const std::vector<int>& id) {
    const int y = g.conv2d(id[0], id[1], -1, 1, 1, 2);
    return g.mul(y, y);
  });

  const TensorD xd = stream_tensor<double>(123, {1, 4, 3, 3}, -1, 1);
  const TensorD wd = stream_tensor<double>(124, {4, 3, 3, 3}, -0.5, 0.5);
  const TensorD bd = stream_tensor<double>(125, {3}, -0.5, 0.5);
  check_gradients({xd, wd, bd}, [](GraphD& g, const std::vector<int>& id) {
    const int y = g.deconv2d(id[0], id[1], id[2], 2, 1, 1);
    return g.mul(y, y);
  });
}

TEST_CASE("deformable convolution gradients") {
  const int groups = 2, k = 3;
  const TensorD x = stream_tensor<double>(130, {1, 4, 5, 5}, -1, 1);
  const TensorD off = stream_tensor<double>(131, {1, 2 * k * k * groups, 5, 5}, -1.7, 1.7);
  const TensorD w = stream_tensor<double>(132, {4, 4, k, k}, -0.5, 0.5);
  const TensorD b = stream_tensor<double>(133, {4}, -0.5, 0.5);
  // Bilinear sampling is piecewise-linear in the offsets, so keep a slightly
  // looser tolerance than for the smooth ops.
  check_gradients({x, off, w, b},
                  [groups](GraphD& g, const std::vector<int>& id) {
                    const int y = g.deform_conv2d(id[0], id[1], id[2], id[3], groups);
                    return g.mul(y, y);
                  },
                  1e-4);
}

TEST_CASE("gauss_bits value and gradients") {
  const std::vector<int> s{1, 1, 3, 4};
  const TensorD delta = stream_tensor<double>(140, s, -2, 2);
  const TensorD log_sigma = stream_tensor<double>(141, s, -0.8, 1.0);
  const double sigma_min = 0.11, p_floor = 0x1.0p-16;

  // Value: -log2 of the probability a unit-width bin carries under N(0, s^2).
  {
    GraphD g;
    const int d = g.leaf(delta, false);
    const int ls = g.leaf(log_sigma, false);
    const TensorD& bits = g.val(g.gauss_bits(d, ls, sigma_min, p_floor));
    for (std::size_t i = 0; i < bits.v.size(); ++i) {
      const double sig = std::max(std::exp(log_sigma.v[i]), sigma_min);
      auto cdf = [&](double z) { return 0.5 * std::erfc(-z / std::sqrt(2.0)); };
      const double p = cdf((delta.v[i] + 0.5) / sig) - cdf((delta.v[i] - 0.5) / sig);
      CHECK(bits.v[i] == doctest::Approx(-std::log2(std::max(p, p_floor))).epsilon(1e-9));
      CHECK(bits.v[i] >= 0.0);
    }
  }

  check_gradients({delta, log_sigma},
                  [&](GraphD& g, const std::vector<int>& id) {
                    return g.gauss_bits(id[0], id[1], sigma_min, p_floor);
                  },
                  1e-5);
}

TEST_CASE("forward semantics of convention-bearing ops") {
  GraphD g;
  // shift moves content toward higher x, zero-filling on the left.
  TensorD t({1, 1, 1, 4});
  t.v = {1, 2, 3, 4};
  const int sh = g.shift(g.leaf(t, false), 2);
  CHECK(g.val(sh).v == std::vector<double>({0, 0, 1, 2}));
  const int shn = g.shift(g.leaf(t, false), -1);
  CHECK(g.val(shn).v == std::vector<double>({2, 3, 4, 0}));

  // group_dot averages the per-channel products within each group.
  TensorD a({1, 4, 1, 1}), b({1, 4, 1, 1});
  a.v = {1, 2, 3, 4};
  b.v = {5, 6, 7, 8};
  const int gd = g.group_dot(g.leaf(a, false), g.leaf(b, false), 2);
  CHECK(g.val(gd).v == std::vector<double>({(5.0 + 12.0) / 2, (21.0 + 32.0) / 2}));

  // symmetric padding mirrors without repeating the edge sample's neighbor.
  TensorD r({1, 1, 1, 3});
  r.v = {1, 2, 3};
  const int sp = g.pad2d(g.leaf(r, false), 2, 2, 0, 0, PadMode::Symmetric);
  CHECK(g.val(sp).v == std::vector<double>({2, 1, 1, 2, 3, 3, 2}));

  const int zp = g.pad2d(g.leaf(r, false), 1, 1, 0, 0, PadMode::Zero);
  CHECK(g.val(zp).v == std::vector<double>({0, 1, 2, 3, 0}));
}

TEST_CASE("tape mechanics: accumulation, detach, and pruning") {
  GraphD g;
  TensorD t({1, 1, 1, 2});
  t.v = {2, 3};

  // A leaf used twice accumulates both contributions: d(x*x + x)/dx = 2x + 1.
  const int x = g.leaf(t, true);
  g.backward(g.reduce_sum(g.add(g.mul(x, x), x)));
  CHECK(g.grad(x).v[0] == doctest::Approx(5.0));
  CHECK(g.grad(x).v[1] == doctest::Approx(7.0));

  // detach blocks the flow entirely.
  GraphD g2;
  const int y = g2.leaf(t, true);
  const int d = g2.detach(y);
  g2.backward(g2.reduce_sum(g2.mul(d, d)));
  CHECK(g2.grad(y).numel() == 0);

  // A requires_grad=false leaf never materializes a gradient even when mixed
  // with trainable ones.
  GraphD g3;
  const int p = g3.leaf(t, true);
  const int q = g3.leaf(t, false);
  g3.backward(g3.reduce_sum(g3.mul(p, q)));
  CHECK(g3.grad(p).numel() == 2);
  CHECK(g3.grad(q).numel() == 0);
}
