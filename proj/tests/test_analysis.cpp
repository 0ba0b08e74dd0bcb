// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Mutual information, cross-view correlation statistics, Bjontegaard rate
// deltas, report writers, and the complexity profiler's structural laws.

#include <doctest.h>

#include <cmath>
#include <fstream>

#include "llss/analysis.hpp"
#include "llss/errors.hpp"
#include "test_util.hpp"

using namespace llss;

TEST_CASE("gaussian mutual information") {
  CHECK(mi_gaussian(0.0) == 0.0);
  // -0.5 * log2(1 - rho^2):
  CHECK(mi_gaussian(0.5) == doctest::Approx(0.2075187496).epsilon(1e-9));
  CHECK(mi_gaussian(0.9) == doctest::Approx(1.1979643382).epsilon(1e-9));
  // Even in rho.
  CHECK(mi_gaussian(-0.7) == mi_gaussian(0.7));
  // Clamped at |rho| -> 1, finite and monotone.
  CHECK(std::isfinite(mi_gaussian(1.0)));
  CHECK(mi_gaussian(1.0) > mi_gaussian(0.999999));
}

TEST_CASE("latent cross correlation on constructed channels") {
  // Channel 0: y = x (rho 1). Channel 1: y = -x (rho -1). Channel 2:
  // independent streams (rho near 0). Channel 3: constant (invalid).
  const int n = 400;
  TensorF l({4, 1, n}), r({4, 1, n});
  for (int i = 0; i < n; ++i) {
    const float a = static_cast<float>(testutil::stream_unit(70, i)) - 0.5f;
    const float b = static_cast<float>(testutil::stream_unit(71, i)) - 0.5f;
    l.v[0 * n + i] = a;
    r.v[0 * n + i] = 2.0f * a + 0.25f;  // affine keeps rho = 1
    l.v[1 * n + i] = a;
    r.v[1 * n + i] = -a;
    l.v[2 * n + i] = a;
    r.v[2 * n + i] = b;
    l.v[3 * n + i] = 1.0f;
    r.v[3 * n + i] = b;
  }

  const ChannelCorrelation c = latent_cross_correlation({l}, {r});
  REQUIRE(c.per_channel.size() == 4);
  CHECK(c.per_channel[0] == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(c.per_channel[1] == doctest::Approx(-1.0).epsilon(1e-6));
  CHECK(std::abs(c.per_channel[2]) < 0.15);
  CHECK(c.valid[0]);
  CHECK(c.valid[1]);
  CHECK(c.valid[2]);
  CHECK_FALSE(c.valid[3]);
  CHECK(c.aggregate_mi == doctest::Approx(mi_gaussian(c.aggregate)).epsilon(1e-12));

  // Pooling two frames equals one frame holding both frames' samples.
  TensorF l2 = l, r2 = r;
  for (auto& v : l2.v) v *= 0.5f;
  for (auto& v : r2.v) v *= 0.5f;
  TensorF lcat({4, 1, 2 * n}), rcat({4, 1, 2 * n});
  for (int c = 0; c < 4; ++c)
    for (int i = 0; i < n; ++i) {
      lcat.v[c * 2 * n + i] = l.v[c * n + i];
      lcat.v[c * 2 * n + n + i] = l2.v[c * n + i];
      rcat.v[c * 2 * n + i] = r.v[c * n + i];
      rcat.v[c * 2 * n + n + i] = r2.v[c * n + i];
    }
  const ChannelCorrelation two = latent_cross_correlation({l, l2}, {r, r2});
  const ChannelCorrelation cat = latent_cross_correlation({lcat}, {rcat});
  for (int c = 0; c < 4; ++c) {
    CHECK(two.valid[c] == cat.valid[c]);
    CHECK(two.per_channel[c] == doctest::Approx(cat.per_channel[c]).epsilon(1e-9));
  }
  CHECK(two.aggregate == doctest::Approx(cat.aggregate).epsilon(1e-9));

  // Mismatched shapes or empty input are rejected.
  CHECK_THROWS_AS(latent_cross_correlation({}, {}), Error);
  TensorF odd({3, 1, n});
  CHECK_THROWS_AS(latent_cross_correlation({l}, {odd}), Error);
}

TEST_CASE("top energy channels") {
  TensorF s({3, 1, 4});
  s.v = {1, 1, 1, 1,      // ch 0: energy 1
         3, 3, 3, 3,      // ch 1: energy 9
         -2, 2, -2, 2};   // ch 2: energy 4
  CHECK(top_energy_channels({s}, 2) == std::vector<int>({1, 2}));
  CHECK(top_energy_channels({s}, 8) == std::vector<int>({1, 2, 0}));

  // Ties break toward the lower channel index.
  TensorF t({2, 1, 2});
  t.v = {1, -1, -1, 1};
  CHECK(top_energy_channels({t}, 2) == std::vector<int>({0, 1}));
}

TEST_CASE("bd-rate identities") {
  const std::vector<double> q{30, 32, 34, 36};
  const std::vector<double> r{0.10, 0.18, 0.30, 0.55};

  // A curve against itself is 0%.
  CHECK(bd_rate(r, q, r, q) == doctest::Approx(0.0).epsilon(1e-9));

  // Doubling the rate at equal quality is +100%; halving is -50%.
  std::vector<double> twice = r;
  for (auto& v : twice) v *= 2;
  CHECK(bd_rate(r, q, twice, q) == doctest::Approx(100.0).epsilon(1e-3));
  CHECK(bd_rate(r, q, {r[0] / 2, r[1] / 2, r[2] / 2, r[3] / 2}, q) ==
        doctest::Approx(-50.0).epsilon(1e-3));

  // Reciprocity: swapping test and anchor inverts the ratio.
  const double fwd = bd_rate(r, q, twice, q);
  const double bwd = bd_rate(twice, q, r, q);
  CHECK((1 + fwd / 100) * (1 + bwd / 100) == doctest::Approx(1.0).epsilon(1e-6));

  // Guards: point count and overlap.
  CHECK_THROWS_AS(bd_rate({1, 2, 3}, {30, 32, 34}, r, q), Error);
  CHECK_THROWS_AS(bd_rate(r, q, r, {50, 52, 54, 56}), Error);
}

TEST_CASE("csv writer") {
  testutil::TempDir tmp;
  const std::string path = tmp.sub("table.csv");
  write_csv(path, {"beta", "bpp", "psnr"}, {{0.0067, 0.21, 33.5}, {0.013, 0.15, 31.2}});
  std::ifstream in(path);
  REQUIRE(in.good());
  std::string header, row1, row2;
  std::getline(in, header);
  std::getline(in, row1);
  std::getline(in, row2);
  CHECK(header == "beta,bpp,psnr");
  CHECK(row1.find("0.0067") != std::string::npos);
  CHECK(row2.find("31.2") != std::string::npos);

  CHECK_THROWS_AS(write_csv(tmp.sub("nodir/x.csv"), {"a"}, {{1}}), Error);
}

TEST_CASE("plot renderer emits a valid png") {
  testutil::TempDir tmp;
  const std::string path = tmp.sub("plot.png");
  PlotSeries s1{"anchor", {0.1, 0.2, 0.3}, {30, 32, 33}, 0xd62728};
  PlotSeries s2{"test", {0.1, 0.2, 0.3}, {31, 33, 34}, 0x1f77b4};
  render_plot_png(path, "RATE / QUALITY", "bpp", "psnr", {s1, s2}, 400, 300);

  std::ifstream in(path, std::ios::binary);
  REQUIRE(in.good());
  unsigned char sig[8] = {};
  in.read(reinterpret_cast<char*>(sig), 8);
  const unsigned char want[8] = {0x89, 'P', 'N', 'G', 0x0d, 0x0a, 0x1a, 0x0a};
  for (int i = 0; i < 8; ++i) CHECK(sig[i] == want[i]);
}

TEST_CASE("complexity profile structure") {
  LLSSModelF model(testutil::toy_config());
  const ComplexityReport rep = profile_complexity(model, 64, 128);
  CHECK(rep.height == 64);
  CHECK(rep.width == 128);
  REQUIRE(rep.rows.size() >= 6);

  std::int64_t main_params = 0, main_macs = 0;
  int subrows = 0;
  for (const ComplexityRow& row : rep.rows) {
    CHECK(row.params > 0);
    CHECK(row.macs > 0);
    CHECK(row.flops == 2 * row.macs);
    if (row.subrow) {
      ++subrows;
    } else {
      main_params += row.params;
      main_macs += row.macs;
    }
  }
  // Coupling detail rows exist for both autoencoders and are excluded from
  // the totals (their work is already inside the parent rows).
  CHECK(subrows == 2);
  CHECK(rep.total_params == main_params);
  CHECK(rep.total_macs == main_macs);

  // Parameters are resolution independent; MACs scale linearly with area.
  const ComplexityReport wide = profile_complexity(model, 64, 256);
  CHECK(wide.total_params == rep.total_params);
  CHECK(wide.total_macs == 2 * rep.total_macs);
  const ComplexityReport tall = profile_complexity(model, 128, 128);
  CHECK(tall.total_macs == 2 * rep.total_macs);

  // Formatting round trip: the table mentions every row name.
  const std::string table = format_complexity_table(rep);
  for (const ComplexityRow& row : rep.rows)
    CHECK(table.find(row.name) != std::string::npos);

  testutil::TempDir tmp;
  write_complexity_csv(rep, tmp.sub("complexity.csv"));
  std::ifstream in(tmp.sub("complexity.csv"));
  CHECK(in.good());

  CHECK_THROWS_AS(profile_complexity(model, 60, 64), Error);
}
