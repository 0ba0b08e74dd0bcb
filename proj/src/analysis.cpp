// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/analysis.hpp"

#include <algorithm>
#include <array>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>

#include "llss/codec.hpp"
#include "llss/errors.hpp"

namespace llss {
namespace {

// Channel count and per-channel plane geometry of a latent sample.
struct SampleShape {
  int channels = 0;
  std::int64_t plane = 0;  // elements per channel
};

SampleShape sample_shape(const TensorF& t) {
  if (t.shape.size() == 3) return {t.dim(0), static_cast<std::int64_t>(t.dim(1)) * t.dim(2)};
  if (t.shape.size() == 4)
    return {t.dim(1), static_cast<std::int64_t>(t.dim(0)) * t.dim(2) * t.dim(3)};
  throw DataError("latent samples must be (C,H,W) or (N,C,H,W)");
}

// Iterates one channel's values across a possibly batched sample.
template <typename F>
void for_channel(const TensorF& t, int c, F f) {
  if (t.shape.size() == 3) {
    const std::int64_t plane = static_cast<std::int64_t>(t.dim(1)) * t.dim(2);
    const float* p = t.v.data() + c * plane;
    for (std::int64_t i = 0; i < plane; ++i) f(p[i]);
  } else {
    const std::int64_t plane = static_cast<std::int64_t>(t.dim(2)) * t.dim(3);
    for (int n = 0; n < t.dim(0); ++n) {
      const float* p = t.v.data() + (static_cast<std::int64_t>(n) * t.dim(1) + c) * plane;
      for (std::int64_t i = 0; i < plane; ++i) f(p[i]);
    }
  }
}

double pearson(double sx, double sy, double sxx, double syy, double sxy, double n) {
  const double mx = sx / n, my = sy / n;
  const double vx = sxx / n - mx * mx;
  const double vy = syy / n - my * my;
  if (vx <= 0 || vy <= 0) return std::nan("");
  const double cov = sxy / n - mx * my;
  return cov / std::sqrt(vx * vy);
}

// --- cubic least squares for the rate delta ---------------------------------

// Fits y = c0 + c1 x + c2 x^2 + c3 x^3 by normal equations; x should be
// pre-centered by the caller for conditioning.
std::array<double, 4> polyfit3(const std::vector<double>& x, const std::vector<double>& y) {
  double m[4][5] = {};
  for (std::size_t i = 0; i < x.size(); ++i) {
    double px[7] = {1, 0, 0, 0, 0, 0, 0};
    for (int p = 1; p < 7; ++p) px[p] = px[p - 1] * x[i];
    for (int r = 0; r < 4; ++r) {
      for (int c = 0; c < 4; ++c) m[r][c] += px[r + c];
      m[r][4] += px[r] * y[i];
    }
  }
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::fabs(m[r][col]) > std::fabs(m[piv][col])) piv = r;
    if (std::fabs(m[piv][col]) < 1e-12)
      throw Error("rate delta: degenerate curve fit (repeated quality values?)");
    if (piv != col)
      for (int c = 0; c < 5; ++c) std::swap(m[piv][c], m[col][c]);
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      const double f = m[r][col] / m[col][col];
      for (int c = col; c < 5; ++c) m[r][c] -= f * m[col][c];
    }
  }
  return {m[0][4] / m[0][0], m[1][4] / m[1][1], m[2][4] / m[2][2], m[3][4] / m[3][3]};
}

double poly_integral(const std::array<double, 4>& c, double a, double b) {
  auto F = [&](double x) {
    return c[0] * x + c[1] * x * x / 2 + c[2] * x * x * x / 3 + c[3] * x * x * x * x / 4;
  };
  return F(b) - F(a);
}

// --- 5x7 bitmap font ----------------------------------------------------------

const std::uint8_t* glyph(char ch) {
  static const struct {
    char c;
    std::uint8_t rows[7];
  } kFont[] = {
      {' ', {0, 0, 0, 0, 0, 0, 0}},
      {'0', {0x0E, 0x11, 0x13, 0x15, 0x19, 0x11, 0x0E}},
      {'1', {0x04, 0x0C, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'2', {0x0E, 0x11, 0x01, 0x02, 0x04, 0x08, 0x1F}},
      {'3', {0x1F, 0x02, 0x04, 0x02, 0x01, 0x11, 0x0E}},
      {'4', {0x02, 0x06, 0x0A, 0x12, 0x1F, 0x02, 0x02}},
      {'5', {0x1F, 0x10, 0x1E, 0x01, 0x01, 0x11, 0x0E}},
      {'6', {0x06, 0x08, 0x10, 0x1E, 0x11, 0x11, 0x0E}},
      {'7', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x08, 0x08}},
      {'8', {0x0E, 0x11, 0x11, 0x0E, 0x11, 0x11, 0x0E}},
      {'9', {0x0E, 0x11, 0x11, 0x0F, 0x01, 0x02, 0x0C}},
      {'A', {0x0E, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'B', {0x1E, 0x11, 0x11, 0x1E, 0x11, 0x11, 0x1E}},
      {'C', {0x0E, 0x11, 0x10, 0x10, 0x10, 0x11, 0x0E}},
      {'D', {0x1C, 0x12, 0x11, 0x11, 0x11, 0x12, 0x1C}},
      {'E', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x1F}},
      {'F', {0x1F, 0x10, 0x10, 0x1E, 0x10, 0x10, 0x10}},
      {'G', {0x0E, 0x11, 0x10, 0x17, 0x11, 0x11, 0x0F}},
      {'H', {0x11, 0x11, 0x11, 0x1F, 0x11, 0x11, 0x11}},
      {'I', {0x0E, 0x04, 0x04, 0x04, 0x04, 0x04, 0x0E}},
      {'J', {0x07, 0x02, 0x02, 0x02, 0x02, 0x12, 0x0C}},
      {'K', {0x11, 0x12, 0x14, 0x18, 0x14, 0x12, 0x11}},
      {'L', {0x10, 0x10, 0x10, 0x10, 0x10, 0x10, 0x1F}},
      {'M', {0x11, 0x1B, 0x15, 0x15, 0x11, 0x11, 0x11}},
      {'N', {0x11, 0x19, 0x15, 0x13, 0x11, 0x11, 0x11}},
      {'O', {0x0E, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'P', {0x1E, 0x11, 0x11, 0x1E, 0x10, 0x10, 0x10}},
      {'Q', {0x0E, 0x11, 0x11, 0x11, 0x15, 0x12, 0x0D}},
      {'R', {0x1E, 0x11, 0x11, 0x1E, 0x14, 0x12, 0x11}},
      {'S', {0x0F, 0x10, 0x10, 0x0E, 0x01, 0x01, 0x1E}},
      {'T', {0x1F, 0x04, 0x04, 0x04, 0x04, 0x04, 0x04}},
      {'U', {0x11, 0x11, 0x11, 0x11, 0x11, 0x11, 0x0E}},
      {'V', {0x11, 0x11, 0x11, 0x11, 0x11, 0x0A, 0x04}},
      {'W', {0x11, 0x11, 0x11, 0x15, 0x15, 0x15, 0x0A}},
      {'X', {0x11, 0x11, 0x0A, 0x04, 0x0A, 0x11, 0x11}},
      {'Y', {0x11, 0x11, 0x0A, 0x04, 0x04, 0x04, 0x04}},
      {'Z', {0x1F, 0x01, 0x02, 0x04, 0x08, 0x10, 0x1F}},
      {'.', {0x00, 0x00, 0x00, 0x00, 0x00, 0x0C, 0x0C}},
      {',', {0x00, 0x00, 0x00, 0x00, 0x0C, 0x04, 0x08}},
      {'-', {0x00, 0x00, 0x00, 0x1F, 0x00, 0x00, 0x00}},
      {'+', {0x00, 0x04, 0x04, 0x1F, 0x04, 0x04, 0x00}},
      {':', {0x00, 0x0C, 0x0C, 0x00, 0x0C, 0x0C, 0x00}},
      {'(', {0x02, 0x04, 0x08, 0x08, 0x08, 0x04, 0x02}},
      {')', {0x08, 0x04, 0x02, 0x02, 0x02, 0x04, 0x08}},
      {'%', {0x18, 0x19, 0x02, 0x04, 0x08, 0x13, 0x03}},
      {'/', {0x01, 0x01, 0x02, 0x04, 0x08, 0x10, 0x10}},
      {'=', {0x00, 0x1F, 0x00, 0x1F, 0x00, 0x00, 0x00}},
  };
  const char up = static_cast<char>(std::toupper(static_cast<unsigned char>(ch)));
  for (const auto& g : kFont)
    if (g.c == up) return g.rows;
  return kFont[0].rows;  // unknown characters render as a space
}

struct Canvas {
  int h, w;
  TensorF img;
  Canvas(int hh, int ww) : h(hh), w(ww), img(TensorF::full({3, hh, ww}, 1.0f)) {}

  void set(int x, int y, std::uint32_t rgb) {
    if (x < 0 || y < 0 || x >= w || y >= h) return;
    img.v[static_cast<std::size_t>(0) * h * w + static_cast<std::size_t>(y) * w + x] =
        ((rgb >> 16) & 0xff) / 255.0f;
    img.v[static_cast<std::size_t>(1) * h * w + static_cast<std::size_t>(y) * w + x] =
        ((rgb >> 8) & 0xff) / 255.0f;
    img.v[static_cast<std::size_t>(2) * h * w + static_cast<std::size_t>(y) * w + x] =
        (rgb & 0xff) / 255.0f;
  }

  void hline(int x0, int x1, int y, std::uint32_t rgb) {
    for (int x = std::min(x0, x1); x <= std::max(x0, x1); ++x) set(x, y, rgb);
  }
  void vline(int x, int y0, int y1, std::uint32_t rgb) {
    for (int y = std::min(y0, y1); y <= std::max(y0, y1); ++y) set(x, y, rgb);
  }

  void line(double x0, double y0, double x1, double y1, std::uint32_t rgb, int thick) {
    const double dx = x1 - x0, dy = y1 - y0;
    const int steps = std::max(1, static_cast<int>(std::ceil(std::max(std::fabs(dx),
                                                                      std::fabs(dy)))));
    for (int i = 0; i <= steps; ++i) {
      const int px = static_cast<int>(std::lround(x0 + dx * i / steps));
      const int py = static_cast<int>(std::lround(y0 + dy * i / steps));
      for (int oy = 0; oy < thick; ++oy)
        for (int ox = 0; ox < thick; ++ox) set(px + ox, py + oy, rgb);
    }
  }

  void marker(int x, int y, std::uint32_t rgb) {
    for (int oy = -2; oy <= 2; ++oy)
      for (int ox = -2; ox <= 2; ++ox) set(x + ox, y + oy, rgb);
  }

  void text(int x, int y, const std::string& s, int scale, std::uint32_t rgb) {
    int cx = x;
    for (char ch : s) {
      const std::uint8_t* rows = glyph(ch);
      for (int r = 0; r < 7; ++r)
        for (int c = 0; c < 5; ++c)
          if (rows[r] & (1 << (4 - c)))
            for (int sy = 0; sy < scale; ++sy)
              for (int sx = 0; sx < scale; ++sx)
                set(cx + c * scale + sx, y + r * scale + sy, rgb);
      cx += 6 * scale;
    }
  }

  static int text_width(const std::string& s, int scale) {
    return static_cast<int>(s.size()) * 6 * scale;
  }
};

double nice_step(double range, int target) {
  if (range <= 0) return 1;
  const double raw = range / target;
  const double mag = std::pow(10.0, std::floor(std::log10(raw)));
  for (double m : {1.0, 2.0, 5.0, 10.0})
    if (raw <= m * mag + 1e-12 * mag) return m * mag;
  return 10 * mag;
}

std::string format_tick(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

}  // namespace

// --- Mutual information and correlation -------------------------------------

double mi_gaussian(double rho) {
  const double r = std::min(std::fabs(rho), 1.0 - 1e-9);
  return -0.5 * std::log2(1.0 - r * r);
}

ChannelCorrelation latent_cross_correlation(const std::vector<TensorF>& left,
                                            const std::vector<TensorF>& right) {
  if (left.empty() || left.size() != right.size())
    throw DataError("latent_cross_correlation: need equal, nonempty sample lists");
  const SampleShape shape = sample_shape(left[0]);
  const int channels = shape.channels;

  // Per-channel and whole-tensor accumulators.
  std::vector<double> sx(channels, 0), sy(channels, 0), sxx(channels, 0), syy(channels, 0),
      sxy(channels, 0), n(channels, 0);
  double ax = 0, ay = 0, axx = 0, ayy = 0, axy = 0, an = 0;

  for (std::size_t s = 0; s < left.size(); ++s) {
    if (!left[s].same_shape(right[s]))
      throw DataError("latent_cross_correlation: sample shape mismatch");
    const SampleShape ss = sample_shape(left[s]);
    if (ss.channels != channels)
      throw DataError("latent_cross_correlation: channel count changes between samples");
    for (int c = 0; c < channels; ++c) {
      std::vector<float> lv, rv;
      lv.reserve(ss.plane);
      rv.reserve(ss.plane);
      for_channel(left[s], c, [&](float v) { lv.push_back(v); });
      for_channel(right[s], c, [&](float v) { rv.push_back(v); });
      for (std::size_t i = 0; i < lv.size(); ++i) {
        const double x = lv[i], y = rv[i];
        sx[c] += x;
        sy[c] += y;
        sxx[c] += x * x;
        syy[c] += y * y;
        sxy[c] += x * y;
        n[c] += 1;
        ax += x;
        ay += y;
        axx += x * x;
        ayy += y * y;
        axy += x * y;
        an += 1;
      }
    }
  }

  ChannelCorrelation out;
  out.per_channel.resize(channels, 0.0);
  out.valid.resize(channels, false);
  for (int c = 0; c < channels; ++c) {
    const double rho = pearson(sx[c], sy[c], sxx[c], syy[c], sxy[c], n[c]);
    if (std::isnan(rho)) continue;  // zero variance on a side: excluded
    out.per_channel[c] = rho;
    out.valid[c] = true;
  }
  const double agg = pearson(ax, ay, axx, ayy, axy, an);
  out.aggregate = std::isnan(agg) ? 0.0 : agg;
  out.aggregate_mi = mi_gaussian(out.aggregate);
  return out;
}

std::vector<int> top_energy_channels(const std::vector<TensorF>& samples, int k) {
  if (samples.empty()) throw DataError("top_energy_channels: no samples");
  const int channels = sample_shape(samples[0]).channels;
  std::vector<double> energy(channels, 0);
  std::vector<double> count(channels, 0);
  for (const TensorF& t : samples) {
    if (sample_shape(t).channels != channels)
      throw DataError("top_energy_channels: channel count changes between samples");
    for (int c = 0; c < channels; ++c)
      for_channel(t, c, [&](float v) {
        energy[c] += static_cast<double>(v) * v;
        count[c] += 1;
      });
  }
  std::vector<int> idx(channels);
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](int a, int b) {
    const double ea = energy[a] / count[a], eb = energy[b] / count[b];
    if (ea != eb) return ea > eb;
    return a < b;
  });
  if (k < channels) idx.resize(k);
  return idx;
}

namespace {

struct LatentCollector final : LatentObserver {
  std::vector<TensorF> ml, mr, cl, cr;
  void on_motion_latents(int, const TensorF& left, const TensorF& right) override {
    ml.push_back(left);
    mr.push_back(right);
  }
  void on_context_latents(int, const TensorF& left, const TensorF& right) override {
    cl.push_back(left);
    cr.push_back(right);
  }
};

}  // namespace

ProbeReport probe_latents(LLSSModelF& model, const std::vector<StereoSequence>& clips,
                          int top_k) {
  if (clips.empty()) throw DataError("probe_latents: no clips");
  LatentCollector col;
  Codec codec(model);
  codec.set_observer(&col);
  for (const StereoSequence& clip : clips) codec.encode_sequence(clip);
  if (col.ml.empty())
    throw DataError("probe_latents: no predicted frames were coded (clips too short?)");

  ProbeReport rep;
  rep.frames_probed = static_cast<int>(col.ml.size());
  rep.motion = latent_cross_correlation(col.ml, col.mr);
  rep.context = latent_cross_correlation(col.cl, col.cr);
  std::vector<TensorF> mpool = col.ml;
  mpool.insert(mpool.end(), col.mr.begin(), col.mr.end());
  std::vector<TensorF> cpool = col.cl;
  cpool.insert(cpool.end(), col.cr.begin(), col.cr.end());
  rep.motion_top = top_energy_channels(mpool, top_k);
  rep.context_top = top_energy_channels(cpool, top_k);
  return rep;
}

// --- Complexity accounting ---------------------------------------------------

ComplexityReport profile_complexity(const LLSSModelF& model, int h, int w) {
  if (h <= 0 || w <= 0 || h % 64 != 0 || w % 64 != 0)
    throw ConfigError("profile resolution must be positive multiples of 64");
  ComplexityReport rep;
  rep.height = h;
  rep.width = w;

  // Sub-rows break out a portion already contained in the preceding main row,
  // so only main rows contribute to the totals.
  auto add = [&](const std::string& name, long long params, long long macs, bool sub) {
    ComplexityRow r;
    r.name = name;
    r.params = params;
    r.macs = macs;
    r.flops = 2 * macs;
    r.subrow = sub;
    if (!sub) {
      rep.total_params += params;
      rep.total_macs += macs;
    }
    rep.rows.push_back(std::move(r));
  };
  auto trace_of = [&](auto&& fn, int th, int tw) {
    LayerGraph lg;
    fn(lg, th, tw);
    return lg.total();
  };

  // Accounting convention: extractor/reconstructor weights are reported once
  // (shared across views); the motion and autoencoder paths are reported as
  // two view instances. Work multipliers count per-view applications; the
  // extractor additionally runs on both decoded frames to rebuild the
  // reference, so it appears four times per coded pair.
  const Counts ext = trace_of([&](LayerGraph& g, int a, int b) { model.ext.trace(g, a, b); }, h, w);
  add("feature extractor", ext.params, ext.macs * 4, false);
  const Counts mest =
      trace_of([&](LayerGraph& g, int a, int b) { model.mest.trace(g, a, b); }, h / 2, w / 2);
  add("motion estimation", mest.params * 2, mest.macs * 2, false);
  const Counts mcomp =
      trace_of([&](LayerGraph& g, int a, int b) { model.mcomp.trace(g, a, b); }, h / 2, w / 2);
  add("motion compensation", mcomp.params * 2, mcomp.macs * 2, false);

  // Autoencoder stacks run per view; the coupling modules run once over the
  // view pair and are folded into the parent row with a sub-row breakout.
  const Counts ms = trace_of(
      [&](LayerGraph& g, int a, int b) { model.mae.trace_stacks(g, a, b); }, h / 2, w / 2);
  const Counts mb = trace_of(
      [&](LayerGraph& g, int a, int b) { model.mae.trace_bishift(g, a, b); }, h / 2, w / 2);
  add("motion autoencoder", ms.params * 2 + mb.params, ms.macs * 2 + mb.macs, false);
  add("coupling modules (motion)", mb.params, mb.macs, true);

  const Counts cs = trace_of(
      [&](LayerGraph& g, int a, int b) { model.cae.trace_stacks(g, a, b); }, h / 2, w / 2);
  const Counts cb = trace_of(
      [&](LayerGraph& g, int a, int b) { model.cae.trace_bishift(g, a, b); }, h / 2, w / 2);
  add("context autoencoder", cs.params * 2 + cb.params, cs.macs * 2 + cb.macs, false);
  add("coupling modules (context)", cb.params, cb.macs, true);

  const Counts rec = trace_of([&](LayerGraph& g, int a, int b) { model.rec.trace(g, a, b); }, h, w);
  add("image reconstructor", rec.params, rec.macs * 2, false);
  return rep;
}

std::string format_complexity_table(const ComplexityReport& rep) {
  char buf[160];
  std::string out;
  std::snprintf(buf, sizeof buf, "module complexity at %dx%d (per coded stereo frame pair)\n",
                rep.width, rep.height);
  out += buf;
  std::snprintf(buf, sizeof buf, "%-32s %14s %12s %12s\n", "module", "params", "GMACs",
                "GFLOPs");
  out += buf;
  out += std::string(74, '-') + "\n";
  for (const ComplexityRow& r : rep.rows) {
    const std::string name = r.subrow ? "  - " + r.name : r.name;
    std::snprintf(buf, sizeof buf, "%-32s %14lld %12.2f %12.2f\n", name.c_str(),
                  static_cast<long long>(r.params), r.macs / 1e9, r.flops / 1e9);
    out += buf;
  }
  out += std::string(74, '-') + "\n";
  std::snprintf(buf, sizeof buf, "%-32s %14lld %12.2f %12.2f\n", "total",
                static_cast<long long>(rep.total_params), rep.total_macs / 1e9,
                2.0 * rep.total_macs / 1e9);
  out += buf;
  return out;
}

void write_complexity_csv(const ComplexityReport& rep, const std::string& path) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write: " + path);
  f << "module,params,macs,flops\n";
  for (const ComplexityRow& r : rep.rows)
    f << (r.subrow ? "- " : "") << r.name << "," << r.params << "," << r.macs << "," << r.flops
      << "\n";
  f << "total," << rep.total_params << "," << rep.total_macs << "," << 2 * rep.total_macs
    << "\n";
}

// --- Bjontegaard rate delta --------------------------------------------------

double bd_rate(const std::vector<double>& anchor_rate, const std::vector<double>& anchor_quality,
               const std::vector<double>& test_rate, const std::vector<double>& test_quality) {
  if (anchor_rate.size() != anchor_quality.size() || test_rate.size() != test_quality.size())
    throw Error("rate delta: rate/quality lengths differ");
  if (anchor_rate.size() < 4 || test_rate.size() < 4)
    throw Error("rate delta: need at least 4 points per curve");
  for (double r : anchor_rate)
    if (!(r > 0)) throw Error("rate delta: rates must be positive");
  for (double r : test_rate)
    if (!(r > 0)) throw Error("rate delta: rates must be positive");

  const double lo = std::max(*std::min_element(anchor_quality.begin(), anchor_quality.end()),
                             *std::min_element(test_quality.begin(), test_quality.end()));
  const double hi = std::min(*std::max_element(anchor_quality.begin(), anchor_quality.end()),
                             *std::max_element(test_quality.begin(), test_quality.end()));
  if (!(hi > lo)) throw Error("rate delta: quality ranges do not overlap");

  const double shift = 0.5 * (lo + hi);  // center for fit conditioning
  auto fit = [&](const std::vector<double>& q, const std::vector<double>& r) {
    std::vector<double> x(q.size()), y(r.size());
    for (std::size_t i = 0; i < q.size(); ++i) {
      x[i] = q[i] - shift;
      y[i] = std::log10(r[i]);
    }
    return polyfit3(x, y);
  };
  const auto pa = fit(anchor_quality, anchor_rate);
  const auto pt = fit(test_quality, test_rate);
  const double ia = poly_integral(pa, lo - shift, hi - shift);
  const double it = poly_integral(pt, lo - shift, hi - shift);
  const double avg_diff = (it - ia) / (hi - lo);
  return (std::pow(10.0, avg_diff) - 1.0) * 100.0;
}

// --- Report writers ----------------------------------------------------------

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows) {
  std::ofstream f(path, std::ios::trunc);
  if (!f) throw DataError("cannot write: " + path);
  for (std::size_t i = 0; i < columns.size(); ++i) f << (i ? "," : "") << columns[i];
  f << "\n";
  char buf[40];
  for (const auto& row : rows) {
    if (row.size() != columns.size()) throw DataError("write_csv: row width mismatch");
    for (std::size_t i = 0; i < row.size(); ++i) {
      std::snprintf(buf, sizeof buf, "%.10g", row[i]);
      f << (i ? "," : "") << buf;
    }
    f << "\n";
  }
}

void render_plot_png(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series, int width, int height) {
  if (series.empty()) throw DataError("render_plot_png: no series");
  double x0 = 0, x1 = 0, y0 = 0, y1 = 0;
  bool first = true;
  for (const PlotSeries& s : series) {
    if (s.x.size() != s.y.size()) throw DataError("render_plot_png: x/y lengths differ");
    for (std::size_t i = 0; i < s.x.size(); ++i) {
      if (first) {
        x0 = x1 = s.x[i];
        y0 = y1 = s.y[i];
        first = false;
      }
      x0 = std::min(x0, s.x[i]);
      x1 = std::max(x1, s.x[i]);
      y0 = std::min(y0, s.y[i]);
      y1 = std::max(y1, s.y[i]);
    }
  }
  if (first) throw DataError("render_plot_png: series have no points");
  auto widen = [](double& lo, double& hi) {
    double pad = (hi - lo) * 0.05;
    if (pad <= 0) pad = std::max(1e-6, std::fabs(lo) * 0.1 + 1e-6);
    lo -= pad;
    hi += pad;
  };
  widen(x0, x1);
  widen(y0, y1);

  Canvas cv(height, width);
  const int ml = 84, mr = 24, mt = 46, mb = 64;  // margins
  const int px0 = ml, px1 = width - mr, py0 = mt, py1 = height - mb;
  auto to_px = [&](double x) { return px0 + (x - x0) / (x1 - x0) * (px1 - px0); };
  auto to_py = [&](double y) { return py1 - (y - y0) / (y1 - y0) * (py1 - py0); };

  const std::uint32_t kAxis = 0x303030, kGrid = 0xd8d8d8, kText = 0x303030;

  // Grid and ticks.
  const double xstep = nice_step(x1 - x0, 6), ystep = nice_step(y1 - y0, 6);
  for (double t = std::ceil(x0 / xstep) * xstep; t <= x1 + 1e-12 * xstep; t += xstep) {
    const int px = static_cast<int>(std::lround(to_px(t)));
    cv.vline(px, py0, py1, kGrid);
    const std::string lab = format_tick(t);
    cv.text(px - Canvas::text_width(lab, 1) / 2, py1 + 8, lab, 1, kText);
  }
  for (double t = std::ceil(y0 / ystep) * ystep; t <= y1 + 1e-12 * ystep; t += ystep) {
    const int py = static_cast<int>(std::lround(to_py(t)));
    cv.hline(px0, px1, py, kGrid);
    const std::string lab = format_tick(t);
    cv.text(px0 - Canvas::text_width(lab, 1) - 6, py - 3, lab, 1, kText);
  }
  // Axes box.
  cv.hline(px0, px1, py1, kAxis);
  cv.hline(px0, px1, py0, kAxis);
  cv.vline(px0, py0, py1, kAxis);
  cv.vline(px1, py0, py1, kAxis);

  // Series.
  for (const PlotSeries& s : series) {
    std::vector<std::size_t> order(s.x.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return s.x[a] < s.x[b]; });
    for (std::size_t i = 1; i < order.size(); ++i)
      cv.line(to_px(s.x[order[i - 1]]), to_py(s.y[order[i - 1]]), to_px(s.x[order[i]]),
              to_py(s.y[order[i]]), s.rgb, 2);
    for (std::size_t i = 0; i < s.x.size(); ++i)
      cv.marker(static_cast<int>(std::lround(to_px(s.x[i]))),
                static_cast<int>(std::lround(to_py(s.y[i]))), s.rgb);
  }

  // Legend (top right, inside the plot area).
  int ly = py0 + 10;
  for (const PlotSeries& s : series) {
    const int lw = Canvas::text_width(s.label, 1);
    const int lx = px1 - lw - 30;
    for (int oy = 0; oy < 8; ++oy)
      for (int ox = 0; ox < 8; ++ox) cv.set(lx + ox, ly + oy, s.rgb);
    cv.text(lx + 14, ly, s.label, 1, kText);
    ly += 16;
  }

  // Title and axis labels.
  cv.text((width - Canvas::text_width(title, 2)) / 2, 12, title, 2, kText);
  cv.text((px0 + px1 - Canvas::text_width(xlabel, 2)) / 2, height - 34, xlabel, 2, kText);
  cv.text(8, py0 - 24, ylabel, 2, kText);

  write_png_rgb8(path, cv.img);
}

}  // namespace llss
