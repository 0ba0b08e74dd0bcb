// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "llss/errors.hpp"

namespace llss {
namespace {

constexpr int kWin = 11;
constexpr double kSigma = 1.5;
constexpr double kK1 = 0.01;
constexpr double kK2 = 0.03;
constexpr double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};

// Planar image: one vector<double> of h*w values per channel.
struct Planes {
  int h = 0, w = 0;
  std::vector<std::vector<double>> ch;
};

Planes to_planes(const TensorF& t) {
  Planes p;
  int n, c;
  if (t.shape.size() == 3) {
    n = 1;
    c = t.dim(0);
    p.h = t.dim(1);
    p.w = t.dim(2);
  } else if (t.shape.size() == 4) {
    n = t.dim(0);
    c = t.dim(1);
    p.h = t.dim(2);
    p.w = t.dim(3);
  } else {
    throw DataError("metric input must be (C,H,W) or (N,C,H,W)");
  }
  p.ch.resize(static_cast<std::size_t>(n) * c);
  const std::size_t plane = static_cast<std::size_t>(p.h) * p.w;
  for (std::size_t i = 0; i < p.ch.size(); ++i) {
    p.ch[i].resize(plane);
    for (std::size_t j = 0; j < plane; ++j)
      p.ch[i][j] = static_cast<double>(t.v[i * plane + j]);
  }
  return p;
}

std::vector<double> gaussian_window() {
  std::vector<double> k(kWin);
  double sum = 0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    k[i] = std::exp(-d * d / (2.0 * kSigma * kSigma));
    sum += k[i];
  }
  for (double& v : k) v /= sum;
  return k;
}

// Separable valid-only filtering with the 11-tap Gaussian.
std::vector<double> filter_valid(const std::vector<double>& img, int h, int w,
                                 const std::vector<double>& k) {
  const int oh = h - kWin + 1, ow = w - kWin + 1;
  std::vector<double> rows(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kWin; ++i) s += k[i] * img[static_cast<std::size_t>(y) * w + x + i];
      rows[static_cast<std::size_t>(y) * ow + x] = s;
    }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y)
    for (int x = 0; x < ow; ++x) {
      double s = 0;
      for (int i = 0; i < kWin; ++i) s += k[i] * rows[static_cast<std::size_t>(y + i) * ow + x];
      out[static_cast<std::size_t>(y) * ow + x] = s;
    }
  return out;
}

// Symmetric padding to even dims, then 2x2 valid average pooling.
void downsample2(Planes& p) {
  const int h = p.h, w = p.w;
  const int hp = h + (h & 1), wp = w + (w & 1);
  const int oh = hp / 2, ow = wp / 2;
  for (auto& img : p.ch) {
    std::vector<double> out(static_cast<std::size_t>(oh) * ow);
    auto at = [&](int y, int x) {
      if (y >= h) y = 2 * h - 1 - y;
      if (x >= w) x = 2 * w - 1 - x;
      return img[static_cast<std::size_t>(y) * w + x];
    };
    for (int y = 0; y < oh; ++y)
      for (int x = 0; x < ow; ++x)
        out[static_cast<std::size_t>(y) * ow + x] =
            0.25 * (at(2 * y, 2 * x) + at(2 * y, 2 * x + 1) + at(2 * y + 1, 2 * x) +
                    at(2 * y + 1, 2 * x + 1));
    img = std::move(out);
  }
  p.h = oh;
  p.w = ow;
}

// Per-channel spatial means of the full SSIM map (luminance times
// contrast-structure) and of the contrast-structure map alone.
struct ChannelTerms {
  std::vector<double> lcs;
  std::vector<double> cs;
};

ChannelTerms ssim_terms(const Planes& a, const Planes& b, const std::vector<double>& k) {
  const double c1 = kK1 * kK1, c2 = kK2 * kK2;
  const int h = a.h, w = a.w;
  ChannelTerms out;
  for (std::size_t c = 0; c < a.ch.size(); ++c) {
    const std::vector<double>& x = a.ch[c];
    const std::vector<double>& y = b.ch[c];
    const std::size_t plane = x.size();
    std::vector<double> xx(plane), yy(plane), xy(plane);
    for (std::size_t i = 0; i < plane; ++i) {
      xx[i] = x[i] * x[i];
      yy[i] = y[i] * y[i];
      xy[i] = x[i] * y[i];
    }
    const auto mx = filter_valid(x, h, w, k);
    const auto my = filter_valid(y, h, w, k);
    const auto mxx = filter_valid(xx, h, w, k);
    const auto myy = filter_valid(yy, h, w, k);
    const auto mxy = filter_valid(xy, h, w, k);
    double lcs_sum = 0, cs_sum = 0;
    for (std::size_t i = 0; i < mx.size(); ++i) {
      const double vx = mxx[i] - mx[i] * mx[i];
      const double vy = myy[i] - my[i] * my[i];
      const double cov = mxy[i] - mx[i] * my[i];
      const double l = (2 * mx[i] * my[i] + c1) / (mx[i] * mx[i] + my[i] * my[i] + c1);
      const double cs = (2 * cov + c2) / (vx + vy + c2);
      lcs_sum += l * cs;
      cs_sum += cs;
    }
    out.lcs.push_back(lcs_sum / static_cast<double>(mx.size()));
    out.cs.push_back(cs_sum / static_cast<double>(mx.size()));
  }
  return out;
}

}  // namespace

double mse(const TensorF& a, const TensorF& b) {
  if (!a.same_shape(b)) throw DataError("mse: shape mismatch");
  double s = 0;
  for (std::size_t i = 0; i < a.v.size(); ++i) {
    const double d = static_cast<double>(a.v[i]) - b.v[i];
    s += d * d;
  }
  return s / static_cast<double>(a.v.size());
}

double psnr(const TensorF& a, const TensorF& b) {
  return 10.0 * std::log10(1.0 / std::max(mse(a, b), 1e-12));
}

int ms_ssim_scales(int h, int w) {
  // Scale s needs the window to fit after s-1 halvings (ceil division).
  int m = std::min(h, w);
  int scales = 1;
  while (scales < 5 && (m + 1) / 2 >= kWin) {
    m = (m + 1) / 2;
    ++scales;
  }
  return scales;
}

double ms_ssim(const TensorF& x, const TensorF& y) {
  if (!x.same_shape(y)) throw DataError("ms_ssim: shape mismatch");
  Planes a = to_planes(x);
  Planes b = to_planes(y);
  if (std::min(a.h, a.w) < 16)
    throw DataError("ms_ssim: images smaller than 16 pixels per side");
  const int scales = ms_ssim_scales(a.h, a.w);
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += kWeights[s];
  const std::vector<double> k = gaussian_window();

  // The weighted product accumulates per channel; the channel average is
  // taken only at the end. Each scale's contrast-structure mean (and the
  // last scale's full-map mean) is clamped at zero before exponentiation.
  std::vector<double> prod(a.ch.size(), 1.0);
  for (int s = 0; s < scales; ++s) {
    if (s > 0) {
      downsample2(a);
      downsample2(b);
    }
    const ChannelTerms t = ssim_terms(a, b, k);
    const double weight = kWeights[s] / wsum;
    for (std::size_t c = 0; c < prod.size(); ++c) {
      const double term = (s == scales - 1) ? std::max(0.0, t.lcs[c]) : std::max(0.0, t.cs[c]);
      prod[c] *= std::pow(term, weight);
    }
  }
  double sum = 0;
  for (double v : prod) sum += v;
  return sum / static_cast<double>(prod.size());
}

double ssim(const TensorF& x, const TensorF& y) {
  if (!x.same_shape(y)) throw DataError("ssim: shape mismatch");
  Planes a = to_planes(x);
  Planes b = to_planes(y);
  if (std::min(a.h, a.w) < kWin) throw DataError("ssim: image smaller than the filter window");
  const ChannelTerms t = ssim_terms(a, b, gaussian_window());
  double sum = 0;
  for (double v : t.lcs) sum += v;
  return sum / static_cast<double>(t.lcs.size());
}

}  // namespace llss
