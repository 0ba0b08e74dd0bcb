// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Dense compute kernels in two flavors:
//   llss::ref  - plain serial loops, the correctness reference used by tests
//                and by tools/kernel_bench.
//   llss::par  - the production path: im2col + BLAS GEMM for (de)convolutions,
//                OpenMP elsewhere. Parallel loops only ever split independent
//                outputs and keep a fixed per-output accumulation order, so
//                results are reproducible run to run at any thread count.
//
// Shape conventions (NCHW):
//   conv weight   (Cout, Cin/groups, k, k), bias (Cout); empty bias = none.
//   deconv weight (Cin, Cout, k, k); output (H-1)*s - 2p + k + outpad.
//   deformable offsets (N, 2*k*k*G, H, W); channel 2*(g*k*k + kh*k + kw) holds
//   the vertical offset, +1 the horizontal one; input channel c belongs to
//   offset group c / (Cin/G); bilinear sampling, zero outside the border.
#pragma once

#include <cblas.h>

#include <cmath>
#include <vector>

#include "llss/errors.hpp"
#include "llss/tensor.hpp"

namespace llss {

enum class PadMode { Zero, Symmetric };

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}
inline int deconv_out_dim(int in, int k, int stride, int pad, int outpad) {
  return (in - 1) * stride - 2 * pad + k + outpad;
}

namespace detail {

template <typename T>
inline void gemm_rm(bool trans_a, bool trans_b, int m, int n, int k, T alpha, const T* a, int lda,
                    const T* b, int ldb, T beta, T* c, int ldc) {
  if constexpr (std::is_same_v<T, float>) {
    cblas_sgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  } else {
    cblas_dgemm(CblasRowMajor, trans_a ? CblasTrans : CblasNoTrans,
                trans_b ? CblasTrans : CblasNoTrans, m, n, k, alpha, a, lda, b, ldb, beta, c, ldc);
  }
}

// col[(c*k*k + kh*k + kw), oh*Wo + ow] = x[c, oh*s - p + kh, ow*s - p + kw] or 0.
template <typename T>
void im2col(const T* x, int cin, int h, int w, int k, int stride, int pad, int ho, int wo,
            T* col) {
  const int rows = cin * k * k;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int c = r / (k * k);
    const int kh = (r / k) % k;
    const int kw = r % k;
    T* dst = col + static_cast<std::int64_t>(r) * ho * wo;
    const T* src = x + static_cast<std::int64_t>(c) * h * w;
    for (int oh = 0; oh < ho; ++oh) {
      const int ih = oh * stride - pad + kh;
      for (int ow = 0; ow < wo; ++ow) {
        const int iw = ow * stride - pad + kw;
        dst[oh * wo + ow] =
            (ih >= 0 && ih < h && iw >= 0 && iw < w) ? src[ih * w + iw] : T(0);
      }
    }
  }
}

// Scatter-add transpose of im2col. Parallel over input channels: all k*k rows
// of one channel are handled by the same thread, so writes never race.
template <typename T>
void col2im_add(const T* col, int cin, int h, int w, int k, int stride, int pad, int ho, int wo,
                T* x) {
#pragma omp parallel for schedule(static)
  for (int c = 0; c < cin; ++c) {
    T* dst = x + static_cast<std::int64_t>(c) * h * w;
    for (int kh = 0; kh < k; ++kh) {
      for (int kw = 0; kw < k; ++kw) {
        const int r = (c * k + kh) * k + kw;
        const T* src = col + static_cast<std::int64_t>(r) * ho * wo;
        for (int oh = 0; oh < ho; ++oh) {
          const int ih = oh * stride - pad + kh;
          if (ih < 0 || ih >= h) continue;
          for (int ow = 0; ow < wo; ++ow) {
            const int iw = ow * stride - pad + kw;
            if (iw >= 0 && iw < w) dst[ih * w + iw] += src[oh * wo + ow];
          }
        }
      }
    }
  }
}

// Gather for transposed convolution: rows indexed by (co, kh, kw), columns by
// input position; entry = g[co, ih*s - p + kh, iw*s - p + kw] or 0.
template <typename T>
void im2col_deconv(const T* g, int cout, int ho, int wo, int k, int stride, int pad, int h, int w,
                   T* col) {
  const int rows = cout * k * k;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int co = r / (k * k);
    const int kh = (r / k) % k;
    const int kw = r % k;
    T* dst = col + static_cast<std::int64_t>(r) * h * w;
    const T* src = g + static_cast<std::int64_t>(co) * ho * wo;
    for (int ih = 0; ih < h; ++ih) {
      const int oh = ih * stride - pad + kh;
      for (int iw = 0; iw < w; ++iw) {
        const int ow = iw * stride - pad + kw;
        dst[ih * w + iw] =
            (oh >= 0 && oh < ho && ow >= 0 && ow < wo) ? src[oh * wo + ow] : T(0);
      }
    }
  }
}

struct BilinearTaps {
  int y0, x0;
  double fy, fx;
};
inline BilinearTaps taps(double y, double x) {
  const double fy0 = std::floor(y);
  const double fx0 = std::floor(x);
  return {static_cast<int>(fy0), static_cast<int>(fx0), y - fy0, x - fx0};
}

template <typename T>
inline T bilinear(const T* plane, int h, int w, double y, double x) {
  const BilinearTaps t = taps(y, x);
  auto px = [&](int yy, int xx) -> T {
    return (yy >= 0 && yy < h && xx >= 0 && xx < w) ? plane[yy * w + xx] : T(0);
  };
  const T v00 = px(t.y0, t.x0), v01 = px(t.y0, t.x0 + 1);
  const T v10 = px(t.y0 + 1, t.x0), v11 = px(t.y0 + 1, t.x0 + 1);
  const T fy = static_cast<T>(t.fy), fx = static_cast<T>(t.fx);
  return (T(1) - fy) * ((T(1) - fx) * v00 + fx * v01) + fy * ((T(1) - fx) * v10 + fx * v11);
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Serial reference kernels.
// ---------------------------------------------------------------------------
namespace ref {

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                     int pad, int groups) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), cing = w.dim(1), k = w.dim(2);
  if (cin != cing * groups || cout % groups != 0)
    throw ShapeError("conv2d: channel/group mismatch, x " + shape_str(x.shape) + " w " +
                     shape_str(w.shape));
  const int ho = conv_out_dim(h, k, stride, pad), wo = conv_out_dim(wd, k, stride, pad);
  const int coutg = cout / groups;
  Tensor<T> y({n, cout, ho, wo});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < cout; ++co) {
      const int g = co / coutg;
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          T acc = b.numel() ? b.v[co] : T(0);
          for (int ci = 0; ci < cing; ++ci)
            for (int kh = 0; kh < k; ++kh) {
              const int ih = oh * stride - pad + kh;
              if (ih < 0 || ih >= h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int iw = ow * stride - pad + kw;
                if (iw < 0 || iw >= wd) continue;
                acc += x.at(ni, g * cing + ci, ih, iw) * w.at(co, ci, kh, kw);
              }
            }
          y.at(ni, co, oh, ow) = acc;
        }
    }
  return y;
}

template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride, int pad,
                int groups, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), cing = w.dim(1), k = w.dim(2);
  const int ho = gy.dim(2), wo = gy.dim(3);
  const int coutg = cout / groups;
  if (gx) *gx = Tensor<T>::zeros(x.shape);
  if (gw) *gw = Tensor<T>::zeros(w.shape);
  if (gb) *gb = Tensor<T>::zeros({cout});
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < cout; ++co) {
      const int g = co / coutg;
      for (int oh = 0; oh < ho; ++oh)
        for (int ow = 0; ow < wo; ++ow) {
          const T go = gy.at(ni, co, oh, ow);
          if (gb) gb->v[co] += go;
          for (int ci = 0; ci < cing; ++ci)
            for (int kh = 0; kh < k; ++kh) {
              const int ih = oh * stride - pad + kh;
              if (ih < 0 || ih >= h) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int iw = ow * stride - pad + kw;
                if (iw < 0 || iw >= wd) continue;
                if (gx) gx->at(ni, g * cing + ci, ih, iw) += go * w.at(co, ci, kh, kw);
                if (gw) gw->at(co, ci, kh, kw) += go * x.at(ni, g * cing + ci, ih, iw);
              }
            }
        }
    }
}

template <typename T>
Tensor<T> deconv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                       int pad, int outpad) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(1), k = w.dim(2);
  if (cin != w.dim(0))
    throw ShapeError("deconv2d: channel mismatch, x " + shape_str(x.shape) + " w " +
                     shape_str(w.shape));
  const int ho = deconv_out_dim(h, k, stride, pad, outpad);
  const int wo = deconv_out_dim(wd, k, stride, pad, outpad);
  Tensor<T> y({n, cout, ho, wo});
  if (b.numel())
    for (int ni = 0; ni < n; ++ni)
      for (int co = 0; co < cout; ++co)
        for (int i = 0; i < ho * wo; ++i) y.v[(ni * cout + co) * ho * wo + i] = b.v[co];
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < cin; ++ci)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < wd; ++iw) {
          const T xv = x.at(ni, ci, ih, iw);
          for (int co = 0; co < cout; ++co)
            for (int kh = 0; kh < k; ++kh) {
              const int oh = ih * stride - pad + kh;
              if (oh < 0 || oh >= ho) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int ow = iw * stride - pad + kw;
                if (ow < 0 || ow >= wo) continue;
                y.at(ni, co, oh, ow) += xv * w.at(ci, co, kh, kw);
              }
            }
        }
  return y;
}

template <typename T>
void deconv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride,
                  int pad, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(1), k = w.dim(2);
  const int ho = gy.dim(2), wo = gy.dim(3);
  if (gx) *gx = Tensor<T>::zeros(x.shape);
  if (gw) *gw = Tensor<T>::zeros(w.shape);
  if (gb) *gb = Tensor<T>::zeros({cout});
  if (gb)
    for (int ni = 0; ni < n; ++ni)
      for (int co = 0; co < cout; ++co)
        for (int i = 0; i < ho * wo; ++i) gb->v[co] += gy.v[(ni * cout + co) * ho * wo + i];
  for (int ni = 0; ni < n; ++ni)
    for (int ci = 0; ci < cin; ++ci)
      for (int ih = 0; ih < h; ++ih)
        for (int iw = 0; iw < wd; ++iw) {
          T acc = 0;
          for (int co = 0; co < cout; ++co)
            for (int kh = 0; kh < k; ++kh) {
              const int oh = ih * stride - pad + kh;
              if (oh < 0 || oh >= ho) continue;
              for (int kw = 0; kw < k; ++kw) {
                const int ow = iw * stride - pad + kw;
                if (ow < 0 || ow >= wo) continue;
                const T go = gy.at(ni, co, oh, ow);
                acc += go * w.at(ci, co, kh, kw);
                if (gw) gw->at(ci, co, kh, kw) += go * x.at(ni, ci, ih, iw);
              }
            }
          if (gx) gx->at(ni, ci, ih, iw) = acc;
        }
}

template <typename T>
Tensor<T> deform_conv2d_fwd(const Tensor<T>& x, const Tensor<T>& off, const Tensor<T>& w,
                            const Tensor<T>& b, int groups) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  const int pad = k / 2;
  if (off.dim(1) != 2 * k * k * groups)
    throw ShapeError("deform_conv2d: offsets need " + std::to_string(2 * k * k * groups) +
                     " channels, got " + std::to_string(off.dim(1)));
  if (cin % groups != 0) throw ShapeError("deform_conv2d: cin not divisible by offset groups");
  Tensor<T> y({n, cout, h, wd});
  const int cg = cin / groups;
  for (int ni = 0; ni < n; ++ni)
    for (int co = 0; co < cout; ++co)
      for (int oh = 0; oh < h; ++oh)
        for (int ow = 0; ow < wd; ++ow) {
          T acc = b.numel() ? b.v[co] : T(0);
          for (int ci = 0; ci < cin; ++ci) {
            const int g = ci / cg;
            for (int kh = 0; kh < k; ++kh)
              for (int kw = 0; kw < k; ++kw) {
                const int t = kh * k + kw;
                const double dy = off.at(ni, 2 * (g * k * k + t), oh, ow);
                const double dx = off.at(ni, 2 * (g * k * k + t) + 1, oh, ow);
                const double sy = oh - pad + kh + dy;
                const double sx = ow - pad + kw + dx;
                acc += w.at(co, ci, kh, kw) *
                       detail::bilinear(x.data() + x.idx4(ni, ci, 0, 0), h, wd, sy, sx);
              }
          }
          y.at(ni, co, oh, ow) = acc;
        }
  return y;
}

}  // namespace ref

// ---------------------------------------------------------------------------
// Production kernels: GEMM-backed convolutions, OpenMP elsewhere.
// ---------------------------------------------------------------------------
namespace par {

template <typename T>
Tensor<T> conv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                     int pad, int groups) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), cing = w.dim(1), k = w.dim(2);
  if (cin != cing * groups || cout % groups != 0)
    throw ShapeError("conv2d: channel/group mismatch, x " + shape_str(x.shape) + " w " +
                     shape_str(w.shape));
  const int ho = conv_out_dim(h, k, stride, pad), wo = conv_out_dim(wd, k, stride, pad);
  const int coutg = cout / groups;
  Tensor<T> y({n, cout, ho, wo});
  std::vector<T> col(static_cast<std::size_t>(cing) * k * k * ho * wo);
  for (int ni = 0; ni < n; ++ni)
    for (int g = 0; g < groups; ++g) {
      detail::im2col(x.data() + x.idx4(ni, g * cing, 0, 0), cing, h, wd, k, stride, pad, ho, wo,
                     col.data());
      detail::gemm_rm<T>(false, false, coutg, ho * wo, cing * k * k, T(1),
                         w.data() + static_cast<std::int64_t>(g) * coutg * cing * k * k,
                         cing * k * k, col.data(), ho * wo, T(0),
                         y.data() + y.idx4(ni, g * coutg, 0, 0), ho * wo);
    }
  if (b.numel()) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co)
      for (int ni = 0; ni < n; ++ni) {
        T* dst = y.data() + y.idx4(ni, co, 0, 0);
        for (int i = 0; i < ho * wo; ++i) dst[i] += b.v[co];
      }
  }
  return y;
}

template <typename T>
void conv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride, int pad,
                int groups, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const int n = x.dim(0), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), cing = w.dim(1), k = w.dim(2);
  const int ho = gy.dim(2), wo = gy.dim(3);
  const int coutg = cout / groups;
  if (gx) *gx = Tensor<T>::zeros(x.shape);
  if (gw) *gw = Tensor<T>::zeros(w.shape);
  if (gb) {
    *gb = Tensor<T>::zeros({cout});
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      T acc = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* src = gy.data() + gy.idx4(ni, co, 0, 0);
        for (int i = 0; i < ho * wo; ++i) acc += src[i];
      }
      gb->v[co] = acc;
    }
  }
  std::vector<T> col(static_cast<std::size_t>(cing) * k * k * ho * wo);
  for (int ni = 0; ni < n; ++ni)
    for (int g = 0; g < groups; ++g) {
      const T* wg = w.data() + static_cast<std::int64_t>(g) * coutg * cing * k * k;
      const T* gyg = gy.data() + gy.idx4(ni, g * coutg, 0, 0);
      if (gw) {
        detail::im2col(x.data() + x.idx4(ni, g * cing, 0, 0), cing, h, wd, k, stride, pad, ho, wo,
                       col.data());
        detail::gemm_rm<T>(false, true, coutg, cing * k * k, ho * wo, T(1), gyg, ho * wo,
                           col.data(), ho * wo, T(1),
                           gw->data() + static_cast<std::int64_t>(g) * coutg * cing * k * k,
                           cing * k * k);
      }
      if (gx) {
        detail::gemm_rm<T>(true, false, cing * k * k, ho * wo, coutg, T(1), wg, cing * k * k, gyg,
                           ho * wo, T(0), col.data(), ho * wo);
        detail::col2im_add(col.data(), cing, h, wd, k, stride, pad, ho, wo,
                           gx->data() + gx->idx4(ni, g * cing, 0, 0));
      }
    }
}

template <typename T>
Tensor<T> deconv2d_fwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& b, int stride,
                       int pad, int outpad) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(1), k = w.dim(2);
  if (cin != w.dim(0))
    throw ShapeError("deconv2d: channel mismatch, x " + shape_str(x.shape) + " w " +
                     shape_str(w.shape));
  const int ho = deconv_out_dim(h, k, stride, pad, outpad);
  const int wo = deconv_out_dim(wd, k, stride, pad, outpad);
  Tensor<T> y({n, cout, ho, wo});
  std::vector<T> col(static_cast<std::size_t>(cout) * k * k * h * wd);
  for (int ni = 0; ni < n; ++ni) {
    // col = W^T (Cout*k*k x Cin) * x (Cin x H*W), then scatter by tap.
    detail::gemm_rm<T>(true, false, cout * k * k, h * wd, cin, T(1), w.data(), cout * k * k,
                       x.data() + x.idx4(ni, 0, 0, 0), h * wd, T(0), col.data(), h * wd);
    T* yp = y.data() + y.idx4(ni, 0, 0, 0);
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      T* dst = yp + static_cast<std::int64_t>(co) * ho * wo;
      for (int i = 0; i < ho * wo; ++i) dst[i] = b.numel() ? b.v[co] : T(0);
      for (int kh = 0; kh < k; ++kh)
        for (int kw = 0; kw < k; ++kw) {
          const T* src = col.data() + (static_cast<std::int64_t>(co) * k * k + kh * k + kw) * h * wd;
          for (int ih = 0; ih < h; ++ih) {
            const int oh = ih * stride - pad + kh;
            if (oh < 0 || oh >= ho) continue;
            for (int iw = 0; iw < wd; ++iw) {
              const int ow = iw * stride - pad + kw;
              if (ow >= 0 && ow < wo) dst[oh * wo + ow] += src[ih * wd + iw];
            }
          }
        }
    }
  }
  return y;
}

template <typename T>
void deconv2d_bwd(const Tensor<T>& x, const Tensor<T>& w, const Tensor<T>& gy, int stride,
                  int pad, Tensor<T>* gx, Tensor<T>* gw, Tensor<T>* gb) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(1), k = w.dim(2);
  const int ho = gy.dim(2), wo = gy.dim(3);
  if (gx) *gx = Tensor<T>::zeros(x.shape);
  if (gw) *gw = Tensor<T>::zeros(w.shape);
  if (gb) {
    *gb = Tensor<T>::zeros({cout});
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co) {
      T acc = 0;
      for (int ni = 0; ni < n; ++ni) {
        const T* src = gy.data() + gy.idx4(ni, co, 0, 0);
        for (int i = 0; i < ho * wo; ++i) acc += src[i];
      }
      gb->v[co] = acc;
    }
  }
  std::vector<T> col(static_cast<std::size_t>(cout) * k * k * h * wd);
  for (int ni = 0; ni < n; ++ni) {
    detail::im2col_deconv(gy.data() + gy.idx4(ni, 0, 0, 0), cout, ho, wo, k, stride, pad, h, wd,
                          col.data());
    if (gx)
      detail::gemm_rm<T>(false, false, cin, h * wd, cout * k * k, T(1), w.data(), cout * k * k,
                         col.data(), h * wd, T(0), gx->data() + gx->idx4(ni, 0, 0, 0), h * wd);
    if (gw)
      detail::gemm_rm<T>(false, true, cin, cout * k * k, h * wd, T(1),
                         x.data() + x.idx4(ni, 0, 0, 0), h * wd, col.data(), h * wd, T(1),
                         gw->data(), cout * k * k);
  }
}

// Deformed im2col: like im2col but sampling at grid + learned offsets.
template <typename T>
void im2col_deform(const T* x, const T* off, int cin, int h, int w, int k, int groups, T* col) {
  const int pad = k / 2;
  const int cg = cin / groups;
  const int rows = cin * k * k;
#pragma omp parallel for schedule(static)
  for (int r = 0; r < rows; ++r) {
    const int ci = r / (k * k);
    const int kh = (r / k) % k;
    const int kw = r % k;
    const int g = ci / cg;
    const int t = kh * k + kw;
    const T* offy = off + static_cast<std::int64_t>(2 * (g * k * k + t)) * h * w;
    const T* offx = off + static_cast<std::int64_t>(2 * (g * k * k + t) + 1) * h * w;
    const T* plane = x + static_cast<std::int64_t>(ci) * h * w;
    T* dst = col + static_cast<std::int64_t>(r) * h * w;
    for (int oh = 0; oh < h; ++oh)
      for (int ow = 0; ow < w; ++ow) {
        const double sy = oh - pad + kh + static_cast<double>(offy[oh * w + ow]);
        const double sx = ow - pad + kw + static_cast<double>(offx[oh * w + ow]);
        dst[oh * w + ow] = detail::bilinear(plane, h, w, sy, sx);
      }
  }
}

template <typename T>
Tensor<T> deform_conv2d_fwd(const Tensor<T>& x, const Tensor<T>& off, const Tensor<T>& w,
                            const Tensor<T>& b, int groups) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  if (off.dim(1) != 2 * k * k * groups)
    throw ShapeError("deform_conv2d: offsets need " + std::to_string(2 * k * k * groups) +
                     " channels, got " + std::to_string(off.dim(1)));
  if (cin % groups != 0) throw ShapeError("deform_conv2d: cin not divisible by offset groups");
  Tensor<T> y({n, cout, h, wd});
  std::vector<T> col(static_cast<std::size_t>(cin) * k * k * h * wd);
  for (int ni = 0; ni < n; ++ni) {
    im2col_deform(x.data() + x.idx4(ni, 0, 0, 0), off.data() + off.idx4(ni, 0, 0, 0), cin, h, wd,
                  k, groups, col.data());
    detail::gemm_rm<T>(false, false, cout, h * wd, cin * k * k, T(1), w.data(), cin * k * k,
                       col.data(), h * wd, T(0), y.data() + y.idx4(ni, 0, 0, 0), h * wd);
  }
  if (b.numel()) {
#pragma omp parallel for schedule(static)
    for (int co = 0; co < cout; ++co)
      for (int ni = 0; ni < n; ++ni) {
        T* dst = y.data() + y.idx4(ni, co, 0, 0);
        for (int i = 0; i < h * wd; ++i) dst[i] += b.v[co];
      }
  }
  return y;
}

template <typename T>
void deform_conv2d_bwd(const Tensor<T>& x, const Tensor<T>& off, const Tensor<T>& w,
                       const Tensor<T>& gy, int groups, Tensor<T>* gx, Tensor<T>* goff,
                       Tensor<T>* gw, Tensor<T>* gb) {
  const int n = x.dim(0), cin = x.dim(1), h = x.dim(2), wd = x.dim(3);
  const int cout = w.dim(0), k = w.dim(2);
  const int pad = k / 2;
  const int cg = cin / groups;
  if (gx) *gx = Tensor<T>::zeros(x.shape);
  if (goff) *goff = Tensor<T>::zeros(off.shape);
  if (gw) *gw = Tensor<T>::zeros(w.shape);
  if (gb) {
    *gb = Tensor<T>::zeros({cout});
    for (int ni = 0; ni < n; ++ni)
      for (int co = 0; co < cout; ++co) {
        const T* src = gy.data() + gy.idx4(ni, co, 0, 0);
        for (int i = 0; i < h * wd; ++i) gb->v[co] += src[i];
      }
  }
  std::vector<T> col(static_cast<std::size_t>(cin) * k * k * h * wd);
  std::vector<T> colg(col.size());
  for (int ni = 0; ni < n; ++ni) {
    const T* xp = x.data() + x.idx4(ni, 0, 0, 0);
    const T* op = off.data() + off.idx4(ni, 0, 0, 0);
    const T* gp = gy.data() + gy.idx4(ni, 0, 0, 0);
    if (gw) {
      im2col_deform(xp, op, cin, h, wd, k, groups, col.data());
      detail::gemm_rm<T>(false, true, cout, cin * k * k, h * wd, T(1), gp, h * wd, col.data(),
                         h * wd, T(1), gw->data(), cin * k * k);
    }
    if (!gx && !goff) continue;
    // colg = W^T * gy; gradient w.r.t. each sampled value.
    detail::gemm_rm<T>(true, false, cin * k * k, h * wd, cout, T(1), w.data(), cin * k * k, gp,
                       h * wd, T(0), colg.data(), h * wd);
    if (gx) {
      // Scatter through the bilinear taps; one thread owns one input channel.
      T* gxp = gx->data() + gx->idx4(ni, 0, 0, 0);
#pragma omp parallel for schedule(static)
      for (int ci = 0; ci < cin; ++ci) {
        T* gplane = gxp + static_cast<std::int64_t>(ci) * h * wd;
        const int g = ci / cg;
        for (int kh = 0; kh < k; ++kh)
          for (int kw = 0; kw < k; ++kw) {
            const int t = kh * k + kw;
            const T* src = colg.data() + (static_cast<std::int64_t>(ci) * k * k + t) * h * wd;
            const T* offy = op + static_cast<std::int64_t>(2 * (g * k * k + t)) * h * wd;
            const T* offx = op + static_cast<std::int64_t>(2 * (g * k * k + t) + 1) * h * wd;
            for (int oh = 0; oh < h; ++oh)
              for (int ow = 0; ow < wd; ++ow) {
                const T go = src[oh * wd + ow];
                if (go == T(0)) continue;
                const double sy = oh - pad + kh + static_cast<double>(offy[oh * wd + ow]);
                const double sx = ow - pad + kw + static_cast<double>(offx[oh * wd + ow]);
                const detail::BilinearTaps tp = detail::taps(sy, sx);
                auto add = [&](int yy, int xx, double wgt) {
                  if (yy >= 0 && yy < h && xx >= 0 && xx < wd)
                    gplane[yy * wd + xx] += go * static_cast<T>(wgt);
                };
                add(tp.y0, tp.x0, (1 - tp.fy) * (1 - tp.fx));
                add(tp.y0, tp.x0 + 1, (1 - tp.fy) * tp.fx);
                add(tp.y0 + 1, tp.x0, tp.fy * (1 - tp.fx));
                add(tp.y0 + 1, tp.x0 + 1, tp.fy * tp.fx);
              }
          }
      }
    }
    if (goff) {
      T* gop = goff->data() + goff->idx4(ni, 0, 0, 0);
      const int noff = groups * k * k;
#pragma omp parallel for schedule(static)
      for (int gt = 0; gt < noff; ++gt) {
        const int g = gt / (k * k);
        const int t = gt % (k * k);
        const int kh = t / k, kw = t % k;
        const T* offy = op + static_cast<std::int64_t>(2 * gt) * h * wd;
        const T* offx = op + static_cast<std::int64_t>(2 * gt + 1) * h * wd;
        T* gy_off = gop + static_cast<std::int64_t>(2 * gt) * h * wd;
        T* gx_off = gop + static_cast<std::int64_t>(2 * gt + 1) * h * wd;
        for (int oh = 0; oh < h; ++oh)
          for (int ow = 0; ow < wd; ++ow) {
            const double sy = oh - pad + kh + static_cast<double>(offy[oh * wd + ow]);
            const double sx = ow - pad + kw + static_cast<double>(offx[oh * wd + ow]);
            const detail::BilinearTaps tp = detail::taps(sy, sx);
            double ay = 0, ax = 0;
            for (int ci = g * cg; ci < (g + 1) * cg; ++ci) {
              const T go =
                  colg[(static_cast<std::int64_t>(ci) * k * k + t) * h * wd + oh * wd + ow];
              if (go == T(0)) continue;
              const T* plane = xp + static_cast<std::int64_t>(ci) * h * wd;
              auto px = [&](int yy, int xx) -> double {
                return (yy >= 0 && yy < h && xx >= 0 && xx < wd)
                           ? static_cast<double>(plane[yy * wd + xx])
                           : 0.0;
              };
              const double v00 = px(tp.y0, tp.x0), v01 = px(tp.y0, tp.x0 + 1);
              const double v10 = px(tp.y0 + 1, tp.x0), v11 = px(tp.y0 + 1, tp.x0 + 1);
              ay += static_cast<double>(go) *
                    ((1 - tp.fx) * (v10 - v00) + tp.fx * (v11 - v01));
              ax += static_cast<double>(go) *
                    ((1 - tp.fy) * (v01 - v00) + tp.fy * (v11 - v10));
            }
            gy_off[oh * wd + ow] = static_cast<T>(ay);
            gx_off[oh * wd + ow] = static_cast<T>(ax);
          }
      }
    }
  }
}

}  // namespace par

// ---------------------------------------------------------------------------
// Order-preserving kernels shared by both flavors (bit-identical under OMP
// because threads own disjoint outputs with serial inner accumulation).
// ---------------------------------------------------------------------------

// out(n,c,h,w) = x(n,c,h,w-d), zero where w-d is out of range.
template <typename T>
Tensor<T> shift_h(const Tensor<T>& x, int d) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y(x.shape);
  const std::int64_t planes = static_cast<std::int64_t>(n) * c * h;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * w;
    T* dst = y.data() + p * w;
    for (int i = 0; i < w; ++i) {
      const int j = i - d;
      dst[i] = (j >= 0 && j < w) ? src[j] : T(0);
    }
  }
  return y;
}

// Group-wise inner product: out(n,g,h,w) = mean over the group's channels of
// a*b, i.e. (1/(C/G)) * sum_{c in group g} a(c)*b(c).
template <typename T>
Tensor<T> group_dot(const Tensor<T>& a, const Tensor<T>& b, int groups) {
  const int n = a.dim(0), c = a.dim(1), h = a.dim(2), w = a.dim(3);
  if (!a.same_shape(b)) throw ShapeError("group_dot: shape mismatch");
  if (c % groups != 0) throw ShapeError("group_dot: channels not divisible by groups");
  const int cg = c / groups;
  Tensor<T> y({n, groups, h, w});
  const T inv = T(1) / static_cast<T>(cg);
#pragma omp parallel for schedule(static) collapse(2)
  for (int ni = 0; ni < n; ++ni)
    for (int g = 0; g < groups; ++g) {
      T* dst = y.data() + y.idx4(ni, g, 0, 0);
      for (int i = 0; i < h * w; ++i) dst[i] = T(0);
      for (int ci = g * cg; ci < (g + 1) * cg; ++ci) {
        const T* pa = a.data() + a.idx4(ni, ci, 0, 0);
        const T* pb = b.data() + b.idx4(ni, ci, 0, 0);
        for (int i = 0; i < h * w; ++i) dst[i] += pa[i] * pb[i];
      }
      for (int i = 0; i < h * w; ++i) dst[i] *= inv;
    }
  return y;
}

template <typename T>
Tensor<T> avgpool2_fwd(const Tensor<T>& x) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  if (h % 2 || w % 2) throw ShapeError("avgpool2: H and W must be even, got " + shape_str(x.shape));
  Tensor<T> y({n, c, h / 2, w / 2});
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * (h / 2) * (w / 2);
    for (int oh = 0; oh < h / 2; ++oh)
      for (int ow = 0; ow < w / 2; ++ow)
        dst[oh * (w / 2) + ow] =
            (src[(2 * oh) * w + 2 * ow] + src[(2 * oh) * w + 2 * ow + 1] +
             src[(2 * oh + 1) * w + 2 * ow] + src[(2 * oh + 1) * w + 2 * ow + 1]) /
            T(4);
  }
  return y;
}

template <typename T>
Tensor<T> avgpool2_bwd(const Tensor<T>& gy, int h, int w) {
  const int n = gy.dim(0), c = gy.dim(1);
  Tensor<T> gx({n, c, h, w});
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = gy.data() + p * (h / 2) * (w / 2);
    T* dst = gx.data() + p * h * w;
    for (int oh = 0; oh < h / 2; ++oh)
      for (int ow = 0; ow < w / 2; ++ow) {
        const T g = src[oh * (w / 2) + ow] / T(4);
        dst[(2 * oh) * w + 2 * ow] = g;
        dst[(2 * oh) * w + 2 * ow + 1] = g;
        dst[(2 * oh + 1) * w + 2 * ow] = g;
        dst[(2 * oh + 1) * w + 2 * ow + 1] = g;
      }
  }
  return gx;
}

inline int reflect_index(int i, int n) {
  // TF SYMMETRIC reflection (edge included): -1 -> 0, n -> n-1.
  if (i < 0) return -i - 1;
  if (i >= n) return 2 * n - 1 - i;
  return i;
}

template <typename T>
Tensor<T> pad2d_fwd(const Tensor<T>& x, int left, int right, int top, int bottom, PadMode mode) {
  const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
  Tensor<T> y({n, c, h + top + bottom, w + left + right});
  const int ho = h + top + bottom, wo = w + left + right;
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = x.data() + p * h * w;
    T* dst = y.data() + p * ho * wo;
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow) {
        const int ih = oh - top, iw = ow - left;
        if (ih >= 0 && ih < h && iw >= 0 && iw < w)
          dst[oh * wo + ow] = src[ih * w + iw];
        else if (mode == PadMode::Zero)
          dst[oh * wo + ow] = T(0);
        else
          dst[oh * wo + ow] = src[reflect_index(ih, h) * w + reflect_index(iw, w)];
      }
  }
  return y;
}

template <typename T>
Tensor<T> pad2d_bwd(const Tensor<T>& gy, int left, int right, int top, int bottom, PadMode mode,
                    int h, int w) {
  const int n = gy.dim(0), c = gy.dim(1);
  const int ho = h + top + bottom, wo = w + left + right;
  Tensor<T> gx({n, c, h, w});
  const std::int64_t planes = static_cast<std::int64_t>(n) * c;
#pragma omp parallel for schedule(static)
  for (std::int64_t p = 0; p < planes; ++p) {
    const T* src = gy.data() + p * ho * wo;
    T* dst = gx.data() + p * h * w;
    for (int i = 0; i < h * w; ++i) dst[i] = T(0);
    for (int oh = 0; oh < ho; ++oh)
      for (int ow = 0; ow < wo; ++ow) {
        const int ih = oh - top, iw = ow - left;
        if (ih >= 0 && ih < h && iw >= 0 && iw < w)
          dst[ih * w + iw] += src[oh * wo + ow];
        else if (mode == PadMode::Symmetric)
          dst[reflect_index(ih, h) * w + reflect_index(iw, w)] += src[oh * wo + ow];
      }
  }
  return gx;
}

}  // namespace llss
