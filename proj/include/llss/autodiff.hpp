// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Eager reverse-mode autodiff on a flat tape. Every op computes its value
// immediately and, when any input requires gradients, records a closure that
// scatters this node's gradient into its parents. backward(root) walks the
// tape once in reverse creation order, which is already a topological order.
//
// Values are computed the moment an op is built, so callers may freely
// interleave graph construction with reads of intermediate values (the codec
// does: it quantizes latents mid-graph and feeds the result back as a leaf).
#pragma once

#include <functional>
#include <vector>

#include "llss/kernels.hpp"
#include "llss/math.hpp"
#include "llss/tensor.hpp"

namespace llss {

template <typename T>
class Graph {
 public:
  struct Node {
    Tensor<T> val;
    Tensor<T> grad;  // allocated on first contribution during backward
    bool needs_grad = false;
    std::function<void(Graph&, const Tensor<T>&)> back;  // consumes this node's grad
  };

  std::vector<Node> nodes;

  const Tensor<T>& val(int id) const { return nodes[id].val; }
  const Tensor<T>& grad(int id) const { return nodes[id].grad; }
  bool needs_grad(int id) const { return nodes[id].needs_grad; }

  int leaf(Tensor<T> v, bool requires_grad) {
    Node n;
    n.val = std::move(v);
    n.needs_grad = requires_grad;
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }

  // Value copy that blocks gradient flow.
  int detach(int a) { return leaf(nodes[a].val, false); }

  void accum(int id, const Tensor<T>& g) {
    Node& n = nodes[id];
    if (!n.needs_grad) return;
    if (n.grad.numel() == 0) n.grad = Tensor<T>::zeros(n.val.shape);
    T* dst = n.grad.data();
    const T* src = g.data();
    const std::int64_t m = g.numel();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) dst[i] += src[i];
  }

  void backward(int root) {
    Node& r = nodes[root];
    r.grad = Tensor<T>::full(r.val.shape, T(1));
    for (int id = root; id >= 0; --id) {
      Node& n = nodes[id];
      if (n.back && n.grad.numel() != 0) n.back(*this, n.grad);
    }
  }

  // -------------------------------------------------------------------------
  // Elementwise and scalar ops.
  // -------------------------------------------------------------------------

  int add(int a, int b) {
    check_same(a, b, "add");
    Tensor<T> out(nodes[a].val.shape);
    ew2(out, a, b, [](T x, T y) { return x + y; });
    return record(out, {a, b}, [a, b](Graph& g, const Tensor<T>& go) {
      g.accum(a, go);
      g.accum(b, go);
    });
  }

  int sub(int a, int b) {
    check_same(a, b, "sub");
    Tensor<T> out(nodes[a].val.shape);
    ew2(out, a, b, [](T x, T y) { return x - y; });
    return record(out, {a, b}, [a, b](Graph& g, const Tensor<T>& go) {
      g.accum(a, go);
      if (!g.nodes[b].needs_grad) return;
      Tensor<T> gb(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i) gb.v[i] = -go.v[i];
      g.accum(b, gb);
    });
  }

  int mul(int a, int b) {
    check_same(a, b, "mul");
    Tensor<T> out(nodes[a].val.shape);
    ew2(out, a, b, [](T x, T y) { return x * y; });
    return record(out, {a, b}, [a, b](Graph& g, const Tensor<T>& go) {
      const std::int64_t m = go.numel();
      if (g.nodes[a].needs_grad) {
        Tensor<T> ga(go.shape);
        for (std::int64_t i = 0; i < m; ++i) ga.v[i] = go.v[i] * g.nodes[b].val.v[i];
        g.accum(a, ga);
      }
      if (g.nodes[b].needs_grad) {
        Tensor<T> gb(go.shape);
        for (std::int64_t i = 0; i < m; ++i) gb.v[i] = go.v[i] * g.nodes[a].val.v[i];
        g.accum(b, gb);
      }
    });
  }

  int divv(int a, int b) {
    check_same(a, b, "div");
    Tensor<T> out(nodes[a].val.shape);
    ew2(out, a, b, [](T x, T y) { return x / y; });
    return record(out, {a, b}, [a, b](Graph& g, const Tensor<T>& go) {
      const std::int64_t m = go.numel();
      if (g.nodes[a].needs_grad) {
        Tensor<T> ga(go.shape);
        for (std::int64_t i = 0; i < m; ++i) ga.v[i] = go.v[i] / g.nodes[b].val.v[i];
        g.accum(a, ga);
      }
      if (g.nodes[b].needs_grad) {
        Tensor<T> gb(go.shape);
        for (std::int64_t i = 0; i < m; ++i) {
          const T bv = g.nodes[b].val.v[i];
          gb.v[i] = -go.v[i] * g.nodes[a].val.v[i] / (bv * bv);
        }
        g.accum(b, gb);
      }
    });
  }

  int add_scalar(int a, T s) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [s](T x) { return x + s; });
    return record(out, {a}, [a](Graph& g, const Tensor<T>& go) { g.accum(a, go); });
  }

  int mul_scalar(int a, T s) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [s](T x) { return x * s; });
    return record(out, {a}, [a, s](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i) ga.v[i] = go.v[i] * s;
      g.accum(a, ga);
    });
  }

  int relu(int a) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [](T x) { return x > T(0) ? x : T(0); });
    return record(out, {a}, [a](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i)
        ga.v[i] = g.nodes[a].val.v[i] > T(0) ? go.v[i] : T(0);
      g.accum(a, ga);
    });
  }

  int mish(int a) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [](T x) { return static_cast<T>(mish_scalar(static_cast<double>(x))); });
    return record(out, {a}, [a](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i)
        ga.v[i] = go.v[i] *
                  static_cast<T>(mish_grad_scalar(static_cast<double>(g.nodes[a].val.v[i])));
      g.accum(a, ga);
    });
  }

  int exp_(int a) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [](T x) { return std::exp(x); });
    const int id = record_placeholder(out, {a});
    nodes[id].back = make_back({a}, [a, id](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i) ga.v[i] = go.v[i] * g.nodes[id].val.v[i];
      g.accum(a, ga);
    });
    return id;
  }

  int log_(int a) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [](T x) { return std::log(x); });
    return record(out, {a}, [a](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i) ga.v[i] = go.v[i] / g.nodes[a].val.v[i];
      g.accum(a, ga);
    });
  }

  // x^p for scalar p. Gradient defined as 0 where x <= 0 (used by metrics on
  // strictly positive inputs; the guard only avoids NaNs at exact zeros).
  int pow_scalar(int a, T p) {
    Tensor<T> out(nodes[a].val.shape);
    ew1(out, a, [p](T x) { return static_cast<T>(std::pow(static_cast<double>(x), static_cast<double>(p))); });
    return record(out, {a}, [a, p](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga(go.shape);
      const std::int64_t m = go.numel();
      for (std::int64_t i = 0; i < m; ++i) {
        const T x = g.nodes[a].val.v[i];
        ga.v[i] = x > T(0) ? go.v[i] * p *
                                 static_cast<T>(std::pow(static_cast<double>(x),
                                                         static_cast<double>(p - T(1))))
                           : T(0);
      }
      g.accum(a, ga);
    });
  }

  // -------------------------------------------------------------------------
  // Structural ops.
  // -------------------------------------------------------------------------

  int concat_ch(const std::vector<int>& parts) {
    const Tensor<T>& first = nodes[parts[0]].val;
    int ctot = 0;
    for (int p : parts) ctot += nodes[p].val.dim(1);
    Tensor<T> out({first.dim(0), ctot, first.dim(2), first.dim(3)});
    int c0 = 0;
    for (int p : parts) {
      const Tensor<T>& t = nodes[p].val;
      if (t.dim(0) != first.dim(0) || t.dim(2) != first.dim(2) || t.dim(3) != first.dim(3))
        throw ShapeError("concat_ch: mismatched non-channel dims");
      copy_ch_block(out, c0, t, 0, t.dim(1));
      c0 += t.dim(1);
    }
    std::vector<int> ps = parts;
    return record(out, parts, [ps](Graph& g, const Tensor<T>& go) {
      int c0 = 0;
      const int n = go.dim(0), h = go.dim(2), w = go.dim(3);
      for (int p : ps) {
        const int pc = g.nodes[p].val.dim(1);
        if (g.nodes[p].needs_grad) {
          Tensor<T> gp({n, pc, h, w});
          copy_ch_block(gp, 0, go, c0, pc);
          g.accum(p, gp);
        }
        c0 += pc;
      }
    });
  }

  int slice_ch(int a, int c0, int c1) {
    const Tensor<T>& t = nodes[a].val;
    Tensor<T> out({t.dim(0), c1 - c0, t.dim(2), t.dim(3)});
    copy_ch_block(out, 0, t, c0, c1 - c0);
    return record(out, {a}, [a, c0, c1](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga = Tensor<T>::zeros(g.nodes[a].val.shape);
      copy_ch_block(ga, c0, go, 0, c1 - c0);
      g.accum(a, ga);
    });
  }

  int shift(int a, int d) {
    Tensor<T> out = llss::shift_h(nodes[a].val, d);
    return record(out, {a}, [a, d](Graph& g, const Tensor<T>& go) {
      g.accum(a, llss::shift_h(go, -d));
    });
  }

  int group_dot(int a, int b, int groups) {
    Tensor<T> out = llss::group_dot(nodes[a].val, nodes[b].val, groups);
    return record(out, {a, b}, [a, b, groups](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& av = g.nodes[a].val;
      const Tensor<T>& bv = g.nodes[b].val;
      const int n = av.dim(0), c = av.dim(1), h = av.dim(2), w = av.dim(3);
      const int cg = c / groups;
      const T inv = T(1) / static_cast<T>(cg);
      auto scatter = [&](const Tensor<T>& other, int target) {
        Tensor<T> gt(av.shape);
#pragma omp parallel for schedule(static) collapse(2)
        for (int ni = 0; ni < n; ++ni)
          for (int ci = 0; ci < c; ++ci) {
            const int gidx = ci / cg;
            const T* gsrc = go.data() + go.idx4(ni, gidx, 0, 0);
            const T* osrc = other.data() + other.idx4(ni, ci, 0, 0);
            T* dst = gt.data() + gt.idx4(ni, ci, 0, 0);
            for (int i = 0; i < h * w; ++i) dst[i] = gsrc[i] * osrc[i] * inv;
          }
        g.accum(target, gt);
      };
      if (g.nodes[a].needs_grad) scatter(bv, a);
      if (g.nodes[b].needs_grad) scatter(av, b);
    });
  }

  int pad2d(int a, int l, int r, int t, int b, PadMode mode) {
    Tensor<T> out = llss::pad2d_fwd(nodes[a].val, l, r, t, b, mode);
    const int h = nodes[a].val.dim(2), w = nodes[a].val.dim(3);
    return record(out, {a}, [a, l, r, t, b, mode, h, w](Graph& g, const Tensor<T>& go) {
      g.accum(a, llss::pad2d_bwd(go, l, r, t, b, mode, h, w));
    });
  }

  int avgpool2(int a) {
    Tensor<T> out = llss::avgpool2_fwd(nodes[a].val);
    const int h = nodes[a].val.dim(2), w = nodes[a].val.dim(3);
    return record(out, {a}, [a, h, w](Graph& g, const Tensor<T>& go) {
      g.accum(a, llss::avgpool2_bwd(go, h, w));
    });
  }

  // (C) -> (n, C, h, w); backward sums over n, h, w.
  int broadcast_ch(int a, int n, int h, int w) {
    const Tensor<T>& p = nodes[a].val;
    const int c = static_cast<int>(p.numel());
    Tensor<T> out({n, c, h, w});
    for (int ni = 0; ni < n; ++ni)
      for (int ci = 0; ci < c; ++ci) {
        T* dst = out.data() + out.idx4(ni, ci, 0, 0);
        for (int i = 0; i < h * w; ++i) dst[i] = p.v[ci];
      }
    return record(out, {a}, [a, n, c, h, w](Graph& g, const Tensor<T>& go) {
      Tensor<T> ga = Tensor<T>::zeros(g.nodes[a].val.shape);
      for (int ni = 0; ni < n; ++ni)
        for (int ci = 0; ci < c; ++ci) {
          const T* src = go.data() + go.idx4(ni, ci, 0, 0);
          T acc = 0;
          for (int i = 0; i < h * w; ++i) acc += src[i];
          ga.v[ci] += acc;
        }
      g.accum(a, ga);
    });
  }

  int reduce_sum(int a) {
    const Tensor<T>& t = nodes[a].val;
    T acc = 0;
    for (const T& x : t.v) acc += x;
    Tensor<T> out({1});
    out.v[0] = acc;
    return record(out, {a}, [a](Graph& g, const Tensor<T>& go) {
      g.accum(a, Tensor<T>::full(g.nodes[a].val.shape, go.v[0]));
    });
  }

  int reduce_mean(int a) {
    const std::int64_t m = nodes[a].val.numel();
    return mul_scalar(reduce_sum(a), T(1) / static_cast<T>(m));
  }

  // -------------------------------------------------------------------------
  // Neural-net ops (production kernels).
  // -------------------------------------------------------------------------

  int conv2d(int x, int w, int b, int stride, int pad, int groups) {
    static const Tensor<T> kNoBias;
    Tensor<T> out = par::conv2d_fwd(nodes[x].val, nodes[w].val,
                                    b < 0 ? kNoBias : nodes[b].val, stride, pad, groups);
    return record(out, {x, w, b}, [x, w, b, stride, pad, groups](Graph& g, const Tensor<T>& go) {
      Tensor<T> gx, gw, gb;
      const bool nx = g.nodes[x].needs_grad;
      const bool nw = g.nodes[w].needs_grad;
      const bool nb = b >= 0 && g.nodes[b].needs_grad;
      par::conv2d_bwd(g.nodes[x].val, g.nodes[w].val, go, stride, pad, groups,
                      nx ? &gx : nullptr, nw ? &gw : nullptr, nb ? &gb : nullptr);
      if (nx) g.accum(x, gx);
      if (nw) g.accum(w, gw);
      if (nb) g.accum(b, gb);
    });
  }

  int deconv2d(int x, int w, int b, int stride, int pad, int outpad) {
    static const Tensor<T> kNoBias;
    Tensor<T> out = par::deconv2d_fwd(nodes[x].val, nodes[w].val,
                                      b < 0 ? kNoBias : nodes[b].val, stride, pad, outpad);
    return record(out, {x, w, b}, [x, w, b, stride, pad](Graph& g, const Tensor<T>& go) {
      Tensor<T> gx, gw, gb;
      const bool nx = g.nodes[x].needs_grad;
      const bool nw = g.nodes[w].needs_grad;
      const bool nb = b >= 0 && g.nodes[b].needs_grad;
      par::deconv2d_bwd(g.nodes[x].val, g.nodes[w].val, go, stride, pad, nx ? &gx : nullptr,
                        nw ? &gw : nullptr, nb ? &gb : nullptr);
      if (nx) g.accum(x, gx);
      if (nw) g.accum(w, gw);
      if (nb) g.accum(b, gb);
    });
  }

  int deform_conv2d(int x, int off, int w, int b, int groups) {
    static const Tensor<T> kNoBias;
    Tensor<T> out = par::deform_conv2d_fwd(nodes[x].val, nodes[off].val, nodes[w].val,
                                           b < 0 ? kNoBias : nodes[b].val, groups);
    return record(out, {x, off, w, b}, [x, off, w, b, groups](Graph& g, const Tensor<T>& go) {
      Tensor<T> gx, goff, gw, gb;
      const bool nx = g.nodes[x].needs_grad;
      const bool no = g.nodes[off].needs_grad;
      const bool nw = g.nodes[w].needs_grad;
      const bool nb = b >= 0 && g.nodes[b].needs_grad;
      par::deform_conv2d_bwd(g.nodes[x].val, g.nodes[off].val, g.nodes[w].val, go, groups,
                             nx ? &gx : nullptr, no ? &goff : nullptr, nw ? &gw : nullptr,
                             nb ? &gb : nullptr);
      if (nx) g.accum(x, gx);
      if (no) g.accum(off, goff);
      if (nw) g.accum(w, gw);
      if (nb) g.accum(b, gb);
    });
  }

  // -------------------------------------------------------------------------
  // Rate op: bits = -log2(max(p, p_floor)) with p = Phi((d+.5)/s) - Phi((d-.5)/s)
  // and s = max(exp(log_sigma), sigma_min). Both clamps use lower-bound
  // gradient semantics: the gradient passes when the value is above the bound
  // or when the update would push it back up.
  // -------------------------------------------------------------------------
  int gauss_bits(int delta, int log_sigma, double sigma_min, double p_floor) {
    check_same(delta, log_sigma, "gauss_bits");
    const Tensor<T>& dv = nodes[delta].val;
    const Tensor<T>& lv = nodes[log_sigma].val;
    Tensor<T> out(dv.shape);
    const std::int64_t m = dv.numel();
    static const double kLn2 = 6.93147180559945286227e-01;
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) {
      const double s = std::max(std::exp(static_cast<double>(lv.v[i])), sigma_min);
      const double d = static_cast<double>(dv.v[i]);
      const double p = norm_cdf_pinned((d + 0.5) / s) - norm_cdf_pinned((d - 0.5) / s);
      out.v[i] = static_cast<T>(-std::log(std::max(p, p_floor)) / kLn2);
    }
    return record(out, {delta, log_sigma},
                  [delta, log_sigma, sigma_min, p_floor](Graph& g, const Tensor<T>& go) {
      const Tensor<T>& dv = g.nodes[delta].val;
      const Tensor<T>& lv = g.nodes[log_sigma].val;
      const bool nd = g.nodes[delta].needs_grad;
      const bool nl = g.nodes[log_sigma].needs_grad;
      Tensor<T> gd = nd ? Tensor<T>(dv.shape) : Tensor<T>();
      Tensor<T> gl = nl ? Tensor<T>(lv.shape) : Tensor<T>();
      const std::int64_t m = dv.numel();
      static const double kLn2 = 6.93147180559945286227e-01;
#pragma omp parallel for schedule(static)
      for (std::int64_t i = 0; i < m; ++i) {
        const double sraw = std::exp(static_cast<double>(lv.v[i]));
        const double s = std::max(sraw, sigma_min);
        const double d = static_cast<double>(dv.v[i]);
        const double up = (d + 0.5) / s, lo = (d - 0.5) / s;
        const double p_raw = norm_cdf_pinned(up) - norm_cdf_pinned(lo);
        const double p = std::max(p_raw, p_floor);
        const double gout = static_cast<double>(go.v[i]);
        // d(bits)/dp at the clamped value.
        double gp = gout * (-1.0 / (p * kLn2));
        if (p_raw < p_floor && gp >= 0.0) gp = 0.0;  // lower-bound pass rule
        const double phi_up = norm_pdf(up), phi_lo = norm_pdf(lo);
        if (nd) gd.v[i] = static_cast<T>(gp * (phi_up - phi_lo) / s);
        if (nl) {
          double gs = gp * (-(phi_up * up - phi_lo * lo) / s);
          if (sraw < sigma_min && gs >= 0.0) gs = 0.0;
          gl.v[i] = static_cast<T>(gs * sraw);
        }
      }
      if (nd) g.accum(delta, gd);
      if (nl) g.accum(log_sigma, gl);
    });
  }

 private:
  static void copy_ch_block(Tensor<T>& dst, int dst_c0, const Tensor<T>& src, int src_c0,
                            int nch) {
    const int n = dst.dim(0), h = dst.dim(2), w = dst.dim(3);
    for (int ni = 0; ni < n; ++ni)
      for (int c = 0; c < nch; ++c) {
        T* d = dst.data() + dst.idx4(ni, dst_c0 + c, 0, 0);
        const T* s = src.data() + src.idx4(ni, src_c0 + c, 0, 0);
        for (int i = 0; i < h * w; ++i) d[i] = s[i];
      }
  }

  void check_same(int a, int b, const char* op) {
    if (!nodes[a].val.same_shape(nodes[b].val))
      throw ShapeError(std::string(op) + ": shape mismatch " + shape_str(nodes[a].val.shape) +
                       " vs " + shape_str(nodes[b].val.shape));
  }

  template <typename F>
  void ew1(Tensor<T>& out, int a, F f) {
    const std::int64_t m = out.numel();
    const T* src = nodes[a].val.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) out.v[i] = f(src[i]);
  }

  template <typename F>
  void ew2(Tensor<T>& out, int a, int b, F f) {
    const std::int64_t m = out.numel();
    const T* pa = nodes[a].val.data();
    const T* pb = nodes[b].val.data();
#pragma omp parallel for schedule(static)
    for (std::int64_t i = 0; i < m; ++i) out.v[i] = f(pa[i], pb[i]);
  }

  bool any_needs(const std::vector<int>& parents) {
    for (int p : parents)
      if (p >= 0 && nodes[p].needs_grad) return true;
    return false;
  }

  template <typename F>
  std::function<void(Graph&, const Tensor<T>&)> make_back(const std::vector<int>& parents, F f) {
    if (!any_needs(parents)) return nullptr;
    return f;
  }

  int record_placeholder(Tensor<T>& out, const std::vector<int>& parents) {
    Node n;
    n.val = std::move(out);
    n.needs_grad = any_needs(parents);
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }

  template <typename F>
  int record(Tensor<T>& out, const std::vector<int>& parents, F f) {
    const bool ng = any_needs(parents);
    Node n;
    n.val = std::move(out);
    n.needs_grad = ng;
    if (ng) n.back = f;
    nodes.push_back(std::move(n));
    return static_cast<int>(nodes.size()) - 1;
  }
};

using GraphF = Graph<float>;
using GraphD = Graph<double>;

}  // namespace llss
