// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// The stereo codec network. Both views run through one shared weight set; the
// Bidirectional Shift Modules (BiShiftMod) are the only cross-view couplings,
// and each starts as an exact no-op (zero-initialized output convolution), so
// a freshly initialized model behaves as two independent single-view codecs.
//
// Scale convention: spatial size at scale s is input/2^(s-1). Architectural
// positions carry fixed scale indices (features at scale 2, main latents at
// scale 16, hyper latents at scale 64), so derived shift parameters depend
// only on the config, never on the input resolution. Frames fed to the codec
// must have H and W divisible by 64; the pipeline pads beforehand.
//
// Everything is templated on the scalar type so gradient checks can run the
// exact production structure in double precision.
#pragma once

#include <string>
#include <vector>

#include "llss/blocks.hpp"
#include "llss/config.hpp"

namespace llss {

// Graph node ids for the two views.
struct Pair {
  int l = -1, r = -1;
};

// Per-view prior parameters (graph ids), each shaped like the latent.
struct PriorPair {
  Pair mu, log_sigma;
};

struct BiShiftToggles {
  bool motion_ae = true;
  bool context_ae = true;
  bool motion_hyper = true;
  bool context_hyper = true;
  static BiShiftToggles all(bool on) { return {on, on, on, on}; }
  bool any() const { return motion_ae || context_ae || motion_hyper || context_hyper; }
};

// ---------------------------------------------------------------------------
// BiShiftMod
//
// Downsample both views 2x, project to correlation channels, build shifted
// group-correlation and concatenation volumes in both directions, fuse with
// Mish convs, upsample, and add residually. The trunk (down/proj convs) is
// shared by both views; each output direction owns its fusion stack. The left
// direction matches F_L(x) against F_R(x-d); the right direction mirrors with
// F_L(x+d) against F_R(x). Channel layout per disparity level:
// [group correlation (G), left cat features (C_c), right cat features (C_c)].
// ---------------------------------------------------------------------------
template <typename T>
struct BiShiftMod {
  struct Dir {
    Conv2d<T> f1, f2, out;
    Deconv2d<T> up;
  };
  Conv2d<T> down, proj_g, proj_c;
  Dir dl, dr;
  ShiftParams sp;
  int groups = 0, cat_channels = 0;

  static BiShiftMod make(ParamStore<T>& s, const std::string& name, int cin, int scale,
                         const CodecConfig& cfg) {
    BiShiftMod m;
    m.sp = derive_shift_params(scale, cfg);
    m.groups = cfg.bishift_groups;
    m.cat_channels = cfg.bishift_cat_channels;
    const int c = cfg.bishift_channels;
    m.down = Conv2d<T>::make(s, name + ".down", cin, c, 5, 2);
    m.proj_g = Conv2d<T>::make(s, name + ".pg", c, cfg.bishift_group_channels, 3, 1);
    m.proj_c = Conv2d<T>::make(s, name + ".pc", c, cfg.bishift_cat_channels, 3, 1);
    const int vol_ch = m.sp.num_levels * (cfg.bishift_groups + 2 * cfg.bishift_cat_channels);
    auto mk_dir = [&](const std::string& d) {
      Dir dir;
      dir.f1 = Conv2d<T>::make(s, name + "." + d + ".f1", vol_ch, c, 1, 1);
      dir.f2 = Conv2d<T>::make(s, name + "." + d + ".f2", c, c, 3, 1);
      dir.up = Deconv2d<T>::make(s, name + "." + d + ".up", c, c, 5, 2);
      dir.out = Conv2d<T>::make(s, name + "." + d + ".out", c, cin, 1, 1, Init::Zero);
      return dir;
    };
    m.dl = mk_dir("l");
    m.dr = mk_dir("r");
    return m;
  }

  Pair fwd(ParamCtx<T>& ctx, Pair x) const {
    Graph<T>& g = *ctx.g;
    const int hl = down.fwd(ctx, x.l), hr = down.fwd(ctx, x.r);
    const int gl = proj_g.fwd(ctx, hl), gr = proj_g.fwd(ctx, hr);
    const int cl = proj_c.fwd(ctx, hl), cr = proj_c.fwd(ctx, hr);
    std::vector<int> vol_l, vol_r;
    for (int lv = 0; lv < sp.num_levels; ++lv) {
      const int d = lv * sp.stride;
      vol_l.push_back(g.group_dot(gl, g.shift(gr, d), groups));
      vol_l.push_back(cl);
      vol_l.push_back(g.shift(cr, d));
      vol_r.push_back(g.group_dot(g.shift(gl, -d), gr, groups));
      vol_r.push_back(g.shift(cl, -d));
      vol_r.push_back(cr);
    }
    auto run_dir = [&](const Dir& dir, std::vector<int>& vol) {
      int t = g.mish(dir.f1.fwd(ctx, g.concat_ch(vol)));
      t = g.mish(dir.f2.fwd(ctx, t));
      return dir.out.fwd(ctx, dir.up.fwd(ctx, t));
    };
    return {g.add(x.l, run_dir(dl, vol_l)), g.add(x.r, run_dir(dr, vol_r))};
  }

  // h, w: resolution of the coupled feature map (module input). Covers both
  // views and both directions; parameters appear once.
  void trace(LayerGraph& lg, const std::string& tag, int h, int w) const {
    const int hi = h / 2, wi = w / 2;
    for (int v = 0; v < 2; ++v) {
      const std::string s = v == 0 ? ".L" : ".R";
      lg.add(down.spec(), tag + ".in" + s, tag + ".h" + s, hi, wi);
      lg.add(proj_g.spec(), tag + ".h" + s, tag + ".g" + s, hi, wi);
      lg.add(proj_c.spec(), tag + ".h" + s, tag + ".c" + s, hi, wi);
    }
    // Correlation volumes: C_g multiplies per level, position, and direction.
    Counts corr;
    corr.macs = 2ll * sp.num_levels * proj_g.cout * hi * wi;
    corr.flops = 2 * corr.macs;
    lg.add_extra(tag + ".corr", corr);
    for (int v = 0; v < 2; ++v) {
      const std::string s = v == 0 ? ".L" : ".R";
      const Dir& dir = v == 0 ? dl : dr;
      lg.add(dir.f1.spec(Act::Mish), tag + ".vol" + s, tag + ".t1" + s, hi, wi);
      lg.add(dir.f2.spec(Act::Mish), tag + ".t1" + s, tag + ".t2" + s, hi, wi);
      lg.add(dir.up.spec(), tag + ".t2" + s, tag + ".u" + s, h, w);
      lg.add(dir.out.spec(), tag + ".u" + s, tag + ".o" + s, h, w);
    }
  }
};

// ---------------------------------------------------------------------------
// Feature extractor / image reconstructor (shared across views).
// ---------------------------------------------------------------------------
template <typename T>
struct FeatureExtractor {
  Conv2d<T> conv;
  ResGroup<T> rb1, rb2, rb3;

  static FeatureExtractor make(ParamStore<T>& s, const CodecConfig& cfg) {
    FeatureExtractor e;
    e.conv = Conv2d<T>::make(s, "ext.conv", 3, cfg.feature_channels, 5, 2);
    e.rb1 = ResGroup<T>::make(s, "ext.rb1", cfg.feature_channels);
    e.rb2 = ResGroup<T>::make(s, "ext.rb2", cfg.feature_channels);
    e.rb3 = ResGroup<T>::make(s, "ext.rb3", cfg.feature_channels);
    return e;
  }

  int fwd(ParamCtx<T>& ctx, int img) const {
    return rb3.fwd(ctx, rb2.fwd(ctx, rb1.fwd(ctx, ctx.g->relu(conv.fwd(ctx, img)))));
  }
  Pair fwd(ParamCtx<T>& ctx, Pair imgs) const { return {fwd(ctx, imgs.l), fwd(ctx, imgs.r)}; }

  // h, w: input image resolution; one invocation.
  void trace(LayerGraph& lg, int h, int w) const {
    lg.add(conv.spec(Act::ReLU), "img", "ext.c", h / 2, w / 2);
    lg.add(rb1.spec(), "ext.c", "ext.r1", h / 2, w / 2);
    lg.add(rb2.spec(), "ext.r1", "ext.r2", h / 2, w / 2);
    lg.add(rb3.spec(), "ext.r2", "ext.f", h / 2, w / 2);
  }
};

template <typename T>
struct ImageReconstructor {
  ResGroup<T> rb1, rb2;
  Deconv2d<T> up;
  Conv2d<T> out;

  static ImageReconstructor make(ParamStore<T>& s, const CodecConfig& cfg) {
    ImageReconstructor r;
    r.rb1 = ResGroup<T>::make(s, "rec.rb1", cfg.feature_channels);
    r.rb2 = ResGroup<T>::make(s, "rec.rb2", cfg.feature_channels);
    r.up = Deconv2d<T>::make(s, "rec.up", cfg.feature_channels, cfg.feature_channels, 5, 2);
    r.out = Conv2d<T>::make(s, "rec.out", cfg.feature_channels, 3, 5, 1);
    return r;
  }

  // Linear output; [0,1] clamping happens only at final evaluation, outside
  // the training graph.
  int fwd(ParamCtx<T>& ctx, int feat) const {
    return out.fwd(ctx, ctx.g->relu(up.fwd(ctx, rb2.fwd(ctx, rb1.fwd(ctx, feat)))));
  }
  Pair fwd(ParamCtx<T>& ctx, Pair f) const { return {fwd(ctx, f.l), fwd(ctx, f.r)}; }

  // h, w: output image resolution; one invocation.
  void trace(LayerGraph& lg, int h, int w) const {
    lg.add(rb1.spec(), "rec.f", "rec.r1", h / 2, w / 2);
    lg.add(rb2.spec(), "rec.r1", "rec.r2", h / 2, w / 2);
    lg.add(up.spec(Act::ReLU), "rec.r2", "rec.u", h, w);
    lg.add(out.spec(), "rec.u", "rec.img", h, w);
  }
};

// ---------------------------------------------------------------------------
// Motion estimation / compensation (per view, weights shared).
// ---------------------------------------------------------------------------
template <typename T>
struct MotionEstimator {
  Conv2d<T> c1, c2;

  static MotionEstimator make(ParamStore<T>& s, const CodecConfig& cfg) {
    MotionEstimator m;
    m.c1 = Conv2d<T>::make(s, "mest.c1", 2 * cfg.feature_channels, cfg.motion_ae_channels, 3, 1);
    m.c2 = Conv2d<T>::make(s, "mest.c2", cfg.motion_ae_channels, cfg.motion_ae_channels, 3, 1);
    return m;
  }

  int fwd(ParamCtx<T>& ctx, int f, int f_prev) const {
    Graph<T>& g = *ctx.g;
    return c2.fwd(ctx, g.relu(c1.fwd(ctx, g.concat_ch({f, f_prev}))));
  }

  // h, w: feature resolution; one invocation (one view).
  void trace(LayerGraph& lg, int h, int w) const {
    lg.add(c1.spec(Act::ReLU), "mest.in", "mest.h", h, w);
    lg.add(c2.spec(), "mest.h", "mest.m", h, w);
  }
};

template <typename T>
struct MotionCompensator {
  Conv2d<T> off, f1, f2;
  DeformConv<T> dc;

  static MotionCompensator make(ParamStore<T>& s, const CodecConfig& cfg) {
    MotionCompensator m;
    const int fc = cfg.feature_channels;
    // Zero-initialized offsets: training starts from "sample in place".
    m.off = Conv2d<T>::make(s, "mcomp.off", cfg.motion_ae_channels,
                            2 * 9 * cfg.deform_groups, 3, 1, Init::Zero);
    m.dc = DeformConv<T>::make(s, "mcomp.dc", fc, fc, 3, cfg.deform_groups);
    m.f1 = Conv2d<T>::make(s, "mcomp.f1", 2 * fc, fc, 3, 1);
    m.f2 = Conv2d<T>::make(s, "mcomp.f2", fc, fc, 3, 1);
    return m;
  }

  // F_bar = fusion(concat(warped, F_prev)) + F_prev.
  int fwd(ParamCtx<T>& ctx, int f_prev, int m_hat) const {
    Graph<T>& g = *ctx.g;
    const int warped = dc.fwd(ctx, f_prev, off.fwd(ctx, m_hat));
    const int fused = f2.fwd(ctx, g.relu(f1.fwd(ctx, g.concat_ch({warped, f_prev}))));
    return g.add(fused, f_prev);
  }

  void trace(LayerGraph& lg, int h, int w) const {
    lg.add(off.spec(), "mcomp.m", "mcomp.o", h, w);
    lg.add(dc.spec(), "mcomp.fp", "mcomp.w", h, w);
    lg.add(f1.spec(Act::ReLU), "mcomp.cat", "mcomp.h", h, w);
    lg.add(f2.spec(), "mcomp.h", "mcomp.fb", h, w);
  }
};

// ---------------------------------------------------------------------------
// Motion autoencoder: per-view stride-2 conv stacks with ResGroups, coupled
// by one BiShiftMod per stage, plus a hyper codec producing the conditional
// Gaussian prior for the motion latent. Latent at scale 16, hyper at 64.
// ---------------------------------------------------------------------------
template <typename T>
struct MotionAE {
  struct EncStage {
    Conv2d<T> conv;
    ResGroup<T> rb1, rb2, rb3;
    BiShiftMod<T> bs;
  };
  struct DecStage {
    BiShiftMod<T> bs;
    ResGroup<T> rb1, rb2, rb3;
    Deconv2d<T> deconv;
  };
  EncStage enc[3];
  DecStage dec[3];
  // Hyper codec: two stride-2 convs around a ResGroup, one BiShiftMod on each
  // side; decoder head emits (mu, log_sigma) for the motion latent.
  Conv2d<T> henc1, henc2, head;
  Deconv2d<T> hdec1, hdec2;
  ResGroup<T> henc_rb, hdec_rb;
  BiShiftMod<T> henc_bs, hdec_bs;
  std::string zprior_mu, zprior_ls;
  int latent_ch = 0, hyper_ch = 0;

  static MotionAE make(ParamStore<T>& s, const CodecConfig& cfg) {
    MotionAE a;
    const int m = cfg.motion_ae_channels, hy = cfg.hyper_channels;
    a.latent_ch = m;
    a.hyper_ch = hy;
    for (int i = 0; i < 3; ++i) {
      const std::string en = "mae.enc" + std::to_string(i + 1);
      a.enc[i].conv = Conv2d<T>::make(s, en + ".conv", m, m, 5, 2);
      a.enc[i].rb1 = ResGroup<T>::make(s, en + ".rb1", m);
      a.enc[i].rb2 = ResGroup<T>::make(s, en + ".rb2", m);
      a.enc[i].rb3 = ResGroup<T>::make(s, en + ".rb3", m);
      // Stage i couples features at scale 2^(i+2); shifts run at half that.
      a.enc[i].bs = BiShiftMod<T>::make(s, en + ".bs", m, 4 + i, cfg);
      const std::string dn = "mae.dec" + std::to_string(i + 1);
      a.dec[i].bs = BiShiftMod<T>::make(s, dn + ".bs", m, 6 - i, cfg);
      a.dec[i].rb1 = ResGroup<T>::make(s, dn + ".rb1", m);
      a.dec[i].rb2 = ResGroup<T>::make(s, dn + ".rb2", m);
      a.dec[i].rb3 = ResGroup<T>::make(s, dn + ".rb3", m);
      a.dec[i].deconv = Deconv2d<T>::make(s, dn + ".up", m, m, 5, 2);
    }
    a.henc1 = Conv2d<T>::make(s, "mae.henc.c1", m, hy, 5, 2);
    a.henc_bs = BiShiftMod<T>::make(s, "mae.henc.bs", hy, 7, cfg);
    a.henc_rb = ResGroup<T>::make(s, "mae.henc.rb", hy);
    a.henc2 = Conv2d<T>::make(s, "mae.henc.c2", hy, hy, 5, 2);
    a.hdec1 = Deconv2d<T>::make(s, "mae.hdec.d1", hy, hy, 5, 2);
    a.hdec_bs = BiShiftMod<T>::make(s, "mae.hdec.bs", hy, 7, cfg);
    a.hdec_rb = ResGroup<T>::make(s, "mae.hdec.rb", hy);
    a.hdec2 = Deconv2d<T>::make(s, "mae.hdec.d2", hy, hy, 5, 2);
    a.head = Conv2d<T>::make(s, "mae.hdec.head", hy, 2 * m, 3, 1);
    // Learned factorized prior for the hyper latent, one (mu, log_sigma) per
    // channel, shared by both views.
    a.zprior_mu = "mae.zprior.mu";
    a.zprior_ls = "mae.zprior.ls";
    s.create(a.zprior_mu, {hy}, Init::Zero);
    s.create(a.zprior_ls, {hy}, Init::Zero);
    return a;
  }

  Pair encode(ParamCtx<T>& ctx, Pair m, bool use_bs) const {
    Pair h = m;
    for (int i = 0; i < 3; ++i) {
      const EncStage& st = enc[i];
      h = {st.conv.fwd(ctx, h.l), st.conv.fwd(ctx, h.r)};
      auto stack = [&](int x) { return st.rb3.fwd(ctx, st.rb2.fwd(ctx, st.rb1.fwd(ctx, x))); };
      h = {stack(h.l), stack(h.r)};
      if (use_bs) h = st.bs.fwd(ctx, h);
    }
    return h;
  }

  Pair decode(ParamCtx<T>& ctx, Pair y_hat, bool use_bs) const {
    Pair h = y_hat;
    for (int i = 0; i < 3; ++i) {
      const DecStage& st = dec[i];
      if (use_bs) h = st.bs.fwd(ctx, h);
      auto stack = [&](int x) { return st.rb3.fwd(ctx, st.rb2.fwd(ctx, st.rb1.fwd(ctx, x))); };
      h = {stack(h.l), stack(h.r)};
      h = {st.deconv.fwd(ctx, h.l), st.deconv.fwd(ctx, h.r)};
    }
    return h;
  }

  Pair hyper_encode(ParamCtx<T>& ctx, Pair y, bool use_bs) const {
    Pair h = {henc1.fwd(ctx, y.l), henc1.fwd(ctx, y.r)};
    if (use_bs) h = henc_bs.fwd(ctx, h);
    h = {henc_rb.fwd(ctx, h.l), henc_rb.fwd(ctx, h.r)};
    return {henc2.fwd(ctx, h.l), henc2.fwd(ctx, h.r)};
  }

  PriorPair hyper_decode(ParamCtx<T>& ctx, Pair z_hat, bool use_bs) const {
    Pair h = {hdec1.fwd(ctx, z_hat.l), hdec1.fwd(ctx, z_hat.r)};
    if (use_bs) h = hdec_bs.fwd(ctx, h);
    h = {hdec_rb.fwd(ctx, h.l), hdec_rb.fwd(ctx, h.r)};
    h = {hdec2.fwd(ctx, h.l), hdec2.fwd(ctx, h.r)};
    h = {head.fwd(ctx, h.l), head.fwd(ctx, h.r)};
    Graph<T>& g = *ctx.g;
    PriorPair p;
    p.mu = {g.slice_ch(h.l, 0, latent_ch), g.slice_ch(h.r, 0, latent_ch)};
    p.log_sigma = {g.slice_ch(h.l, latent_ch, 2 * latent_ch),
                   g.slice_ch(h.r, latent_ch, 2 * latent_ch)};
    return p;
  }

  // Factorized prior broadcast to the hyper latent's spatial dims (both views
  // share the same parameters).
  PriorPair z_prior(ParamCtx<T>& ctx, int n, int h, int w) const {
    Graph<T>& g = *ctx.g;
    const int mu = ctx.var(zprior_mu), ls = ctx.var(zprior_ls);
    PriorPair p;
    p.mu = {g.broadcast_ch(mu, n, h, w), g.broadcast_ch(mu, n, h, w)};
    p.log_sigma = {g.broadcast_ch(ls, n, h, w), g.broadcast_ch(ls, n, h, w)};
    return p;
  }

  // h, w: motion-feature resolution (scale 2); one view's stacks, both views'
  // BiShiftMods. Main stacks and the BiShift sub-row trace separately so the
  // profiler can report them as distinct rows.
  void trace_stacks(LayerGraph& lg, int h, int w) const {
    int sh = h, sw = w;
    for (int i = 0; i < 3; ++i) {
      const std::string p = "mae.e" + std::to_string(i);
      sh /= 2;
      sw /= 2;
      lg.add(enc[i].conv.spec(), p + ".in", p + ".c", sh, sw);
      lg.add(enc[i].rb1.spec(), p + ".c", p + ".r1", sh, sw);
      lg.add(enc[i].rb2.spec(), p + ".r1", p + ".r2", sh, sw);
      lg.add(enc[i].rb3.spec(), p + ".r2", p + ".r3", sh, sw);
    }
    int dh = sh, dw = sw;
    for (int i = 0; i < 3; ++i) {
      const std::string p = "mae.d" + std::to_string(i);
      lg.add(dec[i].rb1.spec(), p + ".in", p + ".r1", dh, dw);
      lg.add(dec[i].rb2.spec(), p + ".r1", p + ".r2", dh, dw);
      lg.add(dec[i].rb3.spec(), p + ".r2", p + ".r3", dh, dw);
      dh *= 2;
      dw *= 2;
      lg.add(dec[i].deconv.spec(), p + ".r3", p + ".u", dh, dw);
    }
    lg.add(henc1.spec(), "mae.y", "mae.h1", sh / 2, sw / 2);
    lg.add(henc_rb.spec(), "mae.h1", "mae.h2", sh / 2, sw / 2);
    lg.add(henc2.spec(), "mae.h2", "mae.z", sh / 4, sw / 4);
    lg.add(hdec1.spec(), "mae.z", "mae.g1", sh / 2, sw / 2);
    lg.add(hdec_rb.spec(), "mae.g1", "mae.g2", sh / 2, sw / 2);
    lg.add(hdec2.spec(), "mae.g2", "mae.g3", sh, sw);
    lg.add(head.spec(), "mae.g3", "mae.prior", sh, sw);
  }

  void trace_bishift(LayerGraph& lg, int h, int w) const {
    int sh = h, sw = w;
    for (int i = 0; i < 3; ++i) {
      sh /= 2;
      sw /= 2;
      enc[i].bs.trace(lg, "mae.e" + std::to_string(i) + ".bs", sh, sw);
      dec[2 - i].bs.trace(lg, "mae.d" + std::to_string(2 - i) + ".bs", sh, sw);
    }
    henc_bs.trace(lg, "mae.he.bs", sh / 2, sw / 2);
    hdec_bs.trace(lg, "mae.hd.bs", sh / 2, sw / 2);
  }
};

// ---------------------------------------------------------------------------
// Context autoencoder: codes the current feature conditioned on the warped
// feature F_bar, which is re-injected (downsampled + matching conv) at every
// scale of the encoder and decoder and fed to the hyper decoder.
// ---------------------------------------------------------------------------

// Downsampled conditioning pyramid (graph ids per view at scales 2,4,8,64).
struct CondPyramid {
  Pair s2, s4, s8, s64;
};

template <typename T>
struct ContextAE {
  struct EncStage {
    Conv2d<T> conv;
    ResGroup<T> rb1, rb2;
    BiShiftMod<T> bs;
  };
  struct DecStage {
    BiShiftMod<T> bs;
    ResGroup<T> rb1, rb2;
    Deconv2d<T> deconv;
  };
  Conv2d<T> match;          // concat(F, F_bar) -> C at scale 2
  EncStage enc[3];
  Conv2d<T> rein1, rein2;   // encoder re-injection after stages 1, 2
  DecStage dec[3];
  Conv2d<T> drein1, drein2; // decoder re-injection after deconvs 1, 2
  Conv2d<T> tail;           // concat(h, F_bar) -> feature channels at scale 2
  Conv2d<T> henc1, henc2, head;
  Deconv2d<T> hdec1, hdec2; // hdec1 consumes concat(z_hat, F_bar at scale 64)
  ResGroup<T> henc_rb, hdec_rb;
  BiShiftMod<T> henc_bs, hdec_bs;
  std::string zprior_mu, zprior_ls;
  int latent_ch = 0, hyper_ch = 0, feat_ch = 0;

  static ContextAE make(ParamStore<T>& s, const CodecConfig& cfg) {
    ContextAE a;
    const int c = cfg.context_ae_channels, hy = cfg.hyper_channels;
    const int fc = cfg.feature_channels;
    a.latent_ch = c;
    a.hyper_ch = hy;
    a.feat_ch = fc;
    a.match = Conv2d<T>::make(s, "cae.match", 2 * fc, c, 3, 1);
    for (int i = 0; i < 3; ++i) {
      const std::string en = "cae.enc" + std::to_string(i + 1);
      a.enc[i].conv = Conv2d<T>::make(s, en + ".conv", c, c, 5, 2);
      a.enc[i].rb1 = ResGroup<T>::make(s, en + ".rb1", c);
      a.enc[i].rb2 = ResGroup<T>::make(s, en + ".rb2", c);
      a.enc[i].bs = BiShiftMod<T>::make(s, en + ".bs", c, 4 + i, cfg);
      const std::string dn = "cae.dec" + std::to_string(i + 1);
      a.dec[i].bs = BiShiftMod<T>::make(s, dn + ".bs", c, 6 - i, cfg);
      a.dec[i].rb1 = ResGroup<T>::make(s, dn + ".rb1", c);
      a.dec[i].rb2 = ResGroup<T>::make(s, dn + ".rb2", c);
      a.dec[i].deconv = Deconv2d<T>::make(s, dn + ".up", c, c, 5, 2);
    }
    a.rein1 = Conv2d<T>::make(s, "cae.rein1", c + fc, c, 3, 1);
    a.rein2 = Conv2d<T>::make(s, "cae.rein2", c + fc, c, 3, 1);
    a.drein1 = Conv2d<T>::make(s, "cae.drein1", c + fc, c, 3, 1);
    a.drein2 = Conv2d<T>::make(s, "cae.drein2", c + fc, c, 3, 1);
    a.tail = Conv2d<T>::make(s, "cae.tail", c + fc, fc, 3, 1);
    a.henc1 = Conv2d<T>::make(s, "cae.henc.c1", c, hy, 5, 2);
    a.henc_bs = BiShiftMod<T>::make(s, "cae.henc.bs", hy, 7, cfg);
    a.henc_rb = ResGroup<T>::make(s, "cae.henc.rb", hy);
    a.henc2 = Conv2d<T>::make(s, "cae.henc.c2", hy, hy, 5, 2);
    a.hdec1 = Deconv2d<T>::make(s, "cae.hdec.d1", hy + fc, hy, 5, 2);
    a.hdec_bs = BiShiftMod<T>::make(s, "cae.hdec.bs", hy, 7, cfg);
    a.hdec_rb = ResGroup<T>::make(s, "cae.hdec.rb", hy);
    a.hdec2 = Deconv2d<T>::make(s, "cae.hdec.d2", hy, hy, 5, 2);
    a.head = Conv2d<T>::make(s, "cae.hdec.head", hy, 2 * c, 3, 1);
    a.zprior_mu = "cae.zprior.mu";
    a.zprior_ls = "cae.zprior.ls";
    s.create(a.zprior_mu, {hy}, Init::Zero);
    s.create(a.zprior_ls, {hy}, Init::Zero);
    return a;
  }

  Pair encode(ParamCtx<T>& ctx, Pair f, const CondPyramid& fb, bool use_bs) const {
    Graph<T>& g = *ctx.g;
    Pair h = {match.fwd(ctx, g.concat_ch({f.l, fb.s2.l})),
              match.fwd(ctx, g.concat_ch({f.r, fb.s2.r}))};
    for (int i = 0; i < 3; ++i) {
      const EncStage& st = enc[i];
      h = {st.conv.fwd(ctx, h.l), st.conv.fwd(ctx, h.r)};
      auto stack = [&](int x) { return st.rb2.fwd(ctx, st.rb1.fwd(ctx, x)); };
      h = {stack(h.l), stack(h.r)};
      if (use_bs) h = st.bs.fwd(ctx, h);
      if (i < 2) {
        const Conv2d<T>& re = i == 0 ? rein1 : rein2;
        const Pair& cond = i == 0 ? fb.s4 : fb.s8;
        h = {re.fwd(ctx, g.concat_ch({h.l, cond.l})), re.fwd(ctx, g.concat_ch({h.r, cond.r}))};
      }
    }
    return h;
  }

  Pair decode(ParamCtx<T>& ctx, Pair y_hat, const CondPyramid& fb, bool use_bs) const {
    Graph<T>& g = *ctx.g;
    Pair h = y_hat;
    for (int i = 0; i < 3; ++i) {
      const DecStage& st = dec[i];
      if (use_bs) h = st.bs.fwd(ctx, h);
      auto stack = [&](int x) { return st.rb2.fwd(ctx, st.rb1.fwd(ctx, x)); };
      h = {stack(h.l), stack(h.r)};
      h = {st.deconv.fwd(ctx, h.l), st.deconv.fwd(ctx, h.r)};
      if (i < 2) {
        const Conv2d<T>& re = i == 0 ? drein1 : drein2;
        const Pair& cond = i == 0 ? fb.s8 : fb.s4;
        h = {re.fwd(ctx, g.concat_ch({h.l, cond.l})), re.fwd(ctx, g.concat_ch({h.r, cond.r}))};
      }
    }
    return {tail.fwd(ctx, g.concat_ch({h.l, fb.s2.l})),
            tail.fwd(ctx, g.concat_ch({h.r, fb.s2.r}))};
  }

  Pair hyper_encode(ParamCtx<T>& ctx, Pair y, bool use_bs) const {
    Pair h = {henc1.fwd(ctx, y.l), henc1.fwd(ctx, y.r)};
    if (use_bs) h = henc_bs.fwd(ctx, h);
    h = {henc_rb.fwd(ctx, h.l), henc_rb.fwd(ctx, h.r)};
    return {henc2.fwd(ctx, h.l), henc2.fwd(ctx, h.r)};
  }

  PriorPair hyper_decode(ParamCtx<T>& ctx, Pair z_hat, const CondPyramid& fb,
                         bool use_bs) const {
    Graph<T>& g = *ctx.g;
    Pair h = {hdec1.fwd(ctx, g.concat_ch({z_hat.l, fb.s64.l})),
              hdec1.fwd(ctx, g.concat_ch({z_hat.r, fb.s64.r}))};
    if (use_bs) h = hdec_bs.fwd(ctx, h);
    h = {hdec_rb.fwd(ctx, h.l), hdec_rb.fwd(ctx, h.r)};
    h = {hdec2.fwd(ctx, h.l), hdec2.fwd(ctx, h.r)};
    h = {head.fwd(ctx, h.l), head.fwd(ctx, h.r)};
    PriorPair p;
    p.mu = {g.slice_ch(h.l, 0, latent_ch), g.slice_ch(h.r, 0, latent_ch)};
    p.log_sigma = {g.slice_ch(h.l, latent_ch, 2 * latent_ch),
                   g.slice_ch(h.r, latent_ch, 2 * latent_ch)};
    return p;
  }

  PriorPair z_prior(ParamCtx<T>& ctx, int n, int h, int w) const {
    Graph<T>& g = *ctx.g;
    const int mu = ctx.var(zprior_mu), ls = ctx.var(zprior_ls);
    PriorPair p;
    p.mu = {g.broadcast_ch(mu, n, h, w), g.broadcast_ch(mu, n, h, w)};
    p.log_sigma = {g.broadcast_ch(ls, n, h, w), g.broadcast_ch(ls, n, h, w)};
    return p;
  }

  // h, w: feature resolution (scale 2); one view's stacks.
  void trace_stacks(LayerGraph& lg, int h, int w) const {
    lg.add(match.spec(), "cae.in", "cae.m", h, w);
    int sh = h, sw = w;
    for (int i = 0; i < 3; ++i) {
      const std::string p = "cae.e" + std::to_string(i);
      sh /= 2;
      sw /= 2;
      lg.add(enc[i].conv.spec(), p + ".in", p + ".c", sh, sw);
      lg.add(enc[i].rb1.spec(), p + ".c", p + ".r1", sh, sw);
      lg.add(enc[i].rb2.spec(), p + ".r1", p + ".r2", sh, sw);
      if (i == 0) lg.add(rein1.spec(), p + ".cat", p + ".re", sh, sw);
      if (i == 1) lg.add(rein2.spec(), p + ".cat", p + ".re", sh, sw);
    }
    int dh = sh, dw = sw;
    for (int i = 0; i < 3; ++i) {
      const std::string p = "cae.d" + std::to_string(i);
      lg.add(dec[i].rb1.spec(), p + ".in", p + ".r1", dh, dw);
      lg.add(dec[i].rb2.spec(), p + ".r1", p + ".r2", dh, dw);
      dh *= 2;
      dw *= 2;
      lg.add(dec[i].deconv.spec(), p + ".r2", p + ".u", dh, dw);
      if (i == 0) lg.add(drein1.spec(), p + ".cat", p + ".re", dh, dw);
      if (i == 1) lg.add(drein2.spec(), p + ".cat", p + ".re", dh, dw);
    }
    lg.add(tail.spec(), "cae.dcat", "cae.f", h, w);
    lg.add(henc1.spec(), "cae.y", "cae.h1", sh / 2, sw / 2);
    lg.add(henc_rb.spec(), "cae.h1", "cae.h2", sh / 2, sw / 2);
    lg.add(henc2.spec(), "cae.h2", "cae.z", sh / 4, sw / 4);
    lg.add(hdec1.spec(), "cae.zcat", "cae.g1", sh / 2, sw / 2);
    lg.add(hdec_rb.spec(), "cae.g1", "cae.g2", sh / 2, sw / 2);
    lg.add(hdec2.spec(), "cae.g2", "cae.g3", sh, sw);
    lg.add(head.spec(), "cae.g3", "cae.prior", sh, sw);
  }

  void trace_bishift(LayerGraph& lg, int h, int w) const {
    int sh = h, sw = w;
    for (int i = 0; i < 3; ++i) {
      sh /= 2;
      sw /= 2;
      enc[i].bs.trace(lg, "cae.e" + std::to_string(i) + ".bs", sh, sw);
      dec[2 - i].bs.trace(lg, "cae.d" + std::to_string(2 - i) + ".bs", sh, sw);
    }
    henc_bs.trace(lg, "cae.he.bs", sh / 2, sw / 2);
    hdec_bs.trace(lg, "cae.hd.bs", sh / 2, sw / 2);
  }
};

// ---------------------------------------------------------------------------
// Whole model.
// ---------------------------------------------------------------------------
template <typename T>
struct LLSSModel {
  CodecConfig cfg;
  ParamStore<T> store;
  BiShiftToggles toggles;
  FeatureExtractor<T> ext;
  ImageReconstructor<T> rec;
  MotionEstimator<T> mest;
  MotionCompensator<T> mcomp;
  MotionAE<T> mae;
  ContextAE<T> cae;

  explicit LLSSModel(const CodecConfig& c, std::uint64_t seed = 0x5353'4c4cULL) : cfg(c) {
    const auto violations = validate_config(c);
    if (!violations.empty())
      throw ConfigError("invalid config: " + violations.front().field + " " +
                        violations.front().constraint);
    if (c.feature_channels % c.deform_groups != 0)
      throw ConfigError("feature_channels must be divisible by deformable_groups");
    store.seed = seed;
    ext = FeatureExtractor<T>::make(store, c);
    rec = ImageReconstructor<T>::make(store, c);
    mest = MotionEstimator<T>::make(store, c);
    mcomp = MotionCompensator<T>::make(store, c);
    mae = MotionAE<T>::make(store, c);
    cae = ContextAE<T>::make(store, c);
  }

  ParamCtx<T> ctx(Graph<T>& g, bool trainable) { return ParamCtx<T>(g, store, trainable); }

  // Conditioning pyramid for the context AE by repeated 2x average pooling of
  // the warped feature at scale 2 down to scale 64.
  CondPyramid cond_pyramid(ParamCtx<T>& c, Pair fbar_s2) const {
    Graph<T>& g = *c.g;
    CondPyramid p;
    p.s2 = fbar_s2;
    p.s4 = {g.avgpool2(p.s2.l), g.avgpool2(p.s2.r)};
    p.s8 = {g.avgpool2(p.s4.l), g.avgpool2(p.s4.r)};
    Pair t = {g.avgpool2(p.s8.l), g.avgpool2(p.s8.r)};   // scale 16
    t = {g.avgpool2(t.l), g.avgpool2(t.r)};              // scale 32
    p.s64 = {g.avgpool2(t.l), g.avgpool2(t.r)};
    return p;
  }

  // Zero conditioning for intra frames, sized for an h x w input frame.
  CondPyramid zero_pyramid(Graph<T>& g, int n, int h, int w) const {
    auto zl = [&](int s) {
      return g.leaf(Tensor<T>::zeros({n, cfg.feature_channels, h / s, w / s}), false);
    };
    CondPyramid p;
    p.s2 = {zl(2), zl(2)};
    p.s4 = {zl(4), zl(4)};
    p.s8 = {zl(8), zl(8)};
    p.s64 = {zl(64), zl(64)};
    return p;
  }
};

using LLSSModelF = LLSSModel<float>;
using LLSSModelD = LLSSModel<double>;

}  // namespace llss
