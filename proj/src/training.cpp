// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/training.hpp"

#include <cmath>
#include <fstream>

#include "llss/codec.hpp"
#include "llss/entropy.hpp"
#include "llss/metrics.hpp"

namespace llss {
namespace {

template <typename T>
int to_batch_leaf(Graph<T>& g, const TensorF& img) {
  Tensor<T> b({1, img.dim(0), img.dim(1), img.dim(2)});
  for (std::size_t i = 0; i < img.v.size(); ++i) b.v[i] = static_cast<T>(img.v[i]);
  return g.leaf(std::move(b), false);
}

// y + U(-0.5, 0.5): the train-mode quantization surrogate. The noise enters
// as a constant leaf, so gradients pass straight through to y.
template <typename T>
int add_noise(Graph<T>& g, int y, RngStream& rng) {
  Tensor<T> n(g.val(y).shape);
  for (T& x : n.v) x = static_cast<T>(rng.uniform(-0.5, 0.5));
  return g.add(y, g.leaf(std::move(n), false));
}

// Total estimated bits of a noisy latent pair under its priors.
template <typename T>
int pair_bits(Graph<T>& g, Pair y_tilde, const PriorPair& prior) {
  const int bl = g.reduce_sum(
      g.gauss_bits(g.sub(y_tilde.l, prior.mu.l), prior.log_sigma.l, kSigmaMin, kPFloor));
  const int br = g.reduce_sum(
      g.gauss_bits(g.sub(y_tilde.r, prior.mu.r), prior.log_sigma.r, kSigmaMin, kPFloor));
  return g.add(bl, br);
}

template <typename T>
int mse_255sq(Graph<T>& g, int xhat, int x) {
  const int d = g.sub(xhat, x);
  return g.mul_scalar(g.reduce_mean(g.mul(d, d)), T(255) * T(255));
}

struct FrameLoss {
  int node = -1;       // distortion + beta * bpp
  int distortion = -1;
  int bpp = -1;
  Pair recon;          // unclamped reconstruction, for the next reference
};

template <typename T>
int distortion_node(Graph<T>& g, Pair xhat, Pair x, DistortionMetric metric) {
  if (metric == DistortionMetric::MSE)
    return g.add(mse_255sq(g, xhat.l, x.l), mse_255sq(g, xhat.r, x.r));
  const int one = g.leaf(Tensor<T>::full({1}, T(1)), false);
  const int dl = g.sub(one, graph_ms_ssim(g, xhat.l, x.l));
  const int dr = g.sub(one, graph_ms_ssim(g, xhat.r, x.r));
  return g.add(dl, dr);
}

}  // namespace

template <typename T>
int graph_ms_ssim(Graph<T>& g, int x, int y) {
  const Tensor<T>& xv = g.val(x);
  if (xv.shape.size() != 4) throw DataError("graph_ms_ssim: expected (N,C,H,W)");
  const int c = xv.dim(1);
  int h = xv.dim(2), w = xv.dim(3);
  if (std::min(h, w) < 16) throw DataError("graph_ms_ssim: images smaller than 16 per side");
  const int scales = ms_ssim_scales(h, w);
  static const double kWeights[5] = {0.0448, 0.2856, 0.3001, 0.2363, 0.1333};
  double wsum = 0;
  for (int s = 0; s < scales; ++s) wsum += kWeights[s];

  // Depthwise 11x11 Gaussian (sigma 1.5) as a constant leaf.
  constexpr int kWin = 11;
  std::vector<double> k1(kWin);
  double ksum = 0;
  for (int i = 0; i < kWin; ++i) {
    const double d = i - (kWin - 1) / 2.0;
    k1[i] = std::exp(-d * d / (2.0 * 1.5 * 1.5));
    ksum += k1[i];
  }
  for (double& v : k1) v /= ksum;
  Tensor<T> gw({c, 1, kWin, kWin});
  for (int ch = 0; ch < c; ++ch)
    for (int i = 0; i < kWin; ++i)
      for (int j = 0; j < kWin; ++j)
        gw.v[(static_cast<std::size_t>(ch) * kWin + i) * kWin + j] =
            static_cast<T>(k1[i] * k1[j]);
  const int wleaf = g.leaf(std::move(gw), false);
  auto blur = [&](int t) { return g.conv2d(t, wleaf, -1, 1, 0, c); };

  // Per-channel spatial mean of a (N,C,hm,wm) map as a depthwise convolution
  // with a uniform kernel, giving (N,C,1,1).
  auto channel_mean = [&](int t, int hm, int wm) {
    Tensor<T> mk({c, 1, hm, wm});
    const T inv = T(1) / static_cast<T>(static_cast<double>(hm) * wm);
    for (auto& v : mk.v) v = inv;
    return g.conv2d(t, g.leaf(std::move(mk), false), -1, 1, 0, c);
  };

  // The weighted product runs per channel; the channel average is taken only
  // at the end, matching the evaluation metric.
  const T c1 = T(0.01) * T(0.01), c2 = T(0.03) * T(0.03);
  int value = -1;
  for (int s = 0; s < scales; ++s) {
    if (s > 0) {
      // Symmetric pad to even dims, then 2x2 average pooling.
      if ((h & 1) || (w & 1)) {
        x = g.pad2d(x, 0, w & 1, 0, h & 1, PadMode::Symmetric);
        y = g.pad2d(y, 0, w & 1, 0, h & 1, PadMode::Symmetric);
      }
      x = g.avgpool2(x);
      y = g.avgpool2(y);
      h = (h + 1) / 2;
      w = (w + 1) / 2;
    }
    const int mx = blur(x), my = blur(y);
    const int sxx = g.sub(blur(g.mul(x, x)), g.mul(mx, mx));
    const int syy = g.sub(blur(g.mul(y, y)), g.mul(my, my));
    const int sxy = g.sub(blur(g.mul(x, y)), g.mul(mx, my));
    const int cs = g.divv(g.add_scalar(g.mul_scalar(sxy, T(2)), c2),
                          g.add_scalar(g.add(sxx, syy), c2));
    const double weight = kWeights[s] / wsum;
    int term;
    if (s < scales - 1) {
      term = channel_mean(cs, h - kWin + 1, w - kWin + 1);
    } else {
      const int l = g.divv(g.add_scalar(g.mul_scalar(g.mul(mx, my), T(2)), c1),
                           g.add_scalar(g.add(g.mul(mx, mx), g.mul(my, my)), c1));
      term = channel_mean(g.mul(l, cs), h - kWin + 1, w - kWin + 1);
    }
    const int v = g.pow_scalar(g.relu(term), static_cast<T>(weight));
    value = (value < 0) ? v : g.mul(value, v);
  }
  return g.reduce_mean(value);
}

template <typename T>
int build_rd_loss(ParamCtx<T>& ctx, LLSSModel<T>& model, const CropSample& batch,
                  const BiShiftToggles& tog, RngStream& noise, DistortionMetric metric,
                  LossParts* parts) {
  Graph<T>& g = *ctx.g;
  const int h = batch.cur.left.dim(1), w = batch.cur.left.dim(2);
  if (h % 64 != 0 || w % 64 != 0)
    throw DataError("training crops must be multiples of 64 per side");
  const T beta = static_cast<T>(model.cfg.beta);
  const T inv_px = T(1) / (T(2) * static_cast<T>(h) * static_cast<T>(w));

  // Codes one frame's features through the context path; conditioning is the
  // zero pyramid for the intra frame and the warped-feature pyramid after.
  auto context_code = [&](Pair f, const CondPyramid& pyr, Pair x, FrameLoss& out, int extra_bits) {
    Pair yc = model.cae.encode(ctx, f, pyr, tog.context_ae);
    Pair zc = model.cae.hyper_encode(ctx, yc, tog.context_hyper);
    Pair zt = {add_noise(g, zc.l, noise), add_noise(g, zc.r, noise)};
    PriorPair zprior = model.cae.z_prior(ctx, 1, h / 64, w / 64);
    PriorPair yprior = model.cae.hyper_decode(ctx, zt, pyr, tog.context_hyper);
    Pair yt = {add_noise(g, yc.l, noise), add_noise(g, yc.r, noise)};
    Pair fhat = model.cae.decode(ctx, yt, pyr, tog.context_ae);
    out.recon = model.rec.fwd(ctx, fhat);

    int bits = g.add(pair_bits(g, yt, yprior), pair_bits(g, zt, zprior));
    if (extra_bits >= 0) bits = g.add(bits, extra_bits);
    out.bpp = g.mul_scalar(bits, inv_px);
    out.distortion = distortion_node(g, out.recon, x, metric);
    out.node = g.add(out.distortion, g.mul_scalar(out.bpp, beta));
  };

  // Intra pass on the earlier frame.
  Pair x_prev = {to_batch_leaf(g, batch.prev.left), to_batch_leaf(g, batch.prev.right)};
  Pair f_prev = model.ext.fwd(ctx, x_prev);
  FrameLoss intra;
  context_code(f_prev, model.zero_pyramid(g, 1, h, w), x_prev, intra, -1);

  // Predicted pass on the later frame, referenced on the detached intra
  // reconstruction re-run through the extractor (what the decoder rebuilds).
  Pair ref = model.ext.fwd(ctx, {g.detach(intra.recon.l), g.detach(intra.recon.r)});
  Pair x_cur = {to_batch_leaf(g, batch.cur.left), to_batch_leaf(g, batch.cur.right)};
  Pair f_cur = model.ext.fwd(ctx, x_cur);
  Pair m = {model.mest.fwd(ctx, f_cur.l, ref.l), model.mest.fwd(ctx, f_cur.r, ref.r)};
  Pair ym = model.mae.encode(ctx, m, tog.motion_ae);
  Pair zm = model.mae.hyper_encode(ctx, ym, tog.motion_hyper);
  Pair zt = {add_noise(g, zm.l, noise), add_noise(g, zm.r, noise)};
  PriorPair zprior = model.mae.z_prior(ctx, 1, h / 64, w / 64);
  PriorPair yprior = model.mae.hyper_decode(ctx, zt, tog.motion_hyper);
  Pair yt = {add_noise(g, ym.l, noise), add_noise(g, ym.r, noise)};
  Pair mhat = model.mae.decode(ctx, yt, tog.motion_ae);
  Pair fbar = {model.mcomp.fwd(ctx, ref.l, mhat.l), model.mcomp.fwd(ctx, ref.r, mhat.r)};
  const int motion_bits = g.add(pair_bits(g, yt, yprior), pair_bits(g, zt, zprior));

  FrameLoss pred;
  context_code(f_cur, model.cond_pyramid(ctx, fbar), x_cur, pred, motion_bits);

  const int total = g.add(intra.node, pred.node);
  if (parts) {
    parts->total = static_cast<double>(g.val(total).v[0]);
    parts->distortion =
        static_cast<double>(g.val(intra.distortion).v[0]) + g.val(pred.distortion).v[0];
    parts->rate_bpp = static_cast<double>(g.val(intra.bpp).v[0]) + g.val(pred.bpp).v[0];
  }
  return total;
}

template int graph_ms_ssim<float>(Graph<float>&, int, int);
template int graph_ms_ssim<double>(Graph<double>&, int, int);
template int build_rd_loss<float>(ParamCtx<float>&, LLSSModel<float>&, const CropSample&,
                                  const BiShiftToggles&, RngStream&, DistortionMetric,
                                  LossParts*);
template int build_rd_loss<double>(ParamCtx<double>&, LLSSModel<double>&, const CropSample&,
                                   const BiShiftToggles&, RngStream&, DistortionMetric,
                                   LossParts*);

void Adam::step(ParamCtx<float>& ctx) {
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(beta1_, t);
  const double bc2 = 1.0 - std::pow(beta2_, t);
  GraphF& g = *ctx.g;
  for (const auto& [name, id] : ctx.ids) {
    if (!g.needs_grad(id)) continue;
    const TensorF& gr = g.grad(id);
    if (gr.numel() == 0) continue;  // no gradient path reached this parameter
    TensorF& p = store_->get(name);
    auto it = state.moments.find(name);
    if (it == state.moments.end())
      it = state.moments
               .emplace(name, std::make_pair(TensorF::zeros(p.shape), TensorF::zeros(p.shape)))
               .first;
    TensorF& m = it->second.first;
    TensorF& v = it->second.second;
    for (std::size_t i = 0; i < p.v.size(); ++i) {
      const double gi = gr.v[i];
      const double mi = beta1_ * m.v[i] + (1.0 - beta1_) * gi;
      const double vi = beta2_ * v.v[i] + (1.0 - beta2_) * gi * gi;
      m.v[i] = static_cast<float>(mi);
      v.v[i] = static_cast<float>(vi);
      p.v[i] -= static_cast<float>(lr_ * (mi / bc1) / (std::sqrt(vi / bc2) + eps_));
    }
  }
}

void Adam::materialize() {
  for (const std::string& name : store_->order)
    if (!state.moments.count(name)) {
      const TensorF& p = store_->get(name);
      state.moments.emplace(name,
                            std::make_pair(TensorF::zeros(p.shape), TensorF::zeros(p.shape)));
    }
}

TrainResult train(LLSSModelF& model, const std::vector<StereoSequence>& dataset,
                  const TrainOptions& opt, Adam* resume) {
  if (dataset.empty()) throw DataError("train: empty dataset");
  const int total = opt.stage1_steps + opt.stage2_steps + opt.stage3_steps;
  Adam local(model.store, opt.lr);
  Adam& adam = resume ? *resume : local;

  RngStream crop_rng(opt.seed, "train.crop");
  RngStream noise_rng(opt.seed, "train.noise");

  std::ofstream log;
  if (!opt.log_path.empty()) {
    log.open(opt.log_path, std::ios::trunc);
    if (!log) throw DataError("cannot write training log: " + opt.log_path);
  }

  // Fixed eval clip: the first two frames of the first clip, center-cropped
  // to the training size so periodic evaluation stays cheap. Its numbers are
  // real coded sizes and metrics, never the noisy train estimates.
  StereoSequence eval_clip;
  {
    const StereoSequence& c0 = dataset[0];
    const int h = c0.height(), w = c0.width();
    const int sz = std::min({opt.crop, h, w});
    const int y0 = (h - sz) / 2, x0 = (w - sz) / 2;
    auto cut = [&](const TensorF& img) {
      TensorF out({3, sz, sz});
      for (int c = 0; c < 3; ++c)
        for (int y = 0; y < sz; ++y)
          for (int x = 0; x < sz; ++x)
            out.v[(static_cast<std::size_t>(c) * sz + y) * sz + x] =
                img.v[(static_cast<std::size_t>(c) * h + y0 + y) * w + x0 + x];
      return out;
    };
    for (std::size_t t = 0; t < std::min<std::size_t>(2, c0.frames.size()); ++t)
      eval_clip.frames.push_back({cut(c0.frames[t].left), cut(c0.frames[t].right)});
  }

  TrainResult result;
  while (adam.state.step < static_cast<std::uint64_t>(total)) {
    const int step = static_cast<int>(adam.state.step) + 1;
    const int stage = step <= opt.stage1_steps ? 1
                      : step <= opt.stage1_steps + opt.stage2_steps ? 2
                                                                    : 3;
    BiShiftToggles tog;
    const bool on = stage >= 2 && opt.enable_bishift;
    tog.motion_ae = tog.context_ae = tog.motion_hyper = tog.context_hyper = on;
    model.toggles = tog;
    const DistortionMetric metric = stage == 3 ? DistortionMetric::MS_SSIM : DistortionMetric::MSE;

    const CropSample batch = sample_crop(dataset, opt.crop, crop_rng);
    GraphF g;
    ParamCtx<float> ctx = model.ctx(g, true);
    LossParts parts;
    const int loss = build_rd_loss(ctx, model, batch, tog, noise_rng, metric, &parts);
    if (!std::isfinite(parts.total))
      throw Error("training diverged: loss is not finite at step " + std::to_string(step));
    g.backward(loss);
    adam.state.stage = stage;
    adam.step(ctx);
    result.steps_run = step;
    result.final_loss = parts.total;

    const bool boundary = step == opt.stage1_steps ||
                          step == opt.stage1_steps + opt.stage2_steps || step == total;
    if (log && (step % opt.log_every == 0 || boundary || step == 1)) {
      SequenceStats stats;
      Codec codec(model);
      codec.encode_sequence(eval_clip, &stats);
      log << "{\"step\":" << step << ",\"stage\":" << stage << ",\"beta\":" << model.cfg.beta
          << ",\"loss\":" << parts.total << ",\"distortion\":" << parts.distortion
          << ",\"train_rate_bpp\":" << parts.rate_bpp << ",\"eval_bpp\":" << stats.bpp
          << ",\"eval_psnr\":" << stats.mean_psnr << ",\"eval_msssim\":" << stats.mean_msssim
          << "}\n";
      log.flush();
    }
    if (boundary && !opt.checkpoint_dir.empty()) {
      adam.materialize();
      save_checkpoint(opt.checkpoint_dir + "/stage" + std::to_string(stage) + ".ckpt", model,
                      &adam.state);
    }
  }
  return result;
}

}  // namespace llss
