// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/codec.hpp"

#include <algorithm>
#include <cmath>

#include "llss/checkpoint.hpp"
#include "llss/math.hpp"
#include "llss/metrics.hpp"

namespace llss {
namespace {

void put_u16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xff));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

void put_u64(std::vector<std::uint8_t>& out, std::uint64_t v) {
  for (int i = 0; i < 8; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

std::uint64_t get_le(const std::vector<std::uint8_t>& d, std::size_t& off, int bytes) {
  if (off + bytes > d.size())
    throw DecodeError(DecodeError::Kind::Truncated,
                      "bitstream truncated inside the header at byte " + std::to_string(off),
                      -1, -1, static_cast<long>(off));
  std::uint64_t v = 0;
  for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(d[off + i]) << (8 * i);
  off += bytes;
  return v;
}

// (3,H,W) -> (1,3,Hp,Wp) with symmetric padding up to multiples of 64.
TensorF pad_frame(const TensorF& img) {
  const int h = img.dim(1), w = img.dim(2);
  const int hp = (h + 63) / 64 * 64, wp = (w + 63) / 64 * 64;
  TensorF batch({1, 3, h, w});
  std::copy(img.v.begin(), img.v.end(), batch.v.begin());
  if (hp == h && wp == w) return batch;
  return pad2d_fwd(batch, 0, wp - w, 0, hp - h, PadMode::Symmetric);
}

// (1,3,Hp,Wp) -> (3,H,W) crop of the top-left corner, clamped to [0,1].
TensorF unpad_clamp(const TensorF& batch, int h, int w) {
  TensorF out({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const float v = batch.v[batch.idx4(0, c, y, x)];
        out.v[(static_cast<std::size_t>(c) * h + y) * w + x] = std::min(1.0f, std::max(0.0f, v));
      }
  return out;
}

TensorF clamp01(TensorF t) {
  for (float& v : t.v) v = std::min(1.0f, std::max(0.0f, v));
  return t;
}

// One coded latent: quantizes against mu, entropy-codes with per-element
// sigma tables, and returns the dequantized tensor the rest of the network
// keeps computing with. exp is the pinned deterministic one so the
// sigma->table mapping is identical wherever the stream is decoded.
struct CodedLatent {
  CodedSegment segment;
  double estimate = 0;
  TensorF y_hat;
};

std::vector<const IntegerCdfTable*> sigma_tables(CdfTablePool& pool, const TensorF& log_sigma) {
  std::vector<const IntegerCdfTable*> tables(log_sigma.numel());
  for (std::size_t i = 0; i < tables.size(); ++i)
    tables[i] = pool.for_sigma(exp_pinned(static_cast<double>(log_sigma.v[i])));
  return tables;
}

CodedLatent code_latent(CdfTablePool& pool, const TensorF& y, const TensorF& mu,
                        const TensorF& log_sigma) {
  CodedLatent out;
  const QuantizedLatent q = quantize_eval(y, mu);
  std::vector<int> symbols(q.symbols.numel());
  for (std::size_t i = 0; i < symbols.size(); ++i)
    symbols[i] = static_cast<int>(q.symbols.v[i]);
  const auto tables = sigma_tables(pool, log_sigma);
  out.segment = range_encode(symbols, tables);
  out.estimate = table_ideal_bits(symbols, tables);
  out.y_hat = dequantize(q, mu);
  return out;
}

TensorF decode_latent(CdfTablePool& pool, const CodedSegment& seg, const TensorF& mu,
                      const TensorF& log_sigma, int frame, int segment) {
  if (seg.symbol_count != mu.numel())
    throw DecodeError(DecodeError::Kind::Corrupt,
                      "segment declares " + std::to_string(seg.symbol_count) + " symbols, model expects " +
                          std::to_string(mu.numel()),
                      frame, segment);
  const auto tables = sigma_tables(pool, log_sigma);
  std::vector<int> symbols;
  try {
    symbols = range_decode(seg, tables);
  } catch (const DecodeError& e) {
    throw DecodeError(e.kind, e.what(), frame, segment, e.byte_offset);
  }
  QuantizedLatent q;
  q.symbols = TensorF(mu.shape);
  for (std::size_t i = 0; i < symbols.size(); ++i)
    q.symbols.v[i] = static_cast<float>(symbols[i]);
  return dequantize(q, mu);
}

void check_scale(const TensorF& t, int expect_h, int expect_w, const char* what) {
  if (t.dim(2) != expect_h || t.dim(3) != expect_w)
    throw ShapeError(std::string(what) + ": expected " + std::to_string(expect_h) + "x" +
                     std::to_string(expect_w) + ", got " + std::to_string(t.dim(2)) + "x" +
                     std::to_string(t.dim(3)));
}

}  // namespace

void write_header(std::vector<std::uint8_t>& out, const BitstreamHeader& h) {
  put_u32(out, kBitstreamMagic);
  out.push_back(kBitstreamVersion);
  put_u16(out, h.width);
  put_u16(out, h.height);
  out.push_back(h.intra_period);
  put_u16(out, h.frame_count);
  put_u64(out, h.model_id);
}

BitstreamHeader parse_header(const std::vector<std::uint8_t>& data, std::size_t& offset) {
  const std::uint32_t magic = static_cast<std::uint32_t>(get_le(data, offset, 4));
  if (magic != kBitstreamMagic)
    throw DecodeError(DecodeError::Kind::Corrupt, "bad bitstream magic");
  const std::uint8_t version = static_cast<std::uint8_t>(get_le(data, offset, 1));
  if (version != kBitstreamVersion)
    throw DecodeError(DecodeError::Kind::ConfigMismatch,
                      "unsupported bitstream version " + std::to_string(version));
  BitstreamHeader h;
  h.width = static_cast<std::uint16_t>(get_le(data, offset, 2));
  h.height = static_cast<std::uint16_t>(get_le(data, offset, 2));
  h.intra_period = static_cast<std::uint8_t>(get_le(data, offset, 1));
  h.frame_count = static_cast<std::uint16_t>(get_le(data, offset, 2));
  h.model_id = get_le(data, offset, 8);
  if (h.width == 0 || h.height == 0)
    throw DecodeError(DecodeError::Kind::Corrupt, "bitstream header has zero dimensions");
  return h;
}

std::vector<std::uint8_t> Codec::encode_sequence(const StereoSequence& seq, SequenceStats* stats,
                                                 StereoSequence* recons) {
  if (seq.frames.empty()) throw DataError("encode: empty sequence");
  if (seq.frames.size() > 65535) throw DataError("encode: sequence longer than 65535 frames");
  const int oh = seq.height(), ow = seq.width();
  if (oh > 65535 || ow > 65535) throw DataError("encode: frame dimensions exceed 65535");
  for (const StereoFrame& f : seq.frames)
    if (f.left.dim(1) != oh || f.left.dim(2) != ow || !f.left.same_shape(f.right))
      throw DataError("encode: frames have mismatched dimensions");

  const CodecConfig& cfg = model_.cfg;
  std::vector<std::uint8_t> out;
  BitstreamHeader hdr;
  hdr.width = static_cast<std::uint16_t>(ow);
  hdr.height = static_cast<std::uint16_t>(oh);
  hdr.intra_period = static_cast<std::uint8_t>(cfg.intra_period);
  hdr.frame_count = static_cast<std::uint16_t>(seq.frames.size());
  hdr.model_id = model_digest(model_);
  write_header(out, hdr);

  if (stats) *stats = SequenceStats{};
  if (recons) recons->frames.clear();

  TensorF ref_l, ref_r;  // decoder-reproducible reference features
  std::int64_t payload_bits = 0;
  const BiShiftToggles& tog = model_.toggles;

  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const bool intra = (t % static_cast<std::size_t>(cfg.intra_period)) == 0;
    out.push_back(intra ? 'I' : 'P');

    const TensorF xl = pad_frame(seq.frames[t].left);
    const TensorF xr = pad_frame(seq.frames[t].right);
    const int h = xl.dim(2), w = xl.dim(3);

    GraphF g;
    ParamCtx<float> ctx = model_.ctx(g, false);
    Pair f = model_.ext.fwd(ctx, {g.leaf(xl, false), g.leaf(xr, false)});

    std::vector<CodedSegment> segments;
    std::vector<double> estimates;
    auto emit = [&](CodedLatent&& cl) {
      estimates.push_back(cl.estimate);
      segments.push_back(std::move(cl.segment));
      return g.leaf(std::move(cl.y_hat), false);
    };

    CondPyramid pyr;
    if (intra) {
      pyr = model_.zero_pyramid(g, 1, h, w);
    } else {
      Pair fprev = {g.leaf(ref_l, false), g.leaf(ref_r, false)};
      Pair m = {model_.mest.fwd(ctx, f.l, fprev.l), model_.mest.fwd(ctx, f.r, fprev.r)};
      Pair ym = model_.mae.encode(ctx, m, tog.motion_ae);
      check_scale(g.val(ym.l), h / 16, w / 16, "motion latent");
      Pair zm = model_.mae.hyper_encode(ctx, ym, tog.motion_hyper);
      check_scale(g.val(zm.l), h / 64, w / 64, "motion hyper latent");
      PriorPair zp = model_.mae.z_prior(ctx, 1, h / 64, w / 64);
      Pair zh = {emit(code_latent(pool_, g.val(zm.l), g.val(zp.mu.l), g.val(zp.log_sigma.l))),
                 emit(code_latent(pool_, g.val(zm.r), g.val(zp.mu.r), g.val(zp.log_sigma.r)))};
      PriorPair yp = model_.mae.hyper_decode(ctx, zh, tog.motion_hyper);
      Pair yh = {emit(code_latent(pool_, g.val(ym.l), g.val(yp.mu.l), g.val(yp.log_sigma.l))),
                 emit(code_latent(pool_, g.val(ym.r), g.val(yp.mu.r), g.val(yp.log_sigma.r)))};
      if (observer_) observer_->on_motion_latents(static_cast<int>(t), g.val(yh.l), g.val(yh.r));
      Pair mhat = model_.mae.decode(ctx, yh, tog.motion_ae);
      Pair fbar = {model_.mcomp.fwd(ctx, fprev.l, mhat.l),
                   model_.mcomp.fwd(ctx, fprev.r, mhat.r)};
      pyr = model_.cond_pyramid(ctx, fbar);
    }

    Pair yc = model_.cae.encode(ctx, f, pyr, tog.context_ae);
    check_scale(g.val(yc.l), h / 16, w / 16, "context latent");
    Pair zc = model_.cae.hyper_encode(ctx, yc, tog.context_hyper);
    check_scale(g.val(zc.l), h / 64, w / 64, "context hyper latent");
    PriorPair zp = model_.cae.z_prior(ctx, 1, h / 64, w / 64);
    Pair zh = {emit(code_latent(pool_, g.val(zc.l), g.val(zp.mu.l), g.val(zp.log_sigma.l))),
               emit(code_latent(pool_, g.val(zc.r), g.val(zp.mu.r), g.val(zp.log_sigma.r)))};
    PriorPair yp = model_.cae.hyper_decode(ctx, zh, pyr, tog.context_hyper);
    Pair yh = {emit(code_latent(pool_, g.val(yc.l), g.val(yp.mu.l), g.val(yp.log_sigma.l))),
               emit(code_latent(pool_, g.val(yc.r), g.val(yp.mu.r), g.val(yp.log_sigma.r)))};
    if (observer_) observer_->on_context_latents(static_cast<int>(t), g.val(yh.l), g.val(yh.r));
    Pair fhat = model_.cae.decode(ctx, yh, pyr, tog.context_ae);
    Pair xhat = model_.rec.fwd(ctx, fhat);

    const TensorF rec_l = clamp01(g.val(xhat.l));
    const TensorF rec_r = clamp01(g.val(xhat.r));
    // Reference features are re-extracted from the clamped reconstruction,
    // exactly as the decoder will.
    Pair rf = model_.ext.fwd(ctx, {g.leaf(rec_l, false), g.leaf(rec_r, false)});
    ref_l = g.val(rf.l);
    ref_r = g.val(rf.r);

    for (const CodedSegment& s : segments) {
      append_segment(out, s);
      payload_bits += static_cast<std::int64_t>(s.payload.size()) * 8;
    }

    const TensorF out_l = unpad_clamp(g.val(xhat.l), oh, ow);
    const TensorF out_r = unpad_clamp(g.val(xhat.r), oh, ow);
    if (recons) recons->frames.push_back({out_l, out_r});
    if (stats) {
      FrameStats fs;
      fs.index = static_cast<int>(t);
      fs.type = intra ? 'I' : 'P';
      fs.psnr_l = psnr(seq.frames[t].left, out_l);
      fs.psnr_r = psnr(seq.frames[t].right, out_r);
      fs.msssim_l = ms_ssim(seq.frames[t].left, out_l);
      fs.msssim_r = ms_ssim(seq.frames[t].right, out_r);
      for (const CodedSegment& s : segments)
        fs.segment_bits.push_back(static_cast<std::int64_t>(s.payload.size()) * 8);
      fs.segment_estimate = estimates;
      stats->frames.push_back(std::move(fs));
    }
  }

  if (stats) {
    stats->bpp = static_cast<double>(payload_bits) /
                 (2.0 * oh * ow * static_cast<double>(seq.frames.size()));
    double sp = 0, sm = 0;
    for (const FrameStats& fs : stats->frames) {
      sp += 0.5 * (fs.psnr_l + fs.psnr_r);
      sm += 0.5 * (fs.msssim_l + fs.msssim_r);
    }
    stats->mean_psnr = sp / stats->frames.size();
    stats->mean_msssim = sm / stats->frames.size();
  }
  return out;
}

StereoSequence Codec::decode_sequence(const std::vector<std::uint8_t>& data, SequenceStats* stats,
                                      const StereoSequence* original) {
  std::size_t off = 0;
  const BitstreamHeader hdr = parse_header(data, off);
  if (hdr.model_id != model_digest(model_))
    throw DecodeError(DecodeError::Kind::ConfigMismatch,
                      "bitstream was coded with a different model (digest mismatch)");
  const int oh = hdr.height, ow = hdr.width;
  const int h = (oh + 63) / 64 * 64, w = (ow + 63) / 64 * 64;
  const BiShiftToggles& tog = model_.toggles;

  StereoSequence out;
  if (stats) *stats = SequenceStats{};
  std::int64_t payload_bits = 0;
  TensorF ref_l, ref_r;

  for (int t = 0; t < hdr.frame_count; ++t) {
    if (off >= data.size())
      throw DecodeError(DecodeError::Kind::Truncated,
                        "stream ends before frame " + std::to_string(t), t, -1,
                        static_cast<long>(off));
    const char type = static_cast<char>(data[off++]);
    if (type != 'I' && type != 'P')
      throw DecodeError(DecodeError::Kind::Corrupt,
                        "unknown frame type byte " + std::to_string(int(type)), t, -1,
                        static_cast<long>(off - 1));
    if (type == 'P' && t == 0)
      throw DecodeError(DecodeError::Kind::Corrupt, "first frame is not intra", t);

    GraphF g;
    ParamCtx<float> ctx = model_.ctx(g, false);
    int seg_idx = 0;
    auto next_latent = [&](const TensorF& mu, const TensorF& ls) {
      const CodedSegment seg = read_segment(data, off, t, seg_idx);
      payload_bits += static_cast<std::int64_t>(seg.payload.size()) * 8;
      if (stats && !stats->frames.empty())
        stats->frames.back().segment_bits.push_back(
            static_cast<std::int64_t>(seg.payload.size()) * 8);
      TensorF yh = decode_latent(pool_, seg, mu, ls, t, seg_idx);
      ++seg_idx;
      return g.leaf(std::move(yh), false);
    };
    if (stats) {
      FrameStats fs;
      fs.index = t;
      fs.type = type;
      stats->frames.push_back(std::move(fs));
    }

    CondPyramid pyr;
    if (type == 'I') {
      pyr = model_.zero_pyramid(g, 1, h, w);
    } else {
      Pair fprev = {g.leaf(ref_l, false), g.leaf(ref_r, false)};
      PriorPair zp = model_.mae.z_prior(ctx, 1, h / 64, w / 64);
      Pair zh = {next_latent(g.val(zp.mu.l), g.val(zp.log_sigma.l)),
                 next_latent(g.val(zp.mu.r), g.val(zp.log_sigma.r))};
      PriorPair yp = model_.mae.hyper_decode(ctx, zh, tog.motion_hyper);
      Pair yh = {next_latent(g.val(yp.mu.l), g.val(yp.log_sigma.l)),
                 next_latent(g.val(yp.mu.r), g.val(yp.log_sigma.r))};
      Pair mhat = model_.mae.decode(ctx, yh, tog.motion_ae);
      Pair fbar = {model_.mcomp.fwd(ctx, fprev.l, mhat.l),
                   model_.mcomp.fwd(ctx, fprev.r, mhat.r)};
      pyr = model_.cond_pyramid(ctx, fbar);
    }

    PriorPair zp = model_.cae.z_prior(ctx, 1, h / 64, w / 64);
    Pair zh = {next_latent(g.val(zp.mu.l), g.val(zp.log_sigma.l)),
               next_latent(g.val(zp.mu.r), g.val(zp.log_sigma.r))};
    PriorPair yp = model_.cae.hyper_decode(ctx, zh, pyr, tog.context_hyper);
    Pair yh = {next_latent(g.val(yp.mu.l), g.val(yp.log_sigma.l)),
               next_latent(g.val(yp.mu.r), g.val(yp.log_sigma.r))};
    Pair fhat = model_.cae.decode(ctx, yh, pyr, tog.context_ae);
    Pair xhat = model_.rec.fwd(ctx, fhat);

    const TensorF rec_l = clamp01(g.val(xhat.l));
    const TensorF rec_r = clamp01(g.val(xhat.r));
    Pair rf = model_.ext.fwd(ctx, {g.leaf(rec_l, false), g.leaf(rec_r, false)});
    ref_l = g.val(rf.l);
    ref_r = g.val(rf.r);

    const TensorF out_l = unpad_clamp(g.val(xhat.l), oh, ow);
    const TensorF out_r = unpad_clamp(g.val(xhat.r), oh, ow);
    if (stats && original && t < static_cast<int>(original->frames.size())) {
      FrameStats& fs = stats->frames.back();
      fs.psnr_l = psnr(original->frames[t].left, out_l);
      fs.psnr_r = psnr(original->frames[t].right, out_r);
      fs.msssim_l = ms_ssim(original->frames[t].left, out_l);
      fs.msssim_r = ms_ssim(original->frames[t].right, out_r);
    }
    out.frames.push_back({out_l, out_r});
  }

  if (stats) {
    stats->bpp = static_cast<double>(payload_bits) /
                 (2.0 * oh * ow * static_cast<double>(hdr.frame_count));
    if (original) {
      double sp = 0, sm = 0;
      for (const FrameStats& fs : stats->frames) {
        sp += 0.5 * (fs.psnr_l + fs.psnr_r);
        sm += 0.5 * (fs.msssim_l + fs.msssim_r);
      }
      stats->mean_psnr = sp / stats->frames.size();
      stats->mean_msssim = sm / stats->frames.size();
    }
  }
  return out;
}

}  // namespace llss
