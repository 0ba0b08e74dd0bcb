// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Bitstream-level behavior of the codec: closed-loop determinism, header and
// payload validation, frame typing, padding, and the statistics surface.

#include <doctest.h>

#include <vector>

#include "llss/codec.hpp"
#include "llss/data.hpp"
#include "test_util.hpp"

using namespace llss;
using testutil::toy_config;

namespace {

StereoSequence make_clip(int frames, int h, int w, std::uint64_t seed = 11) {
  SyntheticSpec spec;
  spec.seed = seed;
  spec.num_clips = 1;
  spec.frames_per_clip = frames;
  spec.height = h;
  spec.width = w;
  spec.disparity = 6.0;
  spec.motion = 1.5;
  return generate_synthetic_clip(spec, 0).seq;
}

}  // namespace

TEST_CASE("closed loop: decoder reproduces encoder reconstructions exactly") {
  LLSSModelF model(toy_config());
  Codec codec(model);
  const StereoSequence clip = make_clip(3, 64, 64);

  SequenceStats stats;
  StereoSequence recons;
  const auto bytes = codec.encode_sequence(clip, &stats, &recons);
  REQUIRE(recons.frames.size() == 3);

  SequenceStats dstats;
  const StereoSequence decoded = codec.decode_sequence(bytes, &dstats, &clip);
  REQUIRE(decoded.frames.size() == 3);
  for (int t = 0; t < 3; ++t) {
    CHECK(decoded.frames[t].left.v == recons.frames[t].left.v);
    CHECK(decoded.frames[t].right.v == recons.frames[t].right.v);
  }

  // Metrics computed on either side agree, and repeated encodes are stable.
  CHECK(dstats.bpp == doctest::Approx(stats.bpp));
  CHECK(dstats.mean_psnr == doctest::Approx(stats.mean_psnr));
  CHECK(codec.encode_sequence(clip) == bytes);
}

TEST_CASE("frame typing follows the intra period") {
  CodecConfig cfg = toy_config();
  cfg.intra_period = 2;
  LLSSModelF model(cfg);
  Codec codec(model);
  SequenceStats stats;
  codec.encode_sequence(make_clip(5, 64, 64), &stats);
  REQUIRE(stats.frames.size() == 5);
  CHECK(stats.frames[0].type == 'I');
  CHECK(stats.frames[1].type == 'P');
  CHECK(stats.frames[2].type == 'I');
  CHECK(stats.frames[3].type == 'P');
  CHECK(stats.frames[4].type == 'I');

  // Intra frames code only the context pair of latents; predicted frames add
  // the motion pair.
  CHECK(stats.frames[0].segment_bits.size() == 4);
  CHECK(stats.frames[1].segment_bits.size() == 8);

  for (const FrameStats& f : stats.frames) {
    CHECK(f.total_bits() > 0);
    CHECK(f.psnr_l > 0);
    CHECK(f.msssim_l <= 1.0);
    CHECK(f.segment_estimate.size() == f.segment_bits.size());
  }
}

TEST_CASE("inputs that are not multiples of 64 are padded internally") {
  LLSSModelF model(toy_config());
  Codec codec(model);
  const StereoSequence clip = make_clip(2, 72, 80);

  SequenceStats stats;
  const auto bytes = codec.encode_sequence(clip, &stats);
  const StereoSequence decoded = codec.decode_sequence(bytes);
  REQUIRE(decoded.frames.size() == 2);
  CHECK(decoded.frames[0].left.dim(1) == 72);
  CHECK(decoded.frames[0].left.dim(2) == 80);

  // bpp is charged against the original pixel count, both views.
  double bits = 0;
  for (const auto& f : stats.frames)
    for (auto b : f.segment_bits) bits += static_cast<double>(b);
  CHECK(stats.bpp == doctest::Approx(bits / (2.0 * 72 * 80 * 2)));
}

TEST_CASE("header validation") {
  LLSSModelF model(toy_config());
  Codec codec(model);
  auto bytes = codec.encode_sequence(make_clip(2, 64, 64));

  // Magic.
  {
    auto bad = bytes;
    bad[0] ^= 0xff;
    try {
      codec.decode_sequence(bad);
      FAIL("expected a corrupt-stream error");
    } catch (const DecodeError& e) {
      CHECK(e.kind == DecodeError::Kind::Corrupt);
    }
  }
  // Version byte sits after the magic.
  {
    auto bad = bytes;
    bad[4] = 0x7f;
    try {
      codec.decode_sequence(bad);
      FAIL("expected a version mismatch error");
    } catch (const DecodeError& e) {
      CHECK(e.kind == DecodeError::Kind::ConfigMismatch);
    }
  }
  // Truncation at an arbitrary point.
  {
    std::vector<std::uint8_t> cut(bytes.begin(), bytes.begin() + bytes.size() / 2);
    CHECK_THROWS_AS(codec.decode_sequence(cut), DecodeError);
  }
  // Empty input.
  CHECK_THROWS_AS(codec.decode_sequence({}), DecodeError);
}

TEST_CASE("decoding with the wrong model fails loudly") {
  LLSSModelF a(toy_config());
  LLSSModelF b(toy_config(), 777);
  const auto bytes = Codec(a).encode_sequence(make_clip(2, 64, 64));
  try {
    Codec(b).decode_sequence(bytes);
    FAIL("expected a model mismatch error");
  } catch (const DecodeError& e) {
    CHECK(e.kind == DecodeError::Kind::ConfigMismatch);
  }
}

TEST_CASE("payload corruption is detected or survived, never fatal") {
  LLSSModelF model(toy_config());
  Codec codec(model);
  const auto bytes = codec.encode_sequence(make_clip(2, 64, 64));

  // Flip one byte somewhere in the middle of the coded payload. The decoder
  // must either throw a decode error or produce (wrong) frames; anything but
  // a crash or hang.
  for (std::size_t pos : {bytes.size() / 2, bytes.size() - 3}) {
    auto bad = bytes;
    bad[pos] ^= 0x01;
    try {
      codec.decode_sequence(bad);
    } catch (const DecodeError&) {
      // acceptable
    }
  }
}

TEST_CASE("latent observer sees predicted frames") {
  struct Counter final : LatentObserver {
    int motion = 0, context = 0;
    std::vector<int> shape;
    void on_motion_latents(int, const TensorF& l, const TensorF& r) override {
      ++motion;
      shape = l.shape;
      REQUIRE(l.same_shape(r));
    }
    void on_context_latents(int, const TensorF&, const TensorF&) override { ++context; }
  };

  LLSSModelF model(toy_config());
  Codec codec(model);
  Counter counter;
  codec.set_observer(&counter);
  codec.encode_sequence(make_clip(3, 64, 64));
  CHECK(counter.motion == 2);   // two predicted frames
  CHECK(counter.context == 3);  // every frame codes context latents
  CHECK(counter.shape == std::vector<int>({1, 16, 4, 4}));
}

TEST_CASE("encoder input guards") {
  LLSSModelF model(toy_config());
  Codec codec(model);
  CHECK_THROWS_AS(codec.encode_sequence(StereoSequence{}), DataError);

  // Mismatched view shapes.
  StereoSequence bad = make_clip(1, 64, 64);
  bad.frames[0].right = TensorF::zeros({3, 64, 72});
  CHECK_THROWS_AS(codec.encode_sequence(bad), DataError);
}
