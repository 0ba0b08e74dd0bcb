// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Sequence-level codec: reference buffers, I/P-frame orchestration across both
// views, and the bitstream container.
//
// Bitstream layout (all integers little endian):
//   header: u32 magic 0x4C4C5353, u8 version (1), u16 width, u16 height,
//           u8 intra_period, u16 frame_count, u64 model_id
//   frames in order, each: u8 frame_type ('I' or 'P') + its coded segments.
// P-frames carry 8 segments (motion-hyper L,R; motion L,R; context-hyper L,R;
// context L,R), I-frames the last 4. Each segment is length-prefixed, so the
// two views' entropy decoders could run concurrently.
//
// Closed loop: both encoder and decoder rebuild reference state exclusively
// from quantized latents through the identical float code path, so encoder-
// side reconstructions are bit-identical to the decoder's.
#pragma once

#include <cstdint>
#include <vector>

#include "llss/data.hpp"
#include "llss/entropy.hpp"
#include "llss/model.hpp"

namespace llss {

constexpr std::uint32_t kBitstreamMagic = 0x4C4C5353u;
constexpr std::uint8_t kBitstreamVersion = 1;

struct BitstreamHeader {
  std::uint16_t width = 0, height = 0;
  std::uint8_t intra_period = 12;
  std::uint16_t frame_count = 0;
  std::uint64_t model_id = 0;
};

struct FrameStats {
  int index = 0;
  char type = 'I';
  double psnr_l = 0, psnr_r = 0;
  double msssim_l = 0, msssim_r = 0;
  std::vector<std::int64_t> segment_bits;      // actual payload bits
  std::vector<double> segment_estimate;        // table-ideal bits
  std::int64_t total_bits() const {
    std::int64_t s = 0;
    for (auto b : segment_bits) s += b;
    return s;
  }
};

struct SequenceStats {
  std::vector<FrameStats> frames;
  double bpp = 0;          // total payload bits / (2 * H * W * T), original dims
  double mean_psnr = 0;    // mean over frames of the per-frame two-view PSNR
  double mean_msssim = 0;
};

// Serialized header helpers (throw DecodeError on mismatch/truncation).
void write_header(std::vector<std::uint8_t>& out, const BitstreamHeader& h);
BitstreamHeader parse_header(const std::vector<std::uint8_t>& data, std::size_t& offset);

// Optional tap on the coded (dequantized) latents, used by the redundancy
// probe so it sees exactly what the codec codes.
struct LatentObserver {
  virtual ~LatentObserver() = default;
  virtual void on_motion_latents(int frame, const TensorF& left, const TensorF& right) = 0;
  virtual void on_context_latents(int frame, const TensorF& left, const TensorF& right) = 0;
};

class Codec {
 public:
  explicit Codec(LLSSModelF& model) : model_(model) {}

  void set_observer(LatentObserver* obs) { observer_ = obs; }

  // Encodes all frames; fills stats (optional) and encoder-side
  // reconstructions (optional, clamped to [0,1]).
  std::vector<std::uint8_t> encode_sequence(const StereoSequence& seq,
                                            SequenceStats* stats = nullptr,
                                            StereoSequence* recons = nullptr);

  // Decodes a full bitstream; stats gain segment sizes (no quality numbers
  // unless `original` is supplied for comparison).
  StereoSequence decode_sequence(const std::vector<std::uint8_t>& data,
                                 SequenceStats* stats = nullptr,
                                 const StereoSequence* original = nullptr);

 private:
  LLSSModelF& model_;
  CdfTablePool pool_;
  LatentObserver* observer_ = nullptr;
};

}  // namespace llss
