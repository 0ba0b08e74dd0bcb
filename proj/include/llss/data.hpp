// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Stereo sequence ingestion (PNG directories), dataset preprocessing crops,
// and a deterministic synthetic stereo-video generator with known layered
// disparity, used for desk-scale training and acceptance runs.
//
// Dataset layout: <root>/<clip>/left/NNNN.png and <root>/<clip>/right/NNNN.png
// with zero-padded 4-digit frame indices. The generator also writes
// <clip>/disparity/NNNN.png (16-bit grayscale, disparity * 256) as a
// diagnostic ground truth.
#pragma once

#include <string>
#include <vector>

#include "llss/rng.hpp"
#include "llss/tensor.hpp"

namespace llss {

struct StereoFrame {
  TensorF left, right;  // (3, H, W) in [0, 1]
};

struct StereoSequence {
  std::vector<StereoFrame> frames;
  int height() const { return frames.empty() ? 0 : frames[0].left.dim(1); }
  int width() const { return frames.empty() ? 0 : frames[0].left.dim(2); }
};

struct SyntheticSpec {
  std::uint64_t seed = 1;
  int num_clips = 4;
  int frames_per_clip = 4;
  int height = 256, width = 256;
  double disparity = 8.0;      // max disparity in pixels (front layer)
  double motion = 2.0;         // max per-layer translation in pixels/frame
  int texture_octaves = 4;
  int num_layers = 3;          // depth layers, back to front
};

// --- PNG I/O (8-bit sRGB in/out; 16-bit grayscale out for disparity) -------
TensorF read_png_rgb8(const std::string& path);                  // -> (3,H,W) [0,1]
void write_png_rgb8(const std::string& path, const TensorF& img);  // clamps + rounds
void write_png_gray16(const std::string& path, const std::vector<std::uint16_t>& pix, int h,
                      int w);

// --- Sequence loading -------------------------------------------------------
// Pairs left/right PNGs lexicographically; errors name the offending file or
// mismatch (count or dims).
StereoSequence load_stereo_sequence(const std::string& left_dir, const std::string& right_dir);
// Loads every clip under root (sorted by clip name).
std::vector<StereoSequence> load_dataset(const std::string& root);
void save_stereo_sequence(const std::string& clip_dir, const StereoSequence& seq);

// --- Preprocessing crops ----------------------------------------------------
// 2048x1024 -> 1920x704: 128 px off the left, 64+256 px off the bottom.
TensorF preprocess_cityscapes(const TensorF& frame);
// Top-left 1216x320 crop.
TensorF preprocess_kitti(const TensorF& frame);

// --- Synthetic generator ----------------------------------------------------
struct SyntheticClip {
  StereoSequence seq;
  std::vector<std::vector<float>> disparity;  // per frame, H*W, left-view layer disparity
};

// Layered value-noise textures; right view = left warped horizontally by
// per-layer disparity (front layers shift more); temporal motion = smooth
// per-layer translation. Deterministic from spec.seed.
SyntheticClip generate_synthetic_clip(const SyntheticSpec& spec, int clip_index);
// Generates all clips and writes them in the dataset layout. Returns clip dirs.
std::vector<std::string> generate_synthetic(const SyntheticSpec& spec, const std::string& root);

// Validates the spec invariants (disparity < W/4, motion < W/8, positive
// dims); throws DataError naming the violated constraint.
void validate_spec(const SyntheticSpec& spec);

// Random training crop: clip c, frames (t-1, t), a (ch, size, size) window.
struct CropSample {
  StereoFrame prev, cur;
};
CropSample sample_crop(const std::vector<StereoSequence>& dataset, int crop, RngStream& rng);

}  // namespace llss
