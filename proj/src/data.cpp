// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/data.hpp"

#include <png.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <string>
#include <vector>

#include "llss/errors.hpp"

namespace fs = std::filesystem;

namespace llss {
namespace {

// --- PNG helpers ------------------------------------------------------------

struct PngFile {
  std::FILE* f = nullptr;
  explicit PngFile(const std::string& path, const char* mode) : f(std::fopen(path.c_str(), mode)) {}
  ~PngFile() {
    if (f) std::fclose(f);
  }
  PngFile(const PngFile&) = delete;
  PngFile& operator=(const PngFile&) = delete;
};

[[noreturn]] void png_fail(png_structp, png_const_charp msg) {
  throw DataError(std::string("libpng: ") + msg);
}

void png_warn(png_structp, png_const_charp) {}

// --- Synthetic texture hashing ----------------------------------------------

std::uint64_t splitmix(std::uint64_t x) {
  x ^= x >> 30;
  x *= 0xbf58476d1ce4e5b9ULL;
  x ^= x >> 27;
  x *= 0x94d049bb133111ebULL;
  x ^= x >> 31;
  return x;
}

std::uint64_t field_salt(std::uint64_t seed, int clip, int layer, int octave, int channel) {
  std::uint64_t h = splitmix(seed ^ 0x746578ULL);
  h = splitmix(h ^ static_cast<std::uint64_t>(clip));
  h = splitmix(h ^ (static_cast<std::uint64_t>(layer) << 8));
  h = splitmix(h ^ (static_cast<std::uint64_t>(octave) << 16));
  h = splitmix(h ^ (static_cast<std::uint64_t>(channel) << 24));
  return h;
}

// Hashed lattice value in [0, 1); infinite domain, no wraparound.
double lattice(std::uint64_t salt, std::int64_t i, std::int64_t j) {
  const std::uint64_t h =
      splitmix(salt ^ splitmix(static_cast<std::uint64_t>(i) * 0x9e3779b97f4a7c15ULL) ^
               splitmix(static_cast<std::uint64_t>(j) * 0xc2b2ae3d27d4eb4fULL));
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

// One octave of value noise: smoothstep-interpolated lattice hash.
double value_noise(std::uint64_t salt, double x, double y) {
  const double fx = std::floor(x), fy = std::floor(y);
  const auto i = static_cast<std::int64_t>(fx), j = static_cast<std::int64_t>(fy);
  double u = x - fx, v = y - fy;
  u = u * u * (3 - 2 * u);
  v = v * v * (3 - 2 * v);
  const double a = lattice(salt, i, j), b = lattice(salt, i + 1, j);
  const double c = lattice(salt, i, j + 1), d = lattice(salt, i + 1, j + 1);
  return (a + (b - a) * u) * (1 - v) + (c + (d - c) * u) * v;
}

// Multi-octave fractal value noise in [0, 1]; base cell 64 px, each octave
// halves the cell and the amplitude.
double octave_noise(std::uint64_t seed, int clip, int layer, int channel, int octaves, double x,
                    double y) {
  double sum = 0, amp = 1, norm = 0, cell = 64.0;
  for (int o = 0; o < octaves; ++o) {
    sum += amp * value_noise(field_salt(seed, clip, layer, o, channel), x / cell, y / cell);
    norm += amp;
    amp *= 0.5;
    cell *= 0.5;
  }
  return sum / norm;
}

// Soft coverage mask for foreground layers: coarse 2-octave noise pushed
// through a steep ramp, roughly half coverage with ~10 px soft edges.
double layer_alpha(std::uint64_t seed, int clip, int layer, double x, double y) {
  const double n = octave_noise(seed, clip, layer, 3, 2, x * 64.0 / 96.0, y * 64.0 / 96.0);
  return std::clamp((n - 0.5) * 5.0 + 0.5, 0.0, 1.0);
}

std::string frame_name(int t) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d.png", t);
  return buf;
}

std::vector<std::string> list_pngs(const std::string& dir) {
  if (!fs::is_directory(dir)) throw DataError("not a directory: " + dir);
  std::vector<std::string> out;
  for (const auto& e : fs::directory_iterator(dir))
    if (e.is_regular_file() && e.path().extension() == ".png") out.push_back(e.path().string());
  std::sort(out.begin(), out.end());
  if (out.empty()) throw DataError("no .png frames in: " + dir);
  return out;
}

TensorF crop_top_left(const TensorF& frame, int x0, int y0, int w, int h, const char* what) {
  if (frame.shape.size() != 3 || frame.dim(0) != 3)
    throw DataError(std::string(what) + ": expected a (3,H,W) frame");
  if (frame.dim(1) < y0 + h || frame.dim(2) < x0 + w)
    throw DataError(std::string(what) + ": frame " + std::to_string(frame.dim(2)) + "x" +
                    std::to_string(frame.dim(1)) + " too small for the crop");
  TensorF out({3, h, w});
  const int sh = frame.dim(1), sw = frame.dim(2);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        out.v[(static_cast<std::size_t>(c) * h + y) * w + x] =
            frame.v[(static_cast<std::size_t>(c) * sh + y0 + y) * sw + x0 + x];
  return out;
}

}  // namespace

TensorF read_png_rgb8(const std::string& path) {
  PngFile file(path, "rb");
  if (!file.f) throw DataError("cannot open image: " + path);
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw DataError("png_create_read_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  try {
    png_init_io(png, file.f);
    png_read_info(png, info);
    // Normalize everything to 8-bit RGB.
    png_set_expand(png);
    png_set_strip_16(png);
    png_set_strip_alpha(png);
    png_set_gray_to_rgb(png);
    png_set_interlace_handling(png);
    png_read_update_info(png, info);
    const int w = static_cast<int>(png_get_image_width(png, info));
    const int h = static_cast<int>(png_get_image_height(png, info));
    if (png_get_channels(png, info) != 3)
      throw DataError("unsupported channel layout in: " + path);
    const std::size_t rowbytes = png_get_rowbytes(png, info);
    std::vector<std::uint8_t> buf(rowbytes * h);
    std::vector<png_bytep> rows(h);
    for (int y = 0; y < h; ++y) rows[y] = buf.data() + rowbytes * y;
    png_read_image(png, rows.data());
    png_read_end(png, nullptr);
    png_destroy_read_struct(&png, &info, nullptr);
    TensorF out({3, h, w});
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c)
          out.v[(static_cast<std::size_t>(c) * h + y) * w + x] =
              static_cast<float>(buf[rowbytes * y + static_cast<std::size_t>(x) * 3 + c]) / 255.0f;
    return out;
  } catch (...) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw;
  }
}

void write_png_rgb8(const std::string& path, const TensorF& img) {
  if (img.shape.size() != 3 || img.dim(0) != 3)
    throw DataError("write_png_rgb8: expected a (3,H,W) tensor");
  const int h = img.dim(1), w = img.dim(2);
  PngFile file(path, "wb");
  if (!file.f) throw DataError("cannot create image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  try {
    png_init_io(png, file.f);
    png_set_IHDR(png, info, w, h, 8, PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 3);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x)
        for (int c = 0; c < 3; ++c) {
          const float v = img.v[(static_cast<std::size_t>(c) * h + y) * w + x];
          const float s = std::min(1.0f, std::max(0.0f, v));
          row[static_cast<std::size_t>(x) * 3 + c] =
              static_cast<std::uint8_t>(std::lround(s * 255.0f));
        }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
}

void write_png_gray16(const std::string& path, const std::vector<std::uint16_t>& pix, int h,
                      int w) {
  if (pix.size() != static_cast<std::size_t>(h) * w)
    throw DataError("write_png_gray16: pixel count does not match dimensions");
  PngFile file(path, "wb");
  if (!file.f) throw DataError("cannot create image: " + path);
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, png_fail, png_warn);
  if (!png) throw DataError("png_create_write_struct failed");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw DataError("png_create_info_struct failed");
  }
  try {
    png_init_io(png, file.f);
    png_set_IHDR(png, info, w, h, 16, PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE,
                 PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
    png_write_info(png, info);
    std::vector<std::uint8_t> row(static_cast<std::size_t>(w) * 2);  // big endian
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        const std::uint16_t v = pix[static_cast<std::size_t>(y) * w + x];
        row[static_cast<std::size_t>(x) * 2] = static_cast<std::uint8_t>(v >> 8);
        row[static_cast<std::size_t>(x) * 2 + 1] = static_cast<std::uint8_t>(v & 0xff);
      }
      png_write_row(png, row.data());
    }
    png_write_end(png, nullptr);
    png_destroy_write_struct(&png, &info);
  } catch (...) {
    png_destroy_write_struct(&png, &info);
    throw;
  }
}

StereoSequence load_stereo_sequence(const std::string& left_dir, const std::string& right_dir) {
  const auto lf = list_pngs(left_dir);
  const auto rf = list_pngs(right_dir);
  if (lf.size() != rf.size())
    throw DataError("view frame counts differ: " + left_dir + " has " +
                    std::to_string(lf.size()) + ", " + right_dir + " has " +
                    std::to_string(rf.size()));
  StereoSequence seq;
  for (std::size_t i = 0; i < lf.size(); ++i) {
    StereoFrame f{read_png_rgb8(lf[i]), read_png_rgb8(rf[i])};
    if (!f.left.same_shape(f.right))
      throw DataError("view dimensions differ between " + lf[i] + " and " + rf[i]);
    if (!seq.frames.empty() && !f.left.same_shape(seq.frames[0].left))
      throw DataError("frame dimensions change at " + lf[i]);
    seq.frames.push_back(std::move(f));
  }
  return seq;
}

std::vector<StereoSequence> load_dataset(const std::string& root) {
  if (!fs::is_directory(root)) throw DataError("not a directory: " + root);
  std::vector<std::string> clips;
  for (const auto& e : fs::directory_iterator(root))
    if (e.is_directory()) clips.push_back(e.path().string());
  std::sort(clips.begin(), clips.end());
  if (clips.empty()) throw DataError("no clip directories in: " + root);
  std::vector<StereoSequence> out;
  for (const auto& c : clips) out.push_back(load_stereo_sequence(c + "/left", c + "/right"));
  return out;
}

void save_stereo_sequence(const std::string& clip_dir, const StereoSequence& seq) {
  fs::create_directories(clip_dir + "/left");
  fs::create_directories(clip_dir + "/right");
  for (std::size_t t = 0; t < seq.frames.size(); ++t) {
    const std::string name = frame_name(static_cast<int>(t));
    write_png_rgb8(clip_dir + "/left/" + name, seq.frames[t].left);
    write_png_rgb8(clip_dir + "/right/" + name, seq.frames[t].right);
  }
}

TensorF preprocess_cityscapes(const TensorF& frame) {
  if (frame.shape.size() != 3 || frame.dim(1) != 1024 || frame.dim(2) != 2048)
    throw DataError("preprocess_cityscapes: expected a (3,1024,2048) frame");
  return crop_top_left(frame, 128, 0, 1920, 704, "preprocess_cityscapes");
}

TensorF preprocess_kitti(const TensorF& frame) {
  return crop_top_left(frame, 0, 0, 1216, 320, "preprocess_kitti");
}

void validate_spec(const SyntheticSpec& spec) {
  if (spec.height <= 0 || spec.width <= 0) throw DataError("synthetic spec: dims must be > 0");
  if (spec.num_clips <= 0) throw DataError("synthetic spec: num_clips must be > 0");
  if (spec.frames_per_clip <= 0)
    throw DataError("synthetic spec: frames_per_clip must be > 0");
  if (spec.num_layers <= 0) throw DataError("synthetic spec: num_layers must be > 0");
  if (spec.texture_octaves <= 0)
    throw DataError("synthetic spec: texture_octaves must be > 0");
  if (!(spec.disparity >= 0) || spec.disparity >= spec.width / 4.0)
    throw DataError("synthetic spec: disparity must be in [0, width/4)");
  if (!(spec.motion >= 0) || spec.motion >= spec.width / 8.0)
    throw DataError("synthetic spec: motion must be in [0, width/8)");
}

SyntheticClip generate_synthetic_clip(const SyntheticSpec& spec, int clip_index) {
  validate_spec(spec);
  const int h = spec.height, w = spec.width, L = spec.num_layers;

  // Per-layer velocities, one named stream per clip so clips are independent.
  RngStream rng(spec.seed, "synth.clip" + std::to_string(clip_index) + ".vel");
  std::vector<double> vx(L), vy(L), disp(L);
  for (int k = 0; k < L; ++k) {
    vx[k] = rng.uniform(-spec.motion, spec.motion);
    vy[k] = rng.uniform(-spec.motion, spec.motion);
    disp[k] = spec.disparity * (k + 1) / L;  // back to front, front shifts most
  }

  SyntheticClip clip;
  for (int t = 0; t < spec.frames_per_clip; ++t) {
    StereoFrame frame{TensorF({3, h, w}), TensorF({3, h, w})};
    std::vector<float> gt(static_cast<std::size_t>(h) * w, 0.0f);
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double cl[3] = {0, 0, 0}, cr[3] = {0, 0, 0};
        double dl = 0;
        for (int k = 0; k < L; ++k) {
          // World coordinates: the layer translates by its velocity each
          // frame; the right view sees the same surface shifted left by the
          // layer disparity, so it samples at x + d.
          const double wy = y - vy[k] * t;
          const double wxl = x - vx[k] * t;
          const double wxr = x + disp[k] - vx[k] * t;
          const double al = (k == 0) ? 1.0 : layer_alpha(spec.seed, clip_index, k, wxl, wy);
          const double ar = (k == 0) ? 1.0 : layer_alpha(spec.seed, clip_index, k, wxr, wy);
          for (int c = 0; c < 3; ++c) {
            const double tl =
                octave_noise(spec.seed, clip_index, k, c, spec.texture_octaves, wxl, wy);
            const double tr =
                octave_noise(spec.seed, clip_index, k, c, spec.texture_octaves, wxr, wy);
            cl[c] += al * (tl - cl[c]);
            cr[c] += ar * (tr - cr[c]);
          }
          dl += al * (disp[k] - dl);
        }
        for (int c = 0; c < 3; ++c) {
          frame.left.v[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<float>(cl[c]);
          frame.right.v[(static_cast<std::size_t>(c) * h + y) * w + x] = static_cast<float>(cr[c]);
        }
        gt[static_cast<std::size_t>(y) * w + x] = static_cast<float>(dl);
      }
    }
    clip.seq.frames.push_back(std::move(frame));
    clip.disparity.push_back(std::move(gt));
  }
  return clip;
}

std::vector<std::string> generate_synthetic(const SyntheticSpec& spec, const std::string& root) {
  validate_spec(spec);
  fs::create_directories(root);
  std::vector<std::string> dirs;
  for (int i = 0; i < spec.num_clips; ++i) {
    char name[16];
    std::snprintf(name, sizeof name, "clip%04d", i);
    const std::string dir = root + "/" + name;
    const SyntheticClip clip = generate_synthetic_clip(spec, i);
    save_stereo_sequence(dir, clip.seq);
    fs::create_directories(dir + "/disparity");
    for (std::size_t t = 0; t < clip.disparity.size(); ++t) {
      std::vector<std::uint16_t> pix(clip.disparity[t].size());
      for (std::size_t j = 0; j < pix.size(); ++j)
        pix[j] = static_cast<std::uint16_t>(
            std::lround(std::min(255.9, std::max(0.0, static_cast<double>(clip.disparity[t][j]))) *
                        256.0));
      write_png_gray16(dir + "/disparity/" + frame_name(static_cast<int>(t)), pix, spec.height,
                       spec.width);
    }
    dirs.push_back(dir);
  }
  return dirs;
}

CropSample sample_crop(const std::vector<StereoSequence>& dataset, int crop, RngStream& rng) {
  if (dataset.empty()) throw DataError("sample_crop: empty dataset");
  const auto c = static_cast<std::size_t>(rng.index(dataset.size()));
  const StereoSequence& seq = dataset[c];
  if (seq.frames.size() < 2) throw DataError("sample_crop: clip has fewer than 2 frames");
  const int h = seq.height(), w = seq.width();
  if (crop <= 0 || crop > h || crop > w)
    throw DataError("sample_crop: crop size " + std::to_string(crop) + " exceeds frames " +
                    std::to_string(w) + "x" + std::to_string(h));
  const int t = 1 + static_cast<int>(rng.index(seq.frames.size() - 1));
  const int y0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(h - crop + 1)));
  const int x0 = static_cast<int>(rng.index(static_cast<std::uint64_t>(w - crop + 1)));
  const bool flip = rng.index(2) == 1;

  auto cut = [&](const TensorF& img) {
    TensorF out({3, crop, crop});
    for (int ch = 0; ch < 3; ++ch)
      for (int y = 0; y < crop; ++y)
        for (int x = 0; x < crop; ++x) {
          const int sx = flip ? (x0 + crop - 1 - x) : (x0 + x);
          out.v[(static_cast<std::size_t>(ch) * crop + y) * crop + x] =
              img.v[(static_cast<std::size_t>(ch) * h + y0 + y) * w + sx];
        }
    return out;
  };

  CropSample s;
  // A horizontal flip mirrors the epipolar geometry, so the views swap to
  // keep disparity pointing the same way.
  const StereoFrame& prev = seq.frames[t - 1];
  const StereoFrame& cur = seq.frames[t];
  s.prev.left = cut(flip ? prev.right : prev.left);
  s.prev.right = cut(flip ? prev.left : prev.right);
  s.cur.left = cut(flip ? cur.right : cur.left);
  s.cur.right = cut(flip ? cur.left : cur.right);
  return s;
}

}  // namespace llss
