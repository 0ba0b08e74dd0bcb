// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Offline analysis: cross-view latent redundancy (correlation and a Gaussian
// mutual-information reading), per-module complexity accounting, Bjontegaard
// rate deltas, and small CSV/PNG report writers. Plots are rasterized here
// directly; no external plotting stack is involved.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "llss/blocks.hpp"
#include "llss/data.hpp"
#include "llss/model.hpp"

namespace llss {

// --- Mutual information and correlation -------------------------------------

// MI (bits) of a bivariate Gaussian with correlation rho: -0.5*log2(1-rho^2).
// |rho| is clamped to 1 - 1e-9 so the value stays finite.
double mi_gaussian(double rho);

struct ChannelCorrelation {
  std::vector<double> per_channel;  // Pearson rho, pooled over samples and space
  std::vector<bool> valid;          // false where either side has zero variance
  double aggregate = 0;             // rho over all elements of all channels
  double aggregate_mi = 0;          // mi_gaussian(aggregate)
};

// left[i] and right[i] are same-shape latents ((C,H,W) or (N,C,H,W)) for one
// coded frame; statistics pool over every sample and spatial position.
ChannelCorrelation latent_cross_correlation(const std::vector<TensorF>& left,
                                            const std::vector<TensorF>& right);

// Channel indices sorted by mean squared activation, descending; ties break
// toward the lower index. Returns at most k indices.
std::vector<int> top_energy_channels(const std::vector<TensorF>& samples, int k);

// Runs the real encoder over the clips and collects coded-latent statistics.
struct ProbeReport {
  ChannelCorrelation motion;   // quantized motion latents, left vs right
  ChannelCorrelation context;  // quantized context latents, left vs right
  std::vector<int> motion_top;
  std::vector<int> context_top;
  int frames_probed = 0;       // predicted frames only (intra codes no motion)
};
ProbeReport probe_latents(LLSSModelF& model, const std::vector<StereoSequence>& clips,
                          int top_k = 8);

// --- Complexity accounting ---------------------------------------------------

struct ComplexityRow {
  std::string name;
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t flops = 0;  // 2 * macs
  bool subrow = false;     // indented detail row (coupling modules)
};

struct ComplexityReport {
  int height = 0, width = 0;
  std::vector<ComplexityRow> rows;
  std::int64_t total_params = 0;
  std::int64_t total_macs = 0;
};

// Static per-module table at an h x w input (multiples of 64). MAC counts
// follow the codec's invocation pattern for one coded stereo frame pair:
// the extractor runs four times (two current views, two reference re-
// extractions), the reconstructor and every motion/context module twice
// (once per view); the coupling modules process both views jointly and are
// counted once, as separate detail rows.
ComplexityReport profile_complexity(const LLSSModelF& model, int h, int w);

std::string format_complexity_table(const ComplexityReport& report);
void write_complexity_csv(const ComplexityReport& report, const std::string& path);

// --- Bjontegaard rate delta --------------------------------------------------

// Average rate change (percent) of the test curve against the anchor at equal
// quality: cubic fit of log10(rate) over quality, integrated across the
// overlapping quality interval. Requires >= 4 points per curve; throws Error
// when the quality ranges do not overlap.
double bd_rate(const std::vector<double>& anchor_rate, const std::vector<double>& anchor_quality,
               const std::vector<double>& test_rate, const std::vector<double>& test_quality);

// --- Report writers ----------------------------------------------------------

void write_csv(const std::string& path, const std::vector<std::string>& columns,
               const std::vector<std::vector<double>>& rows);

struct PlotSeries {
  std::string label;
  std::vector<double> x, y;
  std::uint32_t rgb = 0x1f77b4;  // 0xRRGGBB
};

// Rasterizes line plots (axes, ticks, grid, legend, 5x7 bitmap labels) into
// an RGB PNG.
void render_plot_png(const std::string& path, const std::string& title,
                     const std::string& xlabel, const std::string& ylabel,
                     const std::vector<PlotSeries>& series, int width = 800, int height = 600);

}  // namespace llss
