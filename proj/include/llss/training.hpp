// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Rate-distortion training: Adam, the two-frame train-mode loss, and the
// staged training loop.
//
// Loss convention per coded frame: distortion (MSE * 255^2, summed over the
// two views; optionally 1 - MS-SSIM) plus beta times the estimated rate in
// bits per pixel (total bits over both views divided by 2*H*W). A training
// step codes the earlier frame of a crop pair as an intra frame and the later
// one as a predicted frame whose reference features come from the detached
// intra reconstruction. Rates use additive-noise quantization; they are
// estimates and are never reported as coded sizes.
//
// Stages: stage 1 trains with the coupling modules bypassed; stage 2 enables
// them (when the run wants them at all) and keeps training every weight;
// stage 3 optionally switches the distortion to 1 - MS-SSIM.
#pragma once

#include <cstdint>
#include <string>

#include "llss/checkpoint.hpp"
#include "llss/data.hpp"
#include "llss/model.hpp"

namespace llss {

struct TrainOptions {
  int stage1_steps = 1000;
  int stage2_steps = 1500;
  int stage3_steps = 0;  // optional MS-SSIM fine-tune
  int crop = 64;
  double lr = 1e-4;
  std::uint64_t seed = 7;
  int log_every = 100;        // evaluation/logging cadence in steps
  bool enable_bishift = true;  // stage >= 2 switches the coupling modules on
  std::string log_path;        // JSON-lines eval log; empty = no log
  std::string checkpoint_dir;  // stage-boundary checkpoints; empty = none
};

struct LossParts {
  double total = 0;
  double distortion = 0;  // summed over coded frames and views
  double rate_bpp = 0;    // summed per-frame bits-per-pixel estimates
};

// Adam over the parameters that appear in a step's graph. Parameters absent
// from the graph are left untouched (their moments stay zero), so a module
// that is bypassed for a stage is bit-identical afterwards.
class Adam {
 public:
  Adam(ParamStore<float>& store, double lr) : store_(&store), lr_(lr) {}

  // Applies one update from the gradients accumulated in ctx's graph.
  void step(ParamCtx<float>& ctx);

  // Inserts zero moments for parameters never seen by step(), so the
  // optimizer state covers the whole store before checkpointing.
  void materialize();

  OptimizerStateIO state;  // step count, stage, and per-parameter moments

 private:
  ParamStore<float>* store_;
  double lr_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
};

// Builds the two-frame train-mode forward on ctx's graph and returns the
// scalar loss node. `metric` picks the distortion term. Templated on the
// scalar type so gradient checks can run the exact production loss in double
// precision; instantiated for float and double.
template <typename T>
int build_rd_loss(ParamCtx<T>& ctx, LLSSModel<T>& model, const CropSample& batch,
                  const BiShiftToggles& toggles, RngStream& noise, DistortionMetric metric,
                  LossParts* parts = nullptr);

// Differentiable MS-SSIM between two (N,3,H,W) nodes, same construction as
// the eval metric except that channels average within each scale.
template <typename T>
int graph_ms_ssim(Graph<T>& g, int x, int y);

extern template int build_rd_loss<float>(ParamCtx<float>&, LLSSModel<float>&, const CropSample&,
                                         const BiShiftToggles&, RngStream&, DistortionMetric,
                                         LossParts*);
extern template int build_rd_loss<double>(ParamCtx<double>&, LLSSModel<double>&,
                                          const CropSample&, const BiShiftToggles&, RngStream&,
                                          DistortionMetric, LossParts*);
extern template int graph_ms_ssim<float>(Graph<float>&, int, int);
extern template int graph_ms_ssim<double>(Graph<double>&, int, int);

struct TrainResult {
  int steps_run = 0;
  double final_loss = 0;
};

// Staged training loop over a loaded dataset. Throws Error naming the step if
// the loss stops being finite. Logs JSON lines with real coded numbers (an
// encode of a short eval clip), never the noisy train-mode estimates.
TrainResult train(LLSSModelF& model, const std::vector<StereoSequence>& dataset,
                  const TrainOptions& opt, Adam* resume = nullptr);

}  // namespace llss
