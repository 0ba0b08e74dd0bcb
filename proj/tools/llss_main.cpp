// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Command-line front end. Exit codes: 0 success, 1 usage or bad configuration,
// 2 data problem (datasets, images, corrupt or truncated streams), 3 bitstream
// coded with a different model, 4 internal invariant violation.

#include <CLI11.hpp>

#include <algorithm>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <string>
#include <vector>

#include "llss/analysis.hpp"
#include "llss/checkpoint.hpp"
#include "llss/codec.hpp"
#include "llss/config.hpp"
#include "llss/data.hpp"
#include "llss/errors.hpp"
#include "llss/training.hpp"

namespace fs = std::filesystem;
using namespace llss;

namespace {

struct ConfigFlags {
  std::string path;
  std::vector<std::pair<std::string, std::string>> overrides;
};

void add_config_flags(CLI::App* cmd, ConfigFlags& cf) {
  cmd->add_option("--config", cf.path, "Config file (key = value lines)");
  static const char* kKeys[] = {
      "feature_channels", "motion_ae_channels", "context_ae_channels", "hyper_channels",
      "bishift_channels", "bishift_group_channels", "bishift_cat_channels", "bishift_groups",
      "deform_groups", "base_max_disparity", "base_shift_stride", "intra_period", "beta",
      "distortion_metric"};
  for (const char* key : kKeys) {
    std::string flag = "--" + std::string(key);
    std::replace(flag.begin(), flag.end(), '_', '-');
    cmd->add_option_function<std::string>(
        flag, [&cf, key](const std::string& v) { cf.overrides.emplace_back(key, v); },
        "Override config key " + std::string(key));
  }
}

CodecConfig resolve_config(const ConfigFlags& cf) {
  CodecConfig c = cf.path.empty() ? CodecConfig{} : load_config(cf.path);
  for (const auto& [k, v] : cf.overrides) set_config_field(c, k, v);
  const auto violations = validate_config(c);
  if (!violations.empty())
    throw ConfigError("invalid config: " + violations.front().field + " " +
                      violations.front().constraint);
  return c;
}

std::vector<std::uint8_t> read_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot open: " + path);
  return std::vector<std::uint8_t>((std::istreambuf_iterator<char>(f)),
                                   std::istreambuf_iterator<char>());
}

void write_file(const std::string& path, const std::vector<std::uint8_t>& data) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot create: " + path);
  f.write(reinterpret_cast<const char*>(data.data()), static_cast<std::streamsize>(data.size()));
  if (!f) throw DataError("write failed: " + path);
}

void print_sequence_stats(const SequenceStats& stats) {
  std::printf("frames=%zu bpp=%.6f psnr=%.3f msssim=%.5f\n", stats.frames.size(), stats.bpp,
              stats.mean_psnr, stats.mean_msssim);
  for (const FrameStats& fs : stats.frames)
    std::printf("  frame %3d [%c] bits=%lld psnr=(%.3f, %.3f) msssim=(%.5f, %.5f)\n", fs.index,
                fs.type, static_cast<long long>(fs.total_bits()), fs.psnr_l, fs.psnr_r,
                fs.msssim_l, fs.msssim_r);
}

// Means over clips of one model's coded stats: one rate-quality point.
struct RdPoint {
  double bpp = 0, psnr = 0, msssim = 0;
};

RdPoint eval_model_point(const std::string& ckpt, const std::vector<StereoSequence>& clips,
                         bool verify_loop) {
  LLSSModelF model = load_checkpoint(ckpt);
  Codec codec(model);
  RdPoint p;
  for (const StereoSequence& clip : clips) {
    SequenceStats stats;
    StereoSequence recons;
    const auto bytes = codec.encode_sequence(clip, &stats, &recons);
    if (verify_loop) {
      const StereoSequence decoded = codec.decode_sequence(bytes);
      if (decoded.frames.size() != recons.frames.size())
        throw Error("closed loop broken: frame count changed in decode");
      for (std::size_t t = 0; t < decoded.frames.size(); ++t)
        if (decoded.frames[t].left.v != recons.frames[t].left.v ||
            decoded.frames[t].right.v != recons.frames[t].right.v)
          throw Error("closed loop broken: decoder output differs from encoder reconstruction "
                      "at frame " +
                      std::to_string(t));
    }
    p.bpp += stats.bpp;
    p.psnr += stats.mean_psnr;
    p.msssim += stats.mean_msssim;
  }
  p.bpp /= clips.size();
  p.psnr /= clips.size();
  p.msssim /= clips.size();
  return p;
}

// Selected subcommand body; assigned by the matching callback during parse.
std::function<void()> action;

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"low-latency stereo video codec"};
  app.require_subcommand(1);

  // --- synth-data ------------------------------------------------------------
  auto* synth = app.add_subcommand("synth-data", "Generate a synthetic stereo dataset");
  {
    static std::string out;
    static SyntheticSpec spec;
    synth->add_option("--out", out, "Dataset root directory")->required();
    synth->add_option("--seed", spec.seed, "Generator seed");
    synth->add_option("--clips", spec.num_clips, "Number of clips");
    synth->add_option("--frames", spec.frames_per_clip, "Frames per clip");
    synth->add_option("--height", spec.height, "Frame height");
    synth->add_option("--width", spec.width, "Frame width");
    synth->add_option("--disparity", spec.disparity, "Max layer disparity (px)");
    synth->add_option("--motion", spec.motion, "Max per-layer motion (px/frame)");
    synth->add_option("--octaves", spec.texture_octaves, "Texture noise octaves");
    synth->add_option("--layers", spec.num_layers, "Depth layers");
    synth->callback([] {
      action = [] {
        const auto dirs = generate_synthetic(spec, out);
        for (const auto& d : dirs) std::printf("%s\n", d.c_str());
        std::printf("wrote %zu clips (%dx%d, %d frames each)\n", dirs.size(), spec.width,
                    spec.height, spec.frames_per_clip);
      };
    });
  }

  // --- prep-data -------------------------------------------------------------
  auto* prep = app.add_subcommand("prep-data", "Crop a PNG tree into codec-friendly dimensions");
  {
    static std::string in, out, mode;
    prep->add_option("--in", in, "Input directory (searched recursively)")->required();
    prep->add_option("--out", out, "Output directory (tree mirrored)")->required();
    prep->add_option("--mode", mode, "cityscapes (2048x1024 -> 1920x704) or kitti (-> 1216x320)")
        ->required()
        ->check(CLI::IsMember({"cityscapes", "kitti"}));
    prep->callback([] {
      action = [] {
        if (!fs::is_directory(in)) throw DataError("not a directory: " + in);
        int count = 0;
        for (const auto& e : fs::recursive_directory_iterator(in)) {
          if (!e.is_regular_file() || e.path().extension() != ".png") continue;
          const TensorF img = read_png_rgb8(e.path().string());
          const TensorF cropped =
              mode == "cityscapes" ? preprocess_cityscapes(img) : preprocess_kitti(img);
          const fs::path rel = fs::relative(e.path(), in);
          const fs::path dst = fs::path(out) / rel;
          fs::create_directories(dst.parent_path());
          write_png_rgb8(dst.string(), cropped);
          ++count;
        }
        if (count == 0) throw DataError("no .png files under: " + in);
        std::printf("cropped %d frames into %s\n", count, out.c_str());
      };
    });
  }

  // --- train -------------------------------------------------------------------
  auto* train_cmd = app.add_subcommand("train", "Train a model on a dataset");
  {
    static std::string data, out, resume;
    static ConfigFlags cf;
    static TrainOptions topt;
    static std::uint64_t init_seed = 0x5353'4c4cULL;
    train_cmd->add_option("--data", data, "Dataset root (clip dirs with left/ right/)")
        ->required();
    train_cmd->add_option("--out", out, "Final checkpoint path")->required();
    add_config_flags(train_cmd, cf);
    train_cmd->add_option("--stage1-steps", topt.stage1_steps, "Steps with coupling bypassed");
    train_cmd->add_option("--stage2-steps", topt.stage2_steps, "Steps with coupling active");
    train_cmd->add_option("--stage3-steps", topt.stage3_steps, "MS-SSIM fine-tune steps");
    train_cmd->add_option("--crop", topt.crop, "Training crop (multiple of 64)");
    train_cmd->add_option("--lr", topt.lr, "Adam learning rate");
    train_cmd->add_option("--seed", topt.seed, "Sampling/noise seed");
    train_cmd->add_option("--init-seed", init_seed, "Weight initialization seed");
    train_cmd->add_option("--log-every", topt.log_every, "Eval/log cadence (steps)");
    train_cmd->add_option("--log", topt.log_path, "JSON-lines eval log path");
    train_cmd->add_option("--ckpt-dir", topt.checkpoint_dir, "Stage-boundary checkpoint dir");
    train_cmd->add_flag("--no-bishift", [](std::int64_t) { topt.enable_bishift = false; },
                        "Keep the coupling modules bypassed in every stage");
    train_cmd->add_option("--resume", resume, "Checkpoint to resume from");
    train_cmd->callback([] {
      action = [] {
        const auto dataset = load_dataset(data);
        OptimizerStateIO opt_state;
        LLSSModelF model = resume.empty() ? LLSSModelF(resolve_config(cf), init_seed)
                                          : load_checkpoint(resume, &opt_state);
        Adam adam(model.store, topt.lr);
        if (!resume.empty()) adam.state = std::move(opt_state);
        if (!topt.checkpoint_dir.empty()) fs::create_directories(topt.checkpoint_dir);
        const TrainResult r = train(model, dataset, topt, &adam);
        adam.materialize();
        save_checkpoint(out, model, &adam.state);
        std::printf("trained %d steps, final loss %.6f, checkpoint: %s\n", r.steps_run,
                    r.final_loss, out.c_str());
      };
    });
  }

  // --- encode ------------------------------------------------------------------
  auto* enc = app.add_subcommand("encode", "Encode a clip directory to a bitstream");
  {
    static std::string ckpt, in, out;
    static int frames = 0;
    enc->add_option("--model", ckpt, "Checkpoint path")->required();
    enc->add_option("--in", in, "Clip directory (left/ and right/ PNGs)")->required();
    enc->add_option("--out", out, "Bitstream output path")->required();
    enc->add_option("--frames", frames, "Limit to the first N frames (0 = all)");
    enc->callback([] {
      action = [] {
        LLSSModelF model = load_checkpoint(ckpt);
        StereoSequence seq = load_stereo_sequence(in + "/left", in + "/right");
        if (frames > 0 && static_cast<std::size_t>(frames) < seq.frames.size())
          seq.frames.resize(frames);
        Codec codec(model);
        SequenceStats stats;
        const auto bytes = codec.encode_sequence(seq, &stats);
        write_file(out, bytes);
        std::printf("%s: %zu bytes\n", out.c_str(), bytes.size());
        print_sequence_stats(stats);
      };
    });
  }

  // --- decode ------------------------------------------------------------------
  auto* dec = app.add_subcommand("decode", "Decode a bitstream to PNG frames");
  {
    static std::string ckpt, in, out, orig;
    dec->add_option("--model", ckpt, "Checkpoint path")->required();
    dec->add_option("--in", in, "Bitstream path")->required();
    dec->add_option("--out", out, "Output clip directory")->required();
    dec->add_option("--orig", orig, "Original clip directory for quality metrics");
    dec->callback([] {
      action = [] {
        LLSSModelF model = load_checkpoint(ckpt);
        Codec codec(model);
        SequenceStats stats;
        StereoSequence original;
        if (!orig.empty()) original = load_stereo_sequence(orig + "/left", orig + "/right");
        const StereoSequence decoded =
            codec.decode_sequence(read_file(in), &stats, orig.empty() ? nullptr : &original);
        save_stereo_sequence(out, decoded);
        std::printf("decoded %zu frames into %s (bpp=%.6f)\n", decoded.frames.size(),
                    out.c_str(), stats.bpp);
        if (!orig.empty())
          std::printf("psnr=%.3f msssim=%.5f\n", stats.mean_psnr, stats.mean_msssim);
      };
    });
  }

  // --- eval --------------------------------------------------------------------
  auto* ev = app.add_subcommand("eval", "Coded rate/quality of one or more models on a dataset");
  {
    static std::vector<std::string> models, anchors;
    static std::string data, csv, plot;
    static bool no_verify = false;
    ev->add_option("--model", models, "Checkpoint(s) to evaluate")->required();
    ev->add_option("--anchor", anchors,
                   "Anchor checkpoints; with >= 4 of each, prints the rate delta of "
                   "--model vs --anchor");
    ev->add_option("--data", data, "Dataset root")->required();
    ev->add_option("--csv", csv, "Write per-model results as CSV");
    ev->add_option("--plot", plot, "Render a rate/quality PNG");
    ev->add_flag("--no-verify", no_verify, "Skip the encode/decode closed-loop check");
    ev->callback([] {
      action = [] {
        const auto clips = load_dataset(data);
        std::vector<RdPoint> pts, apts;
        for (const auto& m : models) {
          pts.push_back(eval_model_point(m, clips, !no_verify));
          std::printf("%s: bpp=%.6f psnr=%.3f msssim=%.5f\n", m.c_str(), pts.back().bpp,
                      pts.back().psnr, pts.back().msssim);
        }
        for (const auto& m : anchors) {
          apts.push_back(eval_model_point(m, clips, !no_verify));
          std::printf("anchor %s: bpp=%.6f psnr=%.3f msssim=%.5f\n", m.c_str(), apts.back().bpp,
                      apts.back().psnr, apts.back().msssim);
        }
        if (!csv.empty()) {
          std::vector<std::vector<double>> rows;
          for (std::size_t i = 0; i < pts.size(); ++i)
            rows.push_back({static_cast<double>(i), pts[i].bpp, pts[i].psnr, pts[i].msssim});
          write_csv(csv, {"model_index", "bpp", "psnr", "msssim"}, rows);
        }
        if (!plot.empty()) {
          PlotSeries s;
          s.label = "MODELS";
          s.rgb = 0x1f77b4;
          for (const auto& p : pts) {
            s.x.push_back(p.bpp);
            s.y.push_back(p.psnr);
          }
          std::vector<PlotSeries> series{s};
          if (!apts.empty()) {
            PlotSeries a;
            a.label = "ANCHORS";
            a.rgb = 0xd62728;
            for (const auto& p : apts) {
              a.x.push_back(p.bpp);
              a.y.push_back(p.psnr);
            }
            series.push_back(a);
          }
          render_plot_png(plot, "RATE / QUALITY", "BPP", "PSNR (DB)", series);
        }
        if (!anchors.empty()) {
          if (anchors.size() < 4 || models.size() < 4)
            throw ConfigError("rate delta needs at least 4 --anchor and 4 --model checkpoints");
          std::vector<double> ar, aq, tr, tq;
          for (const auto& p : apts) {
            ar.push_back(p.bpp);
            aq.push_back(p.psnr);
          }
          for (const auto& p : pts) {
            tr.push_back(p.bpp);
            tq.push_back(p.psnr);
          }
          std::printf("rate delta vs anchors: %.3f%%\n", bd_rate(ar, aq, tr, tq));
        }
      };
    });
  }

  // --- probe -------------------------------------------------------------------
  auto* pr = app.add_subcommand("probe", "Cross-view latent redundancy on coded clips");
  {
    static std::string ckpt, data, csv;
    static int topk = 8;
    pr->add_option("--model", ckpt, "Checkpoint path")->required();
    pr->add_option("--data", data, "Dataset root")->required();
    pr->add_option("--top", topk, "How many high-energy channels to list");
    pr->add_option("--csv", csv, "Write per-channel correlations as CSV");
    pr->callback([] {
      action = [] {
        LLSSModelF model = load_checkpoint(ckpt);
        const auto clips = load_dataset(data);
        const ProbeReport rep = probe_latents(model, clips, topk);
        std::printf("probed %d predicted frames\n", rep.frames_probed);
        std::printf("motion latents:  aggregate rho=%.5f  mi=%.5f bits\n", rep.motion.aggregate,
                    rep.motion.aggregate_mi);
        std::printf("context latents: aggregate rho=%.5f  mi=%.5f bits\n",
                    rep.context.aggregate, rep.context.aggregate_mi);
        auto print_top = [](const char* name, const std::vector<int>& idx) {
          std::printf("%s top-energy channels:", name);
          for (int i : idx) std::printf(" %d", i);
          std::printf("\n");
        };
        print_top("motion", rep.motion_top);
        print_top("context", rep.context_top);
        if (!csv.empty()) {
          std::ofstream f(csv, std::ios::trunc);
          if (!f) throw DataError("cannot write: " + csv);
          f << "latent,channel,rho,mi_bits,valid\n";
          auto dump = [&](const char* name, const ChannelCorrelation& c) {
            for (std::size_t i = 0; i < c.per_channel.size(); ++i)
              f << name << "," << i << "," << c.per_channel[i] << ","
                << (c.valid[i] ? mi_gaussian(c.per_channel[i]) : 0.0) << ","
                << (c.valid[i] ? 1 : 0) << "\n";
          };
          dump("motion", rep.motion);
          dump("context", rep.context);
        }
      };
    });
  }

  // --- bench -------------------------------------------------------------------
  auto* be = app.add_subcommand("bench", "Static per-module complexity table");
  {
    static std::string ckpt, csv;
    static ConfigFlags cf;
    static int height = 512, width = 512;
    be->add_option("--model", ckpt, "Checkpoint (otherwise built from config flags)");
    add_config_flags(be, cf);
    be->add_option("--height", height, "Input height (multiple of 64)");
    be->add_option("--width", width, "Input width (multiple of 64)");
    be->add_option("--csv", csv, "Write the table as CSV");
    be->callback([] {
      action = [] {
        LLSSModelF model = ckpt.empty() ? LLSSModelF(resolve_config(cf)) : load_checkpoint(ckpt);
        const ComplexityReport rep = profile_complexity(model, height, width);
        std::fputs(format_complexity_table(rep).c_str(), stdout);
        if (!csv.empty()) write_complexity_csv(rep, csv);
      };
    });
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return e.get_name() == "CallForHelp" || e.get_name() == "CallForAllHelp" ? 0 : 1;
  }

  try {
    action();
    return 0;
  } catch (const DecodeError& e) {
    std::fprintf(stderr, "decode error: %s", e.what());
    if (e.frame >= 0) std::fprintf(stderr, " (frame %d", e.frame);
    if (e.segment >= 0) std::fprintf(stderr, ", segment %d", e.segment);
    if (e.frame >= 0) std::fprintf(stderr, ")");
    std::fprintf(stderr, "\n");
    return e.kind == DecodeError::Kind::ConfigMismatch ? 3 : 2;
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 1;
  } catch (const DataError& e) {
    std::fprintf(stderr, "data error: %s\n", e.what());
    return 2;
  } catch (const Error& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 4;
  }
}
