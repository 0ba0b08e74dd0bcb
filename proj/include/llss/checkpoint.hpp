// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Checkpoint container and model digest.
//
// File layout (little endian): magic "LLSSCKPT", u32 version (1), u32 config
// string length + bytes, u64 init seed, u32 parameter count, then per
// parameter (in creation order): u32 name length + bytes, u32 rank, i32 dims,
// f32 data. An optional trailing optimizer block (u8 flag, u64 step, u8
// stage, per-parameter first/second moment tensors) lets training resume.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>

#include "llss/model.hpp"

namespace llss {

struct OptimizerStateIO {
  std::uint64_t step = 0;
  int stage = 1;
  // parameter name -> (first moment, second moment)
  std::map<std::string, std::pair<TensorF, TensorF>> moments;
};

// FNV-1a 64 over the serialized config plus every parameter (name bytes, then
// raw f32 payload) in creation order. Stored in bitstream headers so a decode
// with the wrong weights fails loudly instead of drifting.
std::uint64_t model_digest(const LLSSModelF& model);

void save_checkpoint(const std::string& path, const LLSSModelF& model,
                     const OptimizerStateIO* opt = nullptr);

// Rebuilds the model from the stored config (and seed); loads weights over
// the freshly constructed parameter set. Shapes must match exactly. `opt`
// receives the optimizer block when present and requested.
LLSSModelF load_checkpoint(const std::string& path, OptimizerStateIO* opt = nullptr);

}  // namespace llss
