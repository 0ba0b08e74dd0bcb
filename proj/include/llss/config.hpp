// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
#pragma once

#include <string>
#include <vector>

#include "llss/errors.hpp"

namespace llss {

enum class DistortionMetric { MSE, MS_SSIM };

// Canonical codec configuration. Field names are the config-file keys.
// Defaults are the reference operating point of the full-size model.
struct CodecConfig {
  int feature_channels = 64;
  int motion_ae_channels = 64;
  int context_ae_channels = 128;
  int hyper_channels = 128;
  int bishift_channels = 32;        // C: working width inside a BiShiftMod
  int bishift_group_channels = 32;  // C_g: channels entering group correlation
  int bishift_cat_channels = 12;    // C_c: channels entering concat correlation
  int bishift_groups = 4;           // G
  int deform_groups = 8;
  int base_max_disparity = 192;  // D at scale 1 (full resolution), pixels
  int base_shift_stride = 8;     // S at scale 1, pixels
  int intra_period = 12;
  double beta = 0.0067;
  DistortionMetric distortion_metric = DistortionMetric::MSE;
};

// D and S at a given scale; spatial size at scale s is input/2^(s-1).
struct ShiftParams {
  int max_disparity = 0;  // D
  int stride = 0;         // S
  int num_levels = 0;     // D / S; shift levels are {0, S, ..., D - S}
};

// D = base/2^(scale-1) rounded down to a multiple of S; S = max(1, base_S/2^(scale-1)).
// Throws ConfigError naming the scale when D would fall below 1.
ShiftParams derive_shift_params(int scale, const CodecConfig& config);

struct Violation {
  std::string field;
  std::string constraint;
};

// Empty iff every CodecConfig invariant holds. Violations are data, not errors.
std::vector<Violation> validate_config(const CodecConfig& config);

// Flat `key = value` text format, '#' comments, UTF-8. Keys match the struct
// field names exactly; unknown keys are errors.
CodecConfig parse_config(const std::string& text);
CodecConfig load_config(const std::string& path);
std::string serialize_config(const CodecConfig& config);
void save_config(const CodecConfig& config, const std::string& path);

// Override a single field by key name (CLI flags reuse the file grammar).
void set_config_field(CodecConfig& config, const std::string& key, const std::string& value);

const char* to_string(DistortionMetric m);

}  // namespace llss
