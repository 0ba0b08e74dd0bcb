// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace llss {

ShiftParams derive_shift_params(int scale, const CodecConfig& config) {
  if (scale < 1) throw ConfigError("derive_shift_params: scale must be >= 1, got " +
                                   std::to_string(scale));
  const int div = 1 << (scale - 1);
  const int raw_d = config.base_max_disparity / div;
  if (raw_d < 1)
    throw ConfigError("derive_shift_params: max disparity falls below 1 pixel at scale " +
                      std::to_string(scale));
  ShiftParams p;
  p.stride = std::max(1, config.base_shift_stride / div);
  p.max_disparity = (raw_d / p.stride) * p.stride;  // round down to a multiple of S
  p.num_levels = p.max_disparity / p.stride;
  return p;
}

std::vector<Violation> validate_config(const CodecConfig& c) {
  std::vector<Violation> v;
  auto positive = [&](int value, const char* field) {
    if (value <= 0) v.push_back({field, "must be > 0"});
  };
  positive(c.feature_channels, "feature_channels");
  positive(c.motion_ae_channels, "motion_ae_channels");
  positive(c.context_ae_channels, "context_ae_channels");
  positive(c.hyper_channels, "hyper_channels");
  positive(c.bishift_channels, "bishift_channels");
  positive(c.bishift_group_channels, "bishift_group_channels");
  positive(c.bishift_cat_channels, "bishift_cat_channels");
  positive(c.bishift_groups, "bishift_groups");
  positive(c.deform_groups, "deform_groups");
  positive(c.base_max_disparity, "base_max_disparity");
  positive(c.base_shift_stride, "base_shift_stride");
  positive(c.intra_period, "intra_period");
  // The bitstream header stores the intra period in a single byte.
  if (c.intra_period > 255) v.push_back({"intra_period", "must be <= 255"});
  if (c.bishift_groups > 0 && c.bishift_group_channels > 0 &&
      c.bishift_group_channels % c.bishift_groups != 0)
    v.push_back({"bishift_group_channels", "must be divisible by bishift_groups"});
  if (c.base_shift_stride > 0 && c.base_max_disparity > 0 &&
      c.base_max_disparity % c.base_shift_stride != 0)
    v.push_back({"base_max_disparity", "must be divisible by base_shift_stride"});
  if (!(c.beta > 0)) v.push_back({"beta", "must be > 0"});
  return v;
}

const char* to_string(DistortionMetric m) {
  return m == DistortionMetric::MSE ? "MSE" : "MS_SSIM";
}

namespace {

int parse_int(const std::string& key, const std::string& value) {
  int out = 0;
  const auto res = std::from_chars(value.data(), value.data() + value.size(), out);
  if (res.ec != std::errc() || res.ptr != value.data() + value.size())
    throw ConfigError("config key '" + key + "': invalid integer '" + value + "'");
  return out;
}

double parse_real(const std::string& key, const std::string& value) {
  try {
    std::size_t pos = 0;
    const double out = std::stod(value, &pos);
    if (pos != value.size()) throw std::invalid_argument(value);
    return out;
  } catch (const std::exception&) {
    throw ConfigError("config key '" + key + "': invalid real '" + value + "'");
  }
}

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r\n");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r\n");
  return s.substr(a, b - a + 1);
}

}  // namespace

void set_config_field(CodecConfig& c, const std::string& key, const std::string& value) {
  if (key == "feature_channels") c.feature_channels = parse_int(key, value);
  else if (key == "motion_ae_channels") c.motion_ae_channels = parse_int(key, value);
  else if (key == "context_ae_channels") c.context_ae_channels = parse_int(key, value);
  else if (key == "hyper_channels") c.hyper_channels = parse_int(key, value);
  else if (key == "bishift_channels") c.bishift_channels = parse_int(key, value);
  else if (key == "bishift_group_channels") c.bishift_group_channels = parse_int(key, value);
  else if (key == "bishift_cat_channels") c.bishift_cat_channels = parse_int(key, value);
  else if (key == "bishift_groups") c.bishift_groups = parse_int(key, value);
  else if (key == "deform_groups") c.deform_groups = parse_int(key, value);
  else if (key == "base_max_disparity") c.base_max_disparity = parse_int(key, value);
  else if (key == "base_shift_stride") c.base_shift_stride = parse_int(key, value);
  else if (key == "intra_period") c.intra_period = parse_int(key, value);
  else if (key == "beta") c.beta = parse_real(key, value);
  else if (key == "distortion_metric") {
    if (value == "MSE") c.distortion_metric = DistortionMetric::MSE;
    else if (value == "MS_SSIM") c.distortion_metric = DistortionMetric::MS_SSIM;
    else throw ConfigError("config key 'distortion_metric': expected MSE or MS_SSIM, got '" +
                           value + "'");
  } else {
    throw ConfigError("unknown config key '" + key + "'");
  }
}

CodecConfig parse_config(const std::string& text) {
  CodecConfig c;
  std::istringstream in(text);
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(lineno) + ": expected 'key = value'");
    set_config_field(c, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  return c;
}

CodecConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file: " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str());
}

std::string serialize_config(const CodecConfig& c) {
  std::ostringstream out;
  out << "feature_channels = " << c.feature_channels << "\n"
      << "motion_ae_channels = " << c.motion_ae_channels << "\n"
      << "context_ae_channels = " << c.context_ae_channels << "\n"
      << "hyper_channels = " << c.hyper_channels << "\n"
      << "bishift_channels = " << c.bishift_channels << "\n"
      << "bishift_group_channels = " << c.bishift_group_channels << "\n"
      << "bishift_cat_channels = " << c.bishift_cat_channels << "\n"
      << "bishift_groups = " << c.bishift_groups << "\n"
      << "deform_groups = " << c.deform_groups << "\n"
      << "base_max_disparity = " << c.base_max_disparity << "\n"
      << "base_shift_stride = " << c.base_shift_stride << "\n"
      << "intra_period = " << c.intra_period << "\n";
  char betabuf[64];
  std::snprintf(betabuf, sizeof betabuf, "beta = %.17g\n", c.beta);
  out << betabuf << "distortion_metric = " << to_string(c.distortion_metric) << "\n";
  return out.str();
}

void save_config(const CodecConfig& c, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot write config file: " + path);
  out << serialize_config(c);
}

}  // namespace llss
