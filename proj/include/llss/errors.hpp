// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
#pragma once

#include <stdexcept>
#include <string>

namespace llss {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid or inconsistent CodecConfig (bad derived shift params, bad file keys).
struct ConfigError : Error {
  using Error::Error;
};

// Tensor shape or channel-count mismatch; message names the offending layer.
struct ShapeError : Error {
  using Error::Error;
};

// Dataset loading problems (missing frames, dimension mismatch, unreadable file).
struct DataError : Error {
  using Error::Error;
};

// Bitstream problems. `kind` distinguishes the three decode failure classes the
// decoder must tell apart; frame/segment/byte locate the failure.
struct DecodeError : Error {
  enum class Kind { Corrupt, ConfigMismatch, Truncated };
  Kind kind;
  int frame = -1;
  int segment = -1;
  long byte_offset = -1;
  DecodeError(Kind k, const std::string& msg, int frame_idx = -1, int segment_idx = -1,
              long byte = -1)
      : Error(msg), kind(k), frame(frame_idx), segment(segment_idx), byte_offset(byte) {}
};

}  // namespace llss
