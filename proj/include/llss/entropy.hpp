// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Quantization, discretized-Gaussian likelihoods, integerized CDF tables, and
// a byte-exact range coder.
//
// Determinism contract: prior parameters are rounded to a 1e-4 grid before any
// table is built, and table construction uses the pinned erf/exp from
// math.hpp plus integer largest-remainder rounding, so encoder and decoder
// (and any two machines) produce bit-identical tables from equal priors.
#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <vector>

#include "llss/errors.hpp"
#include "llss/rng.hpp"
#include "llss/tensor.hpp"

namespace llss {

constexpr double kSigmaMin = 0.11;
constexpr double kPFloor = 1.0 / 65536.0;  // 2^-16
constexpr int kSymbolMin = -128;
constexpr int kSymbolMax = 127;
constexpr int kEscapeIndex = 256;  // table index past the 256 in-range symbols

double round_half_even(double x);
double round_to_grid(double v);  // nearest multiple of 1e-4

// Train-mode quantization surrogate: y + U(-0.5, 0.5) elementwise.
TensorF quantize_train(const TensorF& y, RngStream& rng);

// Integer-valued symbol tensor, entries clamped to [-128, 127].
struct QuantizedLatent {
  TensorF symbols;
};

// Eval-mode mean-centered rounding: symbols = clamp(round(y - mu)).
QuantizedLatent quantize_eval(const TensorF& y, const TensorF& mu);

// yhat = symbols + mu.
TensorF dequantize(const QuantizedLatent& q, const TensorF& mu);

// p = Phi(yhat - mu + 0.5; sigma) - Phi(yhat - mu - 0.5; sigma), with
// sigma = max(exp(log_sigma), kSigmaMin), floored at kPFloor.
TensorF likelihood(const TensorF& yhat, const TensorF& mu, const TensorF& log_sigma);

// Sum of -log2(p) over all elements; p must be in (0, 1].
double estimate_rate(const TensorF& p);

// Cumulative frequencies over the 256 in-range symbols plus one escape symbol.
// cum has 258 entries, cum[0] = 0, cum[257] = 65536, strictly increasing
// (every symbol's frequency is >= 1). Symbol s lives at index s + 128.
struct IntegerCdfTable {
  std::vector<std::uint32_t> cum;
  std::uint32_t freq(int index) const { return cum[index + 1] - cum[index]; }
  double ideal_bits(int index) const;
};

// Table for a zero-mean discretized Gaussian; sigma_grid = sigma * 1e4 as an
// integer (symbols are mean-centered before coding, so mu never enters).
IntegerCdfTable build_cdf_table_sigma(long sigma_grid);

// Generic construction from a pmf over the 256 in-range symbols.
IntegerCdfTable build_cdf_table_pmf(const std::vector<double>& pmf);

// Memoizing pool keyed by the sigma grid value; pointers stay valid for the
// pool's lifetime.
struct CdfTablePool {
  const IntegerCdfTable* for_sigma(double sigma);

 private:
  std::map<long, std::unique_ptr<IntegerCdfTable>> tables_;
};

// Byte string plus declared symbol count. Wire layout (little endian):
// u32 payload length, u32 symbol count, payload bytes.
struct CodedSegment {
  std::vector<std::uint8_t> payload;
  std::uint32_t symbol_count = 0;
};

// tables[i] codes symbols[i]; symbols outside [-128, 127] are escape-coded.
CodedSegment range_encode(const std::vector<int>& symbols,
                          const std::vector<const IntegerCdfTable*>& tables);
std::vector<int> range_decode(const CodedSegment& segment,
                              const std::vector<const IntegerCdfTable*>& tables);

// Ideal information content of the symbols under the integerized tables.
double table_ideal_bits(const std::vector<int>& symbols,
                        const std::vector<const IntegerCdfTable*>& tables);

void append_segment(std::vector<std::uint8_t>& out, const CodedSegment& seg);
// Reads a segment at `offset`, advancing it. frame/segment indices label errors.
CodedSegment read_segment(const std::vector<std::uint8_t>& data, std::size_t& offset, int frame,
                          int segment);

}  // namespace llss
