// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include "llss/entropy.hpp"

#include <algorithm>
#include <cmath>

#include "llss/math.hpp"

namespace llss {

double round_half_even(double x) {
  // nearbyint under the default FE_TONEAREST mode rounds halves to even.
  return std::nearbyint(x);
}

double round_to_grid(double v) { return round_half_even(v * 1e4) * 1e-4; }

TensorF quantize_train(const TensorF& y, RngStream& rng) {
  TensorF out(y.shape);
  for (std::size_t i = 0; i < y.v.size(); ++i)
    out.v[i] = y.v[i] + static_cast<float>(rng.uniform(-0.5, 0.5));
  return out;
}

QuantizedLatent quantize_eval(const TensorF& y, const TensorF& mu) {
  if (!y.same_shape(mu)) throw ShapeError("quantize_eval: y/mu shape mismatch");
  QuantizedLatent q;
  q.symbols = TensorF(y.shape);
  for (std::size_t i = 0; i < y.v.size(); ++i) {
    double s = round_half_even(static_cast<double>(y.v[i]) - static_cast<double>(mu.v[i]));
    s = std::min(static_cast<double>(kSymbolMax), std::max(static_cast<double>(kSymbolMin), s));
    q.symbols.v[i] = static_cast<float>(s);
  }
  return q;
}

TensorF dequantize(const QuantizedLatent& q, const TensorF& mu) {
  TensorF out(q.symbols.shape);
  for (std::size_t i = 0; i < out.v.size(); ++i) out.v[i] = q.symbols.v[i] + mu.v[i];
  return out;
}

TensorF likelihood(const TensorF& yhat, const TensorF& mu, const TensorF& log_sigma) {
  if (!yhat.same_shape(mu) || !yhat.same_shape(log_sigma))
    throw ShapeError("likelihood: shape mismatch");
  TensorF out(yhat.shape);
  for (std::size_t i = 0; i < out.v.size(); ++i) {
    const double s = std::max(std::exp(static_cast<double>(log_sigma.v[i])), kSigmaMin);
    const double d = static_cast<double>(yhat.v[i]) - static_cast<double>(mu.v[i]);
    const double p = norm_cdf_pinned((d + 0.5) / s) - norm_cdf_pinned((d - 0.5) / s);
    out.v[i] = static_cast<float>(std::max(p, kPFloor));
  }
  return out;
}

double estimate_rate(const TensorF& p) {
  static const double kLn2 = 6.93147180559945286227e-01;
  double bits = 0;
  for (float x : p.v) bits += -std::log(static_cast<double>(x)) / kLn2;
  return bits;
}

double IntegerCdfTable::ideal_bits(int index) const {
  static const double kLn2 = 6.93147180559945286227e-01;
  return -std::log(static_cast<double>(freq(index)) / 65536.0) / kLn2;
}

IntegerCdfTable build_cdf_table_pmf(const std::vector<double>& pmf) {
  if (pmf.size() != 256) throw Error("build_cdf_table_pmf: expected 256 probabilities");
  double total = 0;
  for (double p : pmf) {
    if (!(p >= 0) || !std::isfinite(p)) throw Error("build_cdf_table_pmf: degenerate pmf");
    total += p;
  }
  if (!(total > 0)) throw Error("build_cdf_table_pmf: degenerate pmf (zero mass)");

  // Every entry (256 symbols + escape) gets a base frequency of 1; the
  // remaining budget is shared proportionally with largest-remainder rounding.
  constexpr std::uint32_t kTotal = 1u << 16;
  constexpr int kEntries = 257;
  const double budget = static_cast<double>(kTotal - kEntries);
  std::vector<std::uint32_t> freq(kEntries, 1);
  std::vector<std::pair<double, int>> rema(256);
  std::uint32_t used = 0;
  for (int i = 0; i < 256; ++i) {
    const double t = pmf[static_cast<std::size_t>(i)] / total * budget;
    const double fl = std::floor(t);
    freq[static_cast<std::size_t>(i)] += static_cast<std::uint32_t>(fl);
    used += static_cast<std::uint32_t>(fl);
    rema[static_cast<std::size_t>(i)] = {t - fl, i};
  }
  std::uint32_t leftover = kTotal - kEntries - used;
  // Larger remainder first; ties broken by symbol index for determinism.
  std::sort(rema.begin(), rema.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  for (std::uint32_t i = 0; i < leftover; ++i) ++freq[static_cast<std::size_t>(rema[i].second)];

  IntegerCdfTable t;
  t.cum.resize(kEntries + 1);
  t.cum[0] = 0;
  for (int i = 0; i < kEntries; ++i) t.cum[static_cast<std::size_t>(i) + 1] =
      t.cum[static_cast<std::size_t>(i)] + freq[static_cast<std::size_t>(i)];
  return t;
}

IntegerCdfTable build_cdf_table_sigma(long sigma_grid) {
  if (sigma_grid <= 0) throw Error("build_cdf_table_sigma: degenerate prior");
  const double sigma = static_cast<double>(sigma_grid) * 1e-4;
  std::vector<double> pmf(256);
  for (int s = kSymbolMin; s <= kSymbolMax; ++s) {
    const double zu = (static_cast<double>(s) + 0.5) / sigma;
    const double zl = (static_cast<double>(s) - 0.5) / sigma;
    static const double kInvSqrt2 = 7.07106781186547524401e-01;
    pmf[static_cast<std::size_t>(s - kSymbolMin)] =
        0.5 * (erf_pinned(zu * kInvSqrt2) - erf_pinned(zl * kInvSqrt2));
  }
  return build_cdf_table_pmf(pmf);
}

const IntegerCdfTable* CdfTablePool::for_sigma(double sigma) {
  const double clamped = std::max(sigma, kSigmaMin);
  const long grid = static_cast<long>(std::llround(round_to_grid(clamped) * 1e4));
  auto it = tables_.find(grid);
  if (it == tables_.end())
    it = tables_.emplace(grid, std::make_unique<IntegerCdfTable>(build_cdf_table_sigma(grid)))
             .first;
  return it->second.get();
}

// ---------------------------------------------------------------------------
// Carry-less range coder (Subbotin style), 64-bit state, byte renormalization.
// Total frequency is always 2^16, so the range division is an exact shift.
// ---------------------------------------------------------------------------
namespace {

constexpr std::uint64_t kTop = 1ull << 56;
constexpr std::uint64_t kBot = 1ull << 32;

struct RangeEncoder {
  std::uint64_t low = 0;
  std::uint64_t range = ~0ull;
  std::vector<std::uint8_t>& out;
  explicit RangeEncoder(std::vector<std::uint8_t>& o) : out(o) {}

  void encode(std::uint32_t cum, std::uint32_t freq) {
    range >>= 16;
    low += cum * range;
    range *= freq;
    normalize();
  }

  void normalize() {
    while (true) {
      if ((low ^ (low + range)) < kTop) {
        // top byte settled
      } else if (range < kBot) {
        range = (0 - low) & (kBot - 1);  // clamp range to force agreement
      } else {
        break;
      }
      out.push_back(static_cast<std::uint8_t>(low >> 56));
      low <<= 8;
      range <<= 8;
    }
  }

  void flush() {
    for (int i = 0; i < 8; ++i) {
      out.push_back(static_cast<std::uint8_t>(low >> 56));
      low <<= 8;
    }
  }
};

struct RangeDecoder {
  std::uint64_t low = 0;
  std::uint64_t range = ~0ull;
  std::uint64_t code = 0;
  const std::uint8_t* data;
  std::size_t size;
  std::size_t pos = 0;
  int frame, segment;

  RangeDecoder(const std::uint8_t* d, std::size_t n, int f, int s)
      : data(d), size(n), frame(f), segment(s) {
    for (int i = 0; i < 8; ++i) code = (code << 8) | next_byte();
  }

  std::uint8_t next_byte() {
    if (pos >= size)
      throw DecodeError(DecodeError::Kind::Corrupt,
                        "range decoder ran past the segment payload at byte " +
                            std::to_string(pos),
                        frame, segment, static_cast<long>(pos));
    return data[pos++];
  }

  std::uint32_t decode_cum() {
    range >>= 16;
    return static_cast<std::uint32_t>((code - low) / range);
  }

  void consume(std::uint32_t cum, std::uint32_t freq) {
    low += cum * range;  // range already shifted by decode_cum
    range *= freq;
    while (true) {
      if ((low ^ (low + range)) < kTop) {
      } else if (range < kBot) {
        range = (0 - low) & (kBot - 1);
      } else {
        break;
      }
      code = (code << 8) | next_byte();
      low <<= 8;
      range <<= 8;
    }
  }
};

// Uniform byte table used to escape-code out-of-range values.
const IntegerCdfTable& uniform_table() {
  static const IntegerCdfTable t = [] {
    IntegerCdfTable u;
    u.cum.resize(258);
    for (int i = 0; i <= 257; ++i)
      u.cum[static_cast<std::size_t>(i)] = static_cast<std::uint32_t>(
          (static_cast<std::uint64_t>(i) << 16) / 257);
    return u;
  }();
  return t;
}

void encode_with(RangeEncoder& enc, const IntegerCdfTable& t, int index) {
  enc.encode(t.cum[static_cast<std::size_t>(index)], t.freq(index));
}

int decode_with(RangeDecoder& dec, const IntegerCdfTable& t) {
  const std::uint32_t cum = dec.decode_cum();
  if (cum >= (1u << 16))
    throw DecodeError(DecodeError::Kind::Corrupt,
                      "corrupt segment: code value outside the coding interval at byte " +
                          std::to_string(dec.pos),
                      dec.frame, dec.segment, static_cast<long>(dec.pos));
  // Binary search for the symbol whose interval holds cum.
  int lo = 0, hi = 257;
  while (hi - lo > 1) {
    const int mid = (lo + hi) / 2;
    if (t.cum[static_cast<std::size_t>(mid)] <= cum) lo = mid;
    else hi = mid;
  }
  dec.consume(t.cum[static_cast<std::size_t>(lo)], t.freq(lo));
  return lo;
}

}  // namespace

CodedSegment range_encode(const std::vector<int>& symbols,
                          const std::vector<const IntegerCdfTable*>& tables) {
  if (symbols.size() != tables.size())
    throw Error("range_encode: one table per symbol required");
  CodedSegment seg;
  seg.symbol_count = static_cast<std::uint32_t>(symbols.size());
  if (symbols.empty()) return seg;
  RangeEncoder enc(seg.payload);
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const int s = symbols[i];
    if (s >= kSymbolMin && s <= kSymbolMax) {
      encode_with(enc, *tables[i], s - kSymbolMin);
    } else {
      // Escape, then the raw 16-bit two's-complement value as two bytes.
      encode_with(enc, *tables[i], kEscapeIndex);
      const std::uint16_t raw = static_cast<std::uint16_t>(static_cast<std::int16_t>(s));
      encode_with(enc, uniform_table(), (raw >> 8) & 0xff);
      encode_with(enc, uniform_table(), raw & 0xff);
    }
  }
  enc.flush();
  return seg;
}

std::vector<int> range_decode(const CodedSegment& segment,
                              const std::vector<const IntegerCdfTable*>& tables) {
  if (segment.symbol_count != tables.size())
    throw Error("range_decode: one table per symbol required");
  std::vector<int> out(segment.symbol_count);
  if (segment.symbol_count == 0) return out;
  RangeDecoder dec(segment.payload.data(), segment.payload.size(), -1, -1);
  for (std::size_t i = 0; i < out.size(); ++i) {
    const int idx = decode_with(dec, *tables[i]);
    if (idx == kEscapeIndex) {
      const int hi = decode_with(dec, uniform_table());
      const int lo = decode_with(dec, uniform_table());
      out[i] = static_cast<std::int16_t>((hi << 8) | lo);
    } else {
      out[i] = idx + kSymbolMin;
    }
  }
  return out;
}

double table_ideal_bits(const std::vector<int>& symbols,
                        const std::vector<const IntegerCdfTable*>& tables) {
  double bits = 0;
  for (std::size_t i = 0; i < symbols.size(); ++i) {
    const int s = symbols[i];
    if (s >= kSymbolMin && s <= kSymbolMax) {
      bits += tables[i]->ideal_bits(s - kSymbolMin);
    } else {
      bits += tables[i]->ideal_bits(kEscapeIndex) + 16.0;
    }
  }
  return bits;
}

void append_segment(std::vector<std::uint8_t>& out, const CodedSegment& seg) {
  auto put_u32 = [&](std::uint32_t v) {
    out.push_back(static_cast<std::uint8_t>(v & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 8) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 16) & 0xff));
    out.push_back(static_cast<std::uint8_t>((v >> 24) & 0xff));
  };
  put_u32(static_cast<std::uint32_t>(seg.payload.size()));
  put_u32(seg.symbol_count);
  out.insert(out.end(), seg.payload.begin(), seg.payload.end());
}

CodedSegment read_segment(const std::vector<std::uint8_t>& data, std::size_t& offset, int frame,
                          int segment) {
  auto need = [&](std::size_t n) {
    if (offset + n > data.size())
      throw DecodeError(DecodeError::Kind::Truncated,
                        "bitstream truncated inside frame " + std::to_string(frame) +
                            " segment " + std::to_string(segment) + " at byte " +
                            std::to_string(offset),
                        frame, segment, static_cast<long>(offset));
  };
  auto get_u32 = [&]() {
    need(4);
    const std::uint32_t v = static_cast<std::uint32_t>(data[offset]) |
                            (static_cast<std::uint32_t>(data[offset + 1]) << 8) |
                            (static_cast<std::uint32_t>(data[offset + 2]) << 16) |
                            (static_cast<std::uint32_t>(data[offset + 3]) << 24);
    offset += 4;
    return v;
  };
  CodedSegment seg;
  const std::uint32_t len = get_u32();
  seg.symbol_count = get_u32();
  need(len);
  seg.payload.assign(data.begin() + static_cast<std::ptrdiff_t>(offset),
                     data.begin() + static_cast<std::ptrdiff_t>(offset + len));
  offset += len;
  return seg;
}

}  // namespace llss
