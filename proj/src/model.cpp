// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors

#include <cstdint>
#include <cstring>
#include <fstream>

#include "llss/checkpoint.hpp"
#include "llss/config.hpp"
#include "llss/model.hpp"

namespace llss {
namespace {

constexpr char kCkptMagic[8] = {'L', 'L', 'S', 'S', 'C', 'K', 'P', 'T'};
constexpr std::uint32_t kCkptVersion = 1;

void fnv_bytes(std::uint64_t& h, const void* data, std::size_t n) {
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < n; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
}

void w_u32(std::ofstream& f, std::uint32_t v) {
  std::uint8_t b[4];
  for (int i = 0; i < 4; ++i) b[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 4);
}

void w_u64(std::ofstream& f, std::uint64_t v) {
  std::uint8_t b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<std::uint8_t>((v >> (8 * i)) & 0xff);
  f.write(reinterpret_cast<const char*>(b), 8);
}

void w_tensor(std::ofstream& f, const TensorF& t) {
  w_u32(f, static_cast<std::uint32_t>(t.shape.size()));
  for (int d : t.shape) w_u32(f, static_cast<std::uint32_t>(d));
  f.write(reinterpret_cast<const char*>(t.v.data()),
          static_cast<std::streamsize>(t.v.size() * sizeof(float)));
}

struct CkptReader {
  std::ifstream f;
  std::string path;

  explicit CkptReader(const std::string& p) : f(p, std::ios::binary), path(p) {
    if (!f) throw DataError("cannot open checkpoint: " + p);
  }

  void bytes(void* out, std::size_t n) {
    f.read(static_cast<char*>(out), static_cast<std::streamsize>(n));
    if (f.gcount() != static_cast<std::streamsize>(n))
      throw DataError("checkpoint truncated: " + path);
  }

  std::uint32_t u32() {
    std::uint8_t b[4];
    bytes(b, 4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(b[i]) << (8 * i);
    return v;
  }

  std::uint64_t u64() {
    std::uint8_t b[8];
    bytes(b, 8);
    std::uint64_t v = 0;
    for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
    return v;
  }

  std::string str() {
    const std::uint32_t n = u32();
    if (n > (1u << 20)) throw DataError("checkpoint string too long: " + path);
    std::string s(n, '\0');
    if (n) bytes(s.data(), n);
    return s;
  }

  TensorF tensor() {
    const std::uint32_t rank = u32();
    if (rank == 0 || rank > 8) throw DataError("checkpoint tensor has bad rank: " + path);
    std::vector<int> shape(rank);
    for (std::uint32_t i = 0; i < rank; ++i) {
      shape[i] = static_cast<int>(u32());
      if (shape[i] <= 0) throw DataError("checkpoint tensor has bad dimension: " + path);
    }
    TensorF t(shape);
    bytes(t.v.data(), t.v.size() * sizeof(float));
    return t;
  }

  bool at_eof() {
    f.peek();
    return f.eof();
  }
};

}  // namespace

std::uint64_t model_digest(const LLSSModelF& model) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  const std::string cfg = serialize_config(model.cfg);
  fnv_bytes(h, cfg.data(), cfg.size());
  for (const std::string& name : model.store.order) {
    fnv_bytes(h, name.data(), name.size());
    const TensorF& t = model.store.get(name);
    fnv_bytes(h, t.v.data(), t.v.size() * sizeof(float));
  }
  return h;
}

void save_checkpoint(const std::string& path, const LLSSModelF& model,
                     const OptimizerStateIO* opt) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw DataError("cannot write checkpoint: " + path);
  f.write(kCkptMagic, 8);
  w_u32(f, kCkptVersion);
  const std::string cfg = serialize_config(model.cfg);
  w_u32(f, static_cast<std::uint32_t>(cfg.size()));
  f.write(cfg.data(), static_cast<std::streamsize>(cfg.size()));
  w_u64(f, model.store.seed);
  w_u32(f, static_cast<std::uint32_t>(model.store.order.size()));
  for (const std::string& name : model.store.order) {
    w_u32(f, static_cast<std::uint32_t>(name.size()));
    f.write(name.data(), static_cast<std::streamsize>(name.size()));
    w_tensor(f, model.store.get(name));
  }
  f.put(opt ? 1 : 0);
  if (opt) {
    w_u64(f, opt->step);
    f.put(static_cast<char>(opt->stage));
    for (const std::string& name : model.store.order) {
      const auto it = opt->moments.find(name);
      if (it == opt->moments.end())
        throw DataError("optimizer state is missing moments for parameter: " + name);
      w_tensor(f, it->second.first);
      w_tensor(f, it->second.second);
    }
  }
  if (!f) throw DataError("write failed for checkpoint: " + path);
}

LLSSModelF load_checkpoint(const std::string& path, OptimizerStateIO* opt) {
  CkptReader r(path);
  char magic[8];
  r.bytes(magic, 8);
  if (std::memcmp(magic, kCkptMagic, 8) != 0)
    throw DataError("not a checkpoint file: " + path);
  const std::uint32_t version = r.u32();
  if (version != kCkptVersion)
    throw DataError("unsupported checkpoint version " + std::to_string(version) + ": " + path);
  const std::string cfg_text = r.str();
  const CodecConfig cfg = parse_config(cfg_text);
  const std::uint64_t seed = r.u64();
  LLSSModelF model(cfg, seed);

  const std::uint32_t count = r.u32();
  if (count != model.store.order.size())
    throw DataError("checkpoint parameter count " + std::to_string(count) +
                    " does not match the model's " + std::to_string(model.store.order.size()));
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::string name = r.str();
    if (name != model.store.order[i])
      throw DataError("checkpoint parameter order mismatch at index " + std::to_string(i) +
                      ": file has '" + name + "', model expects '" + model.store.order[i] + "'");
    TensorF t = r.tensor();
    TensorF& dst = model.store.get(name);
    if (!t.same_shape(dst))
      throw DataError("checkpoint shape mismatch for parameter '" + name + "'");
    dst = std::move(t);
  }

  std::uint8_t has_opt = 0;
  r.bytes(&has_opt, 1);
  if (has_opt && opt) {
    opt->step = r.u64();
    std::uint8_t stage = 0;
    r.bytes(&stage, 1);
    opt->stage = stage;
    opt->moments.clear();
    for (const std::string& name : model.store.order) {
      TensorF m = r.tensor();
      TensorF v = r.tensor();
      const TensorF& p = model.store.get(name);
      if (!m.same_shape(p) || !v.same_shape(p))
        throw DataError("optimizer moment shape mismatch for parameter '" + name + "'");
      opt->moments.emplace(name, std::make_pair(std::move(m), std::move(v)));
    }
  } else if (opt) {
    opt->moments.clear();
    opt->step = 0;
    opt->stage = 1;
  }
  return model;
}

}  // namespace llss
