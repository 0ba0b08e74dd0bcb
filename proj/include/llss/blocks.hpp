// SPDX-License-Identifier: BSD-3-Clause
// Copyright (c) 2026 the llss-codec authors
//
// Learnable-layer vocabulary: parameter store with deterministic per-name
// initialization, thin layer wrappers that build onto a Graph, and the
// analytic parameter/MAC/FLOP counting used by the complexity profiler.
//
// Counting conventions (frozen; the profiler and its tests depend on them):
//   conv       params = Cin*Cout*k^2 + Cout, MACs = Cin*Cout*k^2*Hout*Wout
//              (bias contributes parameters but no MACs)
//   deconv     params as conv; MACs = Cin*Cout*k^2*Hin*Win with Hin = Hout/stride
//              (every input position fires its full kernel)
//   resgroup   two k3 s1 convs, x + conv2(ReLU(conv1(x)))
//   deformable conv MACs plus 4 multiply-adds per sampled tap, taps counted
//              per offset group: 4 * groups * k^2 * Hout * Wout
//   activation 0 params, 0 MACs
//   FLOPs = 2 * MACs exactly.
#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "llss/autodiff.hpp"
#include "llss/rng.hpp"

namespace llss {

// ---------------------------------------------------------------------------
// LayerSpec / LayerGraph / count_layer
// ---------------------------------------------------------------------------

enum class LayerKind { Conv, Deconv, ResGroup, DeformableConv, Activation };
enum class Act { None, ReLU, Mish };

struct LayerSpec {
  LayerKind kind = LayerKind::Conv;
  int in_channels = 0;
  int out_channels = 0;
  int kernel = 3;
  int stride = 1;
  int groups = 1;  // deformable offset groups only
  Act activation = Act::None;
};

struct Counts {
  std::int64_t params = 0;
  std::int64_t macs = 0;
  std::int64_t flops = 0;
  Counts& operator+=(const Counts& o) {
    params += o.params;
    macs += o.macs;
    flops += o.flops;
    return *this;
  }
};

inline Counts count_layer(const LayerSpec& s, int out_h, int out_w) {
  Counts c;
  const std::int64_t hw = static_cast<std::int64_t>(out_h) * out_w;
  const std::int64_t k2 = static_cast<std::int64_t>(s.kernel) * s.kernel;
  switch (s.kind) {
    case LayerKind::Conv:
      c.params = static_cast<std::int64_t>(s.in_channels) * s.out_channels * k2 + s.out_channels;
      c.macs = static_cast<std::int64_t>(s.in_channels) * s.out_channels * k2 * hw;
      break;
    case LayerKind::Deconv: {
      const std::int64_t in_hw = hw / (static_cast<std::int64_t>(s.stride) * s.stride);
      c.params = static_cast<std::int64_t>(s.in_channels) * s.out_channels * k2 + s.out_channels;
      c.macs = static_cast<std::int64_t>(s.in_channels) * s.out_channels * k2 * in_hw;
      break;
    }
    case LayerKind::ResGroup:
      c.params =
          2 * (static_cast<std::int64_t>(s.in_channels) * s.out_channels * 9 + s.out_channels);
      c.macs = 2 * static_cast<std::int64_t>(s.in_channels) * s.out_channels * 9 * hw;
      break;
    case LayerKind::DeformableConv:
      c.params = static_cast<std::int64_t>(s.in_channels) * s.out_channels * k2 + s.out_channels;
      c.macs = static_cast<std::int64_t>(s.in_channels) * s.out_channels * k2 * hw +
               4 * static_cast<std::int64_t>(s.groups) * k2 * hw;
      break;
    case LayerKind::Activation:
      break;
  }
  c.flops = 2 * c.macs;
  return c;
}

// Ordered layer list with named tensor edges. Used by the profiler; validate()
// checks that every consumed edge exists with the right channel count.
struct LayerGraph {
  struct Entry {
    LayerSpec spec;
    std::string input;
    std::string output;
    int out_h = 0;
    int out_w = 0;
  };
  std::vector<Entry> entries;
  // Costs with no layer vocabulary (e.g. correlation volumes): name -> counts.
  std::vector<std::pair<std::string, Counts>> extras;

  void add(const LayerSpec& s, const std::string& in, const std::string& out, int oh, int ow) {
    entries.push_back({s, in, out, oh, ow});
  }

  void add_extra(const std::string& name, const Counts& c) { extras.emplace_back(name, c); }

  Counts total() const {
    Counts c;
    for (const Entry& e : entries) c += count_layer(e.spec, e.out_h, e.out_w);
    for (const auto& kv : extras) c += kv.second;
    return c;
  }

  // sources: externally supplied edges, name -> channels.
  void validate(const std::map<std::string, int>& sources) const {
    std::map<std::string, int> ch = sources;
    for (const Entry& e : entries) {
      auto it = ch.find(e.input);
      if (it == ch.end()) throw ShapeError("LayerGraph: unknown edge '" + e.input + "'");
      if (e.spec.kind != LayerKind::Activation && it->second != e.spec.in_channels)
        throw ShapeError("LayerGraph: edge '" + e.input + "' has " + std::to_string(it->second) +
                         " channels, layer expects " + std::to_string(e.spec.in_channels));
      ch[e.output] =
          e.spec.kind == LayerKind::Activation ? it->second : e.spec.out_channels;
    }
  }
};

// ---------------------------------------------------------------------------
// Parameter store
// ---------------------------------------------------------------------------

enum class Init { FanInUniform, Zero };

// Name-addressed parameter tensors. Initialization is drawn from an RNG stream
// seeded by the parameter's own name, so the set of other parameters in the
// model never influences a given tensor's initial values (stage-1 training of
// a build with BiShiftMods must be bit-identical to a build without them).
// Biases start at zero.
template <typename T>
struct ParamStore {
  std::uint64_t seed = 0x5353'4c4cULL;  // default; overridden by trainer/config
  std::vector<std::string> order;
  std::map<std::string, Tensor<T>> tensors;

  bool has(const std::string& name) const { return tensors.count(name) != 0; }

  Tensor<T>& create(const std::string& name, std::vector<int> shape, Init init) {
    if (has(name)) throw Error("duplicate parameter name: " + name);
    Tensor<T> t(std::move(shape));
    if (init == Init::FanInUniform) {
      // fan-in = elements feeding one output unit = numel / dim0.
      const double fan = static_cast<double>(t.numel()) / t.dim(0);
      const double bound = 1.0 / std::sqrt(fan);
      RngStream rng(seed, name);
      for (auto& x : t.v) x = static_cast<T>(rng.uniform(-bound, bound));
    }
    order.push_back(name);
    return tensors.emplace(name, std::move(t)).first->second;
  }

  Tensor<T>& get(const std::string& name) {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }
  const Tensor<T>& get(const std::string& name) const {
    auto it = tensors.find(name);
    if (it == tensors.end()) throw Error("unknown parameter: " + name);
    return it->second;
  }

  std::int64_t total_params() const {
    std::int64_t n = 0;
    for (const auto& kv : tensors) n += kv.second.numel();
    return n;
  }

  template <typename U>
  ParamStore<U> cast() const {
    ParamStore<U> out;
    out.seed = seed;
    out.order = order;
    for (const auto& name : order) out.tensors.emplace(name, get(name).template cast<U>());
    return out;
  }
};

// Per-graph leaf cache: each parameter becomes one leaf node per Graph build.
template <typename T>
struct ParamCtx {
  Graph<T>* g = nullptr;
  ParamStore<T>* store = nullptr;
  bool trainable = false;
  std::map<std::string, int> ids;

  ParamCtx(Graph<T>& graph, ParamStore<T>& s, bool train)
      : g(&graph), store(&s), trainable(train) {}

  int var(const std::string& name) {
    auto it = ids.find(name);
    if (it != ids.end()) return it->second;
    const int id = g->leaf(store->get(name), trainable);
    ids.emplace(name, id);
    return id;
  }
};

// ---------------------------------------------------------------------------
// Layer wrappers
// ---------------------------------------------------------------------------

template <typename T>
struct Conv2d {
  std::string w, b;
  int cin = 0, cout = 0;
  int kernel = 3, stride = 1, groups = 1;

  static Conv2d make(ParamStore<T>& s, const std::string& name, int cin, int cout, int k,
                     int stride, Init init = Init::FanInUniform, int groups = 1) {
    Conv2d c;
    c.w = name + ".w";
    c.b = name + ".b";
    c.cin = cin;
    c.cout = cout;
    c.kernel = k;
    c.stride = stride;
    c.groups = groups;
    s.create(c.w, {cout, cin / groups, k, k}, init);
    s.create(c.b, {cout}, Init::Zero);
    return c;
  }

  int fwd(ParamCtx<T>& ctx, int x) const {
    return ctx.g->conv2d(x, ctx.var(w), ctx.var(b), stride, kernel / 2, groups);
  }

  LayerSpec spec(Act act = Act::None) const {
    return {LayerKind::Conv, cin, cout, kernel, stride, 1, act};
  }
};

template <typename T>
struct Deconv2d {
  std::string w, b;
  int cin = 0, cout = 0;
  int kernel = 5, stride = 2;

  static Deconv2d make(ParamStore<T>& s, const std::string& name, int cin, int cout, int k,
                       int stride) {
    Deconv2d c;
    c.w = name + ".w";
    c.b = name + ".b";
    c.cin = cin;
    c.cout = cout;
    c.kernel = k;
    c.stride = stride;
    s.create(c.w, {cin, cout, k, k}, Init::FanInUniform);
    s.create(c.b, {cout}, Init::Zero);
    return c;
  }

  // k5 s2 pad2 outpad1 doubles the spatial size exactly.
  int fwd(ParamCtx<T>& ctx, int x) const {
    return ctx.g->deconv2d(x, ctx.var(w), ctx.var(b), stride, kernel / 2, stride - 1);
  }

  LayerSpec spec(Act act = Act::None) const {
    return {LayerKind::Deconv, cin, cout, kernel, stride, 1, act};
  }
};

// y = x + conv2(ReLU(conv1(x))); conv2 zero-initialized so the block starts as
// the identity.
template <typename T>
struct ResGroup {
  Conv2d<T> c1, c2;

  static ResGroup make(ParamStore<T>& s, const std::string& name, int channels) {
    ResGroup r;
    r.c1 = Conv2d<T>::make(s, name + ".c1", channels, channels, 3, 1);
    r.c2 = Conv2d<T>::make(s, name + ".c2", channels, channels, 3, 1, Init::Zero);
    return r;
  }

  int fwd(ParamCtx<T>& ctx, int x) const {
    return ctx.g->add(x, c2.fwd(ctx, ctx.g->relu(c1.fwd(ctx, x))));
  }

  LayerSpec spec() const { return {LayerKind::ResGroup, c1.cin, c1.cout, 3, 1, 1, Act::ReLU}; }
};

template <typename T>
struct DeformConv {
  std::string w, b;
  int cin = 0, cout = 0;
  int kernel = 3, groups = 1;

  static DeformConv make(ParamStore<T>& s, const std::string& name, int cin, int cout, int k,
                         int groups) {
    DeformConv c;
    c.w = name + ".w";
    c.b = name + ".b";
    c.cin = cin;
    c.cout = cout;
    c.kernel = k;
    c.groups = groups;
    s.create(c.w, {cout, cin, k, k}, Init::FanInUniform);
    s.create(c.b, {cout}, Init::Zero);
    return c;
  }

  int fwd(ParamCtx<T>& ctx, int x, int offsets) const {
    return ctx.g->deform_conv2d(x, offsets, ctx.var(w), ctx.var(b), groups);
  }

  LayerSpec spec() const {
    return {LayerKind::DeformableConv, cin, cout, kernel, 1, groups, Act::None};
  }
};

}  // namespace llss
