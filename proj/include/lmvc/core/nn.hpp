// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "lmvc/core/convops.hpp"
#include "lmvc/core/rng.hpp"

namespace lmvc {
namespace nn {

template <typename S>
struct NamedParam {
  std::string name;
  Var<S> var;
};

template <typename S>
using ParamList = std::vector<NamedParam<S>>;

// Layers register their parameters under a hierarchical dotted name; the
// optimizer and the checkpoint container both key off that name.
template <typename S>
class Module {
 public:
  virtual ~Module() = default;
  virtual void collect(const std::string& prefix, ParamList<S>& out) const = 0;

  ParamList<S> named_params(const std::string& prefix = "") const {
    ParamList<S> out;
    collect(prefix, out);
    return out;
  }
  void set_requires_grad(bool on) {
    for (auto& p : named_params()) p.var->requires_grad = on;
  }
  size_t param_count() const {
    size_t n = 0;
    for (auto& p : named_params()) n += p.var->val.size();
    return n;
  }
};

template <typename S>
class Conv2d : public Module<S> {
 public:
  Conv2d() = default;
  Conv2d(int in_ch, int out_ch, int k, int stride, Rng& rng, double gain = 1.0)
      : stride_(stride) {
    Tensor<S> w({out_ch, in_ch, k, k});
    double std = gain * std::sqrt(2.0 / (double(in_ch) * k * k));
    for (size_t i = 0; i < w.size(); ++i) w[i] = S(rng.normal(0.0, std));
    weight = make_var(std::move(w), true);
    bias = make_var(Tensor<S>::zeros({out_ch}), true);
  }

  Var<S> operator()(const Var<S>& x) const { return conv2d(x, weight, bias, stride_); }

  void zero_init() {
    weight->val.fill(S(0));
    bias->val.fill(S(0));
  }

  void collect(const std::string& prefix, ParamList<S>& out) const override {
    out.push_back({prefix + ".w", weight});
    out.push_back({prefix + ".b", bias});
  }

  Var<S> weight, bias;
  int stride_ = 1;
};

template <typename S>
class DepthwiseConv3 : public Module<S> {
 public:
  DepthwiseConv3() = default;
  DepthwiseConv3(int ch, Rng& rng) {
    Tensor<S> w({ch, 1, 3, 3});
    double std = std::sqrt(2.0 / 9.0);
    for (size_t i = 0; i < w.size(); ++i) w[i] = S(rng.normal(0.0, std));
    weight = make_var(std::move(w), true);
    bias = make_var(Tensor<S>::zeros({ch}), true);
  }
  Var<S> operator()(const Var<S>& x) const { return depthwise3(x, weight, bias); }
  void collect(const std::string& prefix, ParamList<S>& out) const override {
    out.push_back({prefix + ".w", weight});
    out.push_back({prefix + ".b", bias});
  }
  Var<S> weight, bias;
};

// Depth-separable residual block: 1x1 -> lrelu -> dw3x3 -> lrelu -> 1x1, with
// identity skip. The workhorse of the fusion adaptors and refiners.
template <typename S>
class DepthBlock : public Module<S> {
 public:
  DepthBlock() = default;
  DepthBlock(int ch, Rng& rng)
      : pw_a(ch, ch, 1, 1, rng), dw(ch, rng), pw_b(ch, ch, 1, 1, rng, 0.5) {}

  Var<S> operator()(const Var<S>& x) const {
    auto h = leaky_relu(pw_a(x));
    h = leaky_relu(dw(h));
    return add(x, pw_b(h));
  }
  void collect(const std::string& prefix, ParamList<S>& out) const override {
    pw_a.collect(prefix + ".pa", out);
    dw.collect(prefix + ".dw", out);
    pw_b.collect(prefix + ".pb", out);
  }

  Conv2d<S> pw_a;
  DepthwiseConv3<S> dw;
  Conv2d<S> pw_b;
};

// Lightweight non-residual refiner used at full resolution: dw3x3 + 1x1.
template <typename S>
class SepConv : public Module<S> {
 public:
  SepConv() = default;
  SepConv(int in_ch, int out_ch, Rng& rng) : dw(in_ch, rng), pw(in_ch, out_ch, 1, 1, rng) {}
  Var<S> operator()(const Var<S>& x) const { return pw(leaky_relu(dw(x))); }
  void collect(const std::string& prefix, ParamList<S>& out) const override {
    dw.collect(prefix + ".dw", out);
    pw.collect(prefix + ".pw", out);
  }
  DepthwiseConv3<S> dw;
  Conv2d<S> pw;
};

// nearest x2 upsample followed by a 3x3 conv.
template <typename S>
class UpConv : public Module<S> {
 public:
  UpConv() = default;
  UpConv(int in_ch, int out_ch, Rng& rng) : conv(in_ch, out_ch, 3, 1, rng) {}
  Var<S> operator()(const Var<S>& x) const { return conv(upsample_nearest2(x)); }
  void collect(const std::string& prefix, ParamList<S>& out) const override {
    conv.collect(prefix + ".c", out);
  }
  Conv2d<S> conv;
};

// nearest x2 upsample followed by a depth-separable conv; the cheap
// upsampling stage for high-resolution decoder layers.
template <typename S>
class UpSep : public Module<S> {
 public:
  UpSep() = default;
  UpSep(int in_ch, int out_ch, Rng& rng) : sep(in_ch, out_ch, rng) {}
  Var<S> operator()(const Var<S>& x) const { return sep(upsample_nearest2(x)); }
  void collect(const std::string& prefix, ParamList<S>& out) const override {
    sep.collect(prefix + ".s", out);
  }
  SepConv<S> sep;
};

// Strided conv chain used by the prior extractors (conv s2 + leaky relu each
// stage), mapping a full-resolution signal down to latent resolution.
template <typename S>
class StridedExtractor : public Module<S> {
 public:
  StridedExtractor() = default;
  StridedExtractor(int in_ch, int mid_ch, int out_ch, int stages, Rng& rng) {
    for (int i = 0; i < stages; ++i) {
      int ic = i == 0 ? in_ch : mid_ch;
      int oc = i == stages - 1 ? out_ch : mid_ch;
      convs.emplace_back(ic, oc, 3, 2, rng);
    }
  }
  Var<S> operator()(Var<S> x) const {
    for (size_t i = 0; i < convs.size(); ++i) {
      x = convs[i](x);
      if (i + 1 < convs.size()) x = leaky_relu(x);
    }
    return x;
  }
  void collect(const std::string& prefix, ParamList<S>& out) const override {
    for (size_t i = 0; i < convs.size(); ++i)
      convs[i].collect(prefix + ".s" + std::to_string(i), out);
  }
  std::vector<Conv2d<S>> convs;
};

template <typename S>
inline Var<S> zeros_like_shape(int c, int h, int w) {
  return constant(Tensor<S>::zeros({c, h, w}));
}

}  // namespace nn
}  // namespace lmvc
