// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cmath>
#include <map>
#include <string>

#include "lmvc/core/nn.hpp"

namespace lmvc {
namespace nn {

// AdamW over an explicit parameter list. Freezing a module is structural:
// its parameters are simply never handed to the optimizer.
template <typename S>
class AdamW {
 public:
  struct Config {
    double lr = 1e-4;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double weight_decay = 0.0;
  };

  AdamW() = default;
  AdamW(ParamList<S> params, Config cfg = {}) : params_(std::move(params)), cfg_(cfg) {
    for (auto& p : params_) {
      m_[p.name] = Tensor<S>::zeros(p.var->val.dims());
      v_[p.name] = Tensor<S>::zeros(p.var->val.dims());
    }
  }

  const ParamList<S>& params() const { return params_; }
  Config& config() { return cfg_; }
  int64_t step_count() const { return step_; }

  // Global gradient-norm clipping; returns the pre-clip norm.
  double clip_grad_norm(double max_norm) {
    double sq = 0.0;
    for (auto& p : params_) {
      if (p.var->grad.size() != p.var->val.size()) continue;
      for (size_t i = 0; i < p.var->grad.size(); ++i) {
        double g = double(p.var->grad[i]);
        sq += g * g;
      }
    }
    double norm = std::sqrt(sq);
    if (norm > max_norm && norm > 0.0) {
      S k = S(max_norm / norm);
      for (auto& p : params_) {
        if (p.var->grad.size() != p.var->val.size()) continue;
        for (size_t i = 0; i < p.var->grad.size(); ++i) p.var->grad[i] *= k;
      }
    }
    return norm;
  }

  void step() {
    ++step_;
    double bc1 = 1.0 - std::pow(cfg_.beta1, double(step_));
    double bc2 = 1.0 - std::pow(cfg_.beta2, double(step_));
    for (auto& p : params_) {
      if (p.var->grad.size() != p.var->val.size()) continue;  // no grad this step
      Tensor<S>& m = m_[p.name];
      Tensor<S>& v = v_[p.name];
      for (size_t i = 0; i < p.var->val.size(); ++i) {
        double g = double(p.var->grad[i]);
        double mi = cfg_.beta1 * double(m[i]) + (1.0 - cfg_.beta1) * g;
        double vi = cfg_.beta2 * double(v[i]) + (1.0 - cfg_.beta2) * g * g;
        m[i] = S(mi);
        v[i] = S(vi);
        double update = (mi / bc1) / (std::sqrt(vi / bc2) + cfg_.eps);
        double x = double(p.var->val[i]);
        x -= cfg_.lr * (update + cfg_.weight_decay * x);
        p.var->val[i] = S(x);
      }
    }
  }

  void zero_grad() {
    for (auto& p : params_) p.var->zero_grad();
  }

  // Checkpoint access to the moment estimates.
  std::map<std::string, Tensor<S>>& moment1() { return m_; }
  std::map<std::string, Tensor<S>>& moment2() { return v_; }
  void set_step_count(int64_t s) { step_ = s; }

 private:
  ParamList<S> params_;
  Config cfg_;
  std::map<std::string, Tensor<S>> m_, v_;
  int64_t step_ = 0;
};

}  // namespace nn
}  // namespace lmvc
