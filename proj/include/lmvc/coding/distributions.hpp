// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cmath>
#include <vector>

#include "lmvc/coding/range_coder.hpp"
#include "lmvc/core/autograd.hpp"

namespace lmvc {

// Discretized distributions over the integer symbol range [-L, L]. Bin r
// covers (r-1/2, r+1/2]; the два edge bins absorb the tails so the pmf sums
// to one by construction.

inline double std_normal_cdf(double x) {
  return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

inline double std_normal_pdf(double x) {
  return 0.3989422804014326779 * std::exp(-0.5 * x * x);
}

struct DiscretizedGaussian {
  static double bin_prob(int r, double mu, double sigma, int bound) {
    double lo = r == -bound ? 0.0 : std_normal_cdf((r - 0.5 - mu) / sigma);
    double hi = r == bound ? 1.0 : std_normal_cdf((r + 0.5 - mu) / sigma);
    return hi - lo;
  }

  static std::vector<double> pmf(double mu, double sigma, int bound) {
    std::vector<double> p(2 * bound + 1);
    double prev = 0.0;
    for (int r = -bound; r <= bound; ++r) {
      double hi = r == bound ? 1.0 : std_normal_cdf((r + 0.5 - mu) / sigma);
      p[r + bound] = hi - prev;
      prev = hi;
    }
    return p;
  }

  // -log2 of the discretized probability of integer symbol r.
  static double bits(int r, double mu, double sigma, int bound) {
    double p = bin_prob(r, mu, sigma, bound);
    if (p < 1e-12) p = 1e-12;
    return -std::log2(p);
  }
};

struct DiscretizedLogistic {
  static double cdf(double x, double loc, double scale) {
    return 1.0 / (1.0 + std::exp(-(x - loc) / scale));
  }
  static std::vector<double> pmf(double loc, double scale, int bound) {
    std::vector<double> p(2 * bound + 1);
    double prev = 0.0;
    for (int r = -bound; r <= bound; ++r) {
      double hi = r == bound ? 1.0 : cdf(r + 0.5, loc, scale);
      p[r + bound] = hi - prev;
      prev = hi;
    }
    return p;
  }
  static double bits(int r, double loc, double scale, int bound) {
    double lo = r == -bound ? 0.0 : cdf(r - 0.5, loc, scale);
    double hi = r == bound ? 1.0 : cdf(r + 0.5, loc, scale);
    double p = hi - lo;
    if (p < 1e-12) p = 1e-12;
    return -std::log2(p);
  }
};

// ---- differentiable rate surrogates (training path) ----

// Elementwise -log2 P(x in (x-1/2, x+1/2]) under N(mu, sigma^2), for
// continuous x (noisy or straight-through-rounded latents). Differentiable in
// x, mu and sigma. Probabilities are floored to keep the loss finite.
template <typename S>
inline nn::Var<S> gaussian_bits(const nn::Var<S>& x, const nn::Var<S>& mu,
                                const nn::Var<S>& sigma) {
  using nn::Node;
  LMVC_REQUIRE(x->val.same_dims(mu->val) && x->val.same_dims(sigma->val), UsageError,
               "gaussian_bits: dim mismatch");
  const size_t n = x->val.size();
  constexpr double kPMin = 1e-9;
  constexpr double kInvLn2 = 1.4426950408889634074;
  Tensor<S> out(x->val.dims());
  for (size_t i = 0; i < n; ++i) {
    double d = double(x->val[i]) - double(mu->val[i]);
    double s = double(sigma->val[i]);
    double p = std_normal_cdf((d + 0.5) / s) - std_normal_cdf((d - 0.5) / s);
    out[i] = S(-std::log2(p < kPMin ? kPMin : p));
  }
  return nn::make_op<S>(std::move(out), {x, mu, sigma}, [x, mu, sigma](Node<S>& nd) {
    for (size_t i = 0; i < nd.grad.size(); ++i) {
      double d = double(x->val[i]) - double(mu->val[i]);
      double s = double(sigma->val[i]);
      double a = (d + 0.5) / s, b = (d - 0.5) / s;
      double p = std_normal_cdf(a) - std_normal_cdf(b);
      if (p < kPMin) continue;  // floored region: zero gradient
      double pa = std_normal_pdf(a), pb = std_normal_pdf(b);
      double g = double(nd.grad[i]);
      double dbits_dd = -(pa - pb) / (p * s) * kInvLn2;
      double dbits_ds = (a * pa - b * pb) / (p * s) * kInvLn2;
      if (x->requires_grad) x->grad[i] += S(g * dbits_dd);
      if (mu->requires_grad) mu->grad[i] -= S(g * dbits_dd);
      if (sigma->requires_grad) sigma->grad[i] += S(g * dbits_ds);
    }
  });
}

// Same for a per-channel logistic (the learned factorized hyper model).
// loc/scale are {C} vectors broadcast over the {C,h,w} latent.
template <typename S>
inline nn::Var<S> logistic_bits(const nn::Var<S>& x, const nn::Var<S>& loc,
                                const nn::Var<S>& scale) {
  using nn::Node;
  const int C = x->val.channels();
  LMVC_REQUIRE(loc->val.dim(0) == C && scale->val.dim(0) == C, UsageError,
               "logistic_bits: channel mismatch");
  const size_t plane = static_cast<size_t>(x->val.height()) * x->val.width();
  constexpr double kPMin = 1e-9;
  constexpr double kInvLn2 = 1.4426950408889634074;
  Tensor<S> out(x->val.dims());
  for (int c = 0; c < C; ++c) {
    double l = double(loc->val[c]), s = double(scale->val[c]);
    for (size_t i = 0; i < plane; ++i) {
      double v = double(x->val[c * plane + i]);
      double p = DiscretizedLogistic::cdf(v + 0.5, l, s) -
                 DiscretizedLogistic::cdf(v - 0.5, l, s);
      out[c * plane + i] = S(-std::log2(p < kPMin ? kPMin : p));
    }
  }
  return nn::make_op<S>(std::move(out), {x, loc, scale},
                        [x, loc, scale, C, plane](Node<S>& nd) {
    for (int c = 0; c < C; ++c) {
      double l = double(loc->val[c]), s = double(scale->val[c]);
      double gl = 0.0, gs = 0.0;
      for (size_t i = 0; i < plane; ++i) {
        size_t idx = c * plane + i;
        double v = double(x->val[idx]);
        double fa = DiscretizedLogistic::cdf(v + 0.5, l, s);
        double fb = DiscretizedLogistic::cdf(v - 0.5, l, s);
        double p = fa - fb;
        if (p < kPMin) continue;
        double da = fa * (1.0 - fa) / s;  // d cdf / d v
        double db = fb * (1.0 - fb) / s;
        double g = double(nd.grad[idx]);
        double dbits_dv = -(da - db) / p * kInvLn2;
        if (x->requires_grad) x->grad[idx] += S(g * dbits_dv);
        gl += g * -dbits_dv;  // d/dloc = -d/dv
        gs += g * (da * (v + 0.5 - l) - db * (v - 0.5 - l)) / (p * s) * kInvLn2;
      }
      if (loc->requires_grad) loc->grad[c] += S(gl);
      if (scale->requires_grad) scale->grad[c] += S(gs);
    }
  });
}

// ---- exact rate on integer symbols (matches the coder's model) ----

inline double exact_gaussian_bits(const Tensor<int>& symbols,
                                  const Tensor<double>& mu,
                                  const Tensor<double>& sigma, int bound) {
  double total = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i)
    total += DiscretizedGaussian::bits(symbols[i], mu[i], sigma[i], bound);
  return total;
}

}  // namespace lmvc
