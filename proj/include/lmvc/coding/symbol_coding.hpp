// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/coding/distributions.hpp"
#include "lmvc/coding/range_coder.hpp"
#include "lmvc/core/rng.hpp"

namespace lmvc {

// Coding of integer symbol grids against per-position discretized Gaussians
// and per-channel logistics. Encoder and decoder build the same quantized CDF
// from the same (mu, sigma), so streams are reproducible bit for bit.

inline std::vector<uint32_t> gaussian_cdf(double mu, double sigma, int bound) {
  return freq_to_cdf(quantize_pmf(DiscretizedGaussian::pmf(mu, sigma, bound)));
}

inline std::vector<uint32_t> logistic_cdf(double loc, double scale, int bound) {
  return freq_to_cdf(quantize_pmf(DiscretizedLogistic::pmf(loc, scale, bound)));
}

inline void encode_symbol(RangeEncoder& enc, const std::vector<uint32_t>& cdf, int sym,
                          int bound) {
  LMVC_REQUIRE(sym >= -bound && sym <= bound, CoderError, "symbol out of range");
  size_t i = size_t(sym + bound);
  enc.encode(cdf[i], cdf[i + 1] - cdf[i], kFreqTotal);
}

inline int decode_symbol(RangeDecoder& dec, const std::vector<uint32_t>& cdf,
                         int bound) {
  uint32_t f = dec.decode_freq(kFreqTotal);
  int idx = cdf_find_symbol(cdf, f);
  dec.decode_update(cdf[size_t(idx)], cdf[size_t(idx) + 1] - cdf[size_t(idx)],
                    kFreqTotal);
  return idx - bound;
}

template <typename S>
inline void encode_gaussian_grid(RangeEncoder& enc, const Tensor<int>& symbols,
                                 const Tensor<S>& mu, const Tensor<S>& sigma,
                                 int bound) {
  for (size_t i = 0; i < symbols.size(); ++i) {
    auto cdf = gaussian_cdf(double(mu[i]), double(sigma[i]), bound);
    encode_symbol(enc, cdf, symbols[i], bound);
  }
}

template <typename S>
inline Tensor<int> decode_gaussian_grid(RangeDecoder& dec, const Tensor<S>& mu,
                                        const Tensor<S>& sigma, int bound) {
  Tensor<int> symbols(mu.dims());
  for (size_t i = 0; i < symbols.size(); ++i) {
    auto cdf = gaussian_cdf(double(mu[i]), double(sigma[i]), bound);
    symbols[i] = decode_symbol(dec, cdf, bound);
  }
  return symbols;
}

// Per-channel logistic model for {C,h,w} hyper latents.
template <typename S>
inline void encode_logistic_grid(RangeEncoder& enc, const Tensor<int>& symbols,
                                 const Tensor<S>& loc, const Tensor<S>& scale,
                                 int bound) {
  const int C = symbols.channels();
  const size_t plane = size_t(symbols.height()) * symbols.width();
  for (int c = 0; c < C; ++c) {
    auto cdf = logistic_cdf(double(loc[size_t(c)]), double(scale[size_t(c)]), bound);
    for (size_t i = 0; i < plane; ++i)
      encode_symbol(enc, cdf, symbols[size_t(c) * plane + i], bound);
  }
}

template <typename S>
inline Tensor<int> decode_logistic_grid(RangeDecoder& dec, std::vector<int> dims,
                                        const Tensor<S>& loc, const Tensor<S>& scale,
                                        int bound) {
  Tensor<int> symbols(std::move(dims));
  const int C = symbols.channels();
  const size_t plane = size_t(symbols.height()) * symbols.width();
  for (int c = 0; c < C; ++c) {
    auto cdf = logistic_cdf(double(loc[size_t(c)]), double(scale[size_t(c)]), bound);
    for (size_t i = 0; i < plane; ++i)
      symbols[size_t(c) * plane + i] = decode_symbol(dec, cdf, bound);
  }
  return symbols;
}

// Exact model rate in bits of a symbol grid (the estimate the coder is held
// to: coded bytes <= estimate * 1.02 + 32).
template <typename S>
inline double gaussian_grid_bits(const Tensor<int>& symbols, const Tensor<S>& mu,
                                 const Tensor<S>& sigma, int bound) {
  double total = 0.0;
  for (size_t i = 0; i < symbols.size(); ++i)
    total += DiscretizedGaussian::bits(symbols[i], double(mu[i]), double(sigma[i]), bound);
  return total;
}

template <typename S>
inline double logistic_grid_bits(const Tensor<int>& symbols, const Tensor<S>& loc,
                                 const Tensor<S>& scale, int bound) {
  const int C = symbols.channels();
  const size_t plane = size_t(symbols.height()) * symbols.width();
  double total = 0.0;
  for (int c = 0; c < C; ++c)
    for (size_t i = 0; i < plane; ++i)
      total += DiscretizedLogistic::bits(symbols[size_t(c) * plane + i],
                                         double(loc[size_t(c)]),
                                         double(scale[size_t(c)]), bound);
  return total;
}

// Quantized-sigma coding tables. Mean-shifted symbols are coded against
// N(0, sigma) with sigma snapped to a log-spaced grid, so each level's
// integer CDF is built once instead of per position. Encoder and decoder
// derive the level index from the same float, keeping streams identical.
class SigmaTable {
 public:
  SigmaTable() = default;
  SigmaTable(double sigma_min, double sigma_max, int levels, int bound)
      : smin_(sigma_min),
        smax_(sigma_max),
        levels_(levels),
        bound_(bound),
        log_ratio_(std::log(sigma_max / sigma_min)),
        cdfs_(size_t(levels)),
        bits_(size_t(levels)) {}

  int bound() const { return bound_; }

  int index(double sigma) const {
    if (sigma <= smin_) return 0;
    if (sigma >= smax_) return levels_ - 1;
    double t = std::log(sigma / smin_) / log_ratio_ * (levels_ - 1);
    int i = int(std::nearbyint(t));
    return std::clamp(i, 0, levels_ - 1);
  }

  double sigma_at(int i) const {
    return smin_ * std::exp(log_ratio_ * double(i) / double(levels_ - 1));
  }

  const std::vector<uint32_t>& cdf(int i) const {
    auto& slot = cdfs_[size_t(i)];
    if (slot.empty())
      slot = freq_to_cdf(quantize_pmf(DiscretizedGaussian::pmf(0.0, sigma_at(i), bound_)));
    return slot;
  }

  // model rate of the snapped-sigma Gaussian
  double bits(int symbol, int i) const {
    auto& slot = bits_[size_t(i)];
    if (slot.empty()) {
      slot.resize(size_t(2 * bound_ + 1));
      for (int r = -bound_; r <= bound_; ++r)
        slot[size_t(r + bound_)] = DiscretizedGaussian::bits(r, 0.0, sigma_at(i), bound_);
    }
    return slot[size_t(symbol + bound_)];
  }

 private:
  double smin_ = 0.11, smax_ = 64.0;
  int levels_ = 256;
  int bound_ = 128;
  double log_ratio_ = 1.0;
  mutable std::vector<std::vector<uint32_t>> cdfs_;
  mutable std::vector<std::vector<double>> bits_;
};

// Inverse-CDF sampling from the discretized Gaussian (test utility).
inline int sample_discretized_gaussian(Rng& rng, double mu, double sigma, int bound) {
  double u = rng.uniform();
  double acc = 0.0;
  for (int r = -bound; r <= bound; ++r) {
    acc += DiscretizedGaussian::bin_prob(r, mu, sigma, bound);
    if (u < acc) return r;
  }
  return bound;
}

}  // namespace lmvc
