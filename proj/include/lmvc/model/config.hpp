// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "lmvc/core/check.hpp"

namespace lmvc {

enum class QuantMode : uint8_t {
  ste,    // round(x - mu) + mu forward, identity backward
  noise,  // additive uniform noise
  none    // identity (smooth path for gradient checks)
};

enum class FlowBackend : uint8_t { pyramid_net, block_matching };

// Which inter-view mechanisms a dependent-view codec uses. All four off
// reproduces the independent-view (temporal-only) codec.
struct InterViewFlags {
  bool ivmvp = true;   // fusion of view-0 motion difference features
  bool ivmem = true;   // inter-view motion prior in the motion entropy model
  bool ivcp = true;    // inter-view context prediction
  bool ivcem = true;   // inter-view prior in the contextual entropy model
  bool any() const { return ivmvp || ivmem || ivcp || ivcem; }
};

struct CodecConfig {
  // channel widths
  int feat_ch = 64;            // content feature width (C_f)
  int motion_feat_ch = 64;     // motion feature width (C_m)
  int motion_latent_ch = 64;   // motion latent channels
  int content_latent_ch = 96;  // content latent channels (C_y)
  int hyper_ch = 32;           // hyper latent channels
  int prior_ch = 64;           // prior fusion width
  int flow_ch = 24;            // pyramid flow net width
  int flow_levels = 2;

  // entropy model
  int symbol_bound = 128;  // symbols live in [-L, L]
  double sigma_min = 0.11;
  double sigma_max = 64.0;

  // rate control
  std::array<double, 4> lambdas{85.0, 170.0, 380.0, 840.0};
  std::array<double, 4> q_init{0.60, 0.85, 1.20, 1.70};

  // training shape
  std::vector<double> layer_weights{1.4, 1.4, 0.7, 0.5, 0.2};
  double iframe_weight = 1.0;
  QuantMode quant_mode = QuantMode::ste;

  FlowBackend flow_backend = FlowBackend::pyramid_net;

  int num_rates() const { return int(lambdas.size()); }

  void validate() const {
    LMVC_REQUIRE(feat_ch > 0 && motion_feat_ch > 0 && motion_latent_ch > 0 &&
                     content_latent_ch > 0 && hyper_ch > 0 && prior_ch > 0,
                 ConfigError, "channel widths must be positive");
    LMVC_REQUIRE(symbol_bound >= 8, ConfigError, "symbol bound too small");
    LMVC_REQUIRE(sigma_min > 0 && sigma_max > sigma_min, ConfigError,
                 "bad sigma clamp range");
  }

  // Reduced widths for unit tests and smoke trainings.
  static CodecConfig micro() {
    CodecConfig c;
    c.feat_ch = 8;
    c.motion_feat_ch = 8;
    c.motion_latent_ch = 8;
    c.content_latent_ch = 8;
    c.hyper_ch = 4;
    c.prior_ch = 8;
    c.flow_ch = 8;
    c.symbol_bound = 64;
    return c;
  }

  // Mid-size profile: fast on CPU, still clearly structured.
  static CodecConfig small() {
    CodecConfig c;
    c.feat_ch = 32;
    c.motion_feat_ch = 32;
    c.motion_latent_ch = 32;
    c.content_latent_ch = 48;
    c.hyper_ch = 16;
    c.prior_ch = 32;
    c.flow_ch = 16;
    return c;
  }

  uint64_t hash() const {
    // FNV over the fields that shape parameter tensors
    uint64_t h = 1469598103934665603ull;
    auto mix = [&h](uint64_t v) {
      h ^= v;
      h *= 1099511628211ull;
    };
    mix(uint64_t(feat_ch));
    mix(uint64_t(motion_feat_ch));
    mix(uint64_t(motion_latent_ch));
    mix(uint64_t(content_latent_ch));
    mix(uint64_t(hyper_ch));
    mix(uint64_t(prior_ch));
    mix(uint64_t(flow_ch));
    mix(uint64_t(flow_levels));
    mix(uint64_t(symbol_bound));
    mix(uint64_t(num_rates()));
    return h;
  }
};

// One of the four operating points: index, Lagrange multiplier, and the
// learned quantization-step vectors live in the latent codecs.
struct RatePoint {
  int lambda_index = 0;
  double lambda_value = 85.0;

  static RatePoint at(const CodecConfig& cfg, int index) {
    LMVC_REQUIRE(index >= 0 && index < cfg.num_rates(), ConfigError,
                 "lambda_index out of range");
    return {index, cfg.lambdas[size_t(index)]};
  }
};

}  // namespace lmvc
