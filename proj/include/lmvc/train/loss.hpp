// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/model/config.hpp"
#include "lmvc/schedule.hpp"
#include "lmvc/video/frame.hpp"

namespace lmvc {

// Rate-distortion loss bookkeeping. Distortion is MSE in [0,1] pixel units;
// rates are logged normalized by the pixel count (bits per pixel) so the
// printed lambda values are usable as-is. The total is computed from the
// logged components, never separately, so the identity
//   L = w * lambda * D + R_m + R_y
// holds to machine precision on every step.
struct LossBreakdown {
  double distortion = 0.0;    // D (MSE)
  double bits_motion = 0.0;   // R_m, normalized
  double bits_content = 0.0;  // R_y, normalized
  double weight = 1.0;        // w (hierarchical)
  double lambda = 0.0;
  double total = 0.0;         // L

  static LossBreakdown make(double d, double rm, double ry, double w, double lambda) {
    LossBreakdown b;
    b.distortion = d;
    b.bits_motion = rm;
    b.bits_content = ry;
    b.weight = w;
    b.lambda = lambda;
    b.total = w * lambda * d + rm + ry;
    return b;
  }

  bool identity_holds(double rel_tol = 1e-6) const {
    double expect = weight * lambda * distortion + bits_motion + bits_content;
    double scale = std::max(1.0, std::abs(expect));
    return std::abs(total - expect) <= rel_tol * scale;
  }
};

// Per-pixel rate normalization: raw bits / (H*W).
inline double rate_norm_constant(int height, int width) {
  return 1.0 / (double(height) * double(width));
}

// The per-unit loss of one coded frame (raw bit counts in, normalized out).
inline LossBreakdown rd_loss(const CodingUnit& unit, const VideoFrame& x,
                             const VideoFrame& x_hat, double raw_bits_motion,
                             double raw_bits_content, const RatePoint& rate) {
  LMVC_REQUIRE(x.rgb.same_dims(x_hat.rgb), UsageError, "rd_loss: dim mismatch");
  double norm = rate_norm_constant(x.height(), x.width());
  return LossBreakdown::make(frame_mse(x, x_hat), raw_bits_motion * norm,
                             raw_bits_content * norm, unit.loss_weight,
                             rate.lambda_value);
}

}  // namespace lmvc
