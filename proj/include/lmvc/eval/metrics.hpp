// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cmath>

#include "lmvc/video/frame.hpp"

namespace lmvc {

struct RDPoint {
  double bpp = 0.0;
  double psnr = 0.0;  // dB, peak 1.0
};

inline double frame_psnr(const VideoFrame& a, const VideoFrame& b) {
  double mse = frame_mse(a, b);
  if (mse <= 0.0) return 100.0;  // identical content reported as the 100 dB cap
  return std::min(100.0, 10.0 * std::log10(1.0 / mse));
}

// bpp over all views; PSNR averaged per frame, then per view, then across
// views, unweighted.
inline RDPoint compute_metrics(const FrameArray& orig, const FrameArray& recon,
                               double total_bits) {
  LMVC_REQUIRE(orig.num_views() == recon.num_views() &&
                   orig.num_frames() == recon.num_frames(),
               UsageError, "compute_metrics: clip shape mismatch");
  const int views = orig.num_views(), frames = orig.num_frames();
  LMVC_REQUIRE(views > 0 && frames > 0, UsageError, "compute_metrics: empty clip");
  const double w = orig.width(), h = orig.height();
  double psnr_sum = 0.0;
  for (int v = 0; v < views; ++v) {
    double view_sum = 0.0;
    for (int t = 0; t < frames; ++t) {
      LMVC_REQUIRE(orig.frames[size_t(v)][size_t(t)].rgb.same_dims(
                       recon.frames[size_t(v)][size_t(t)].rgb),
                   UsageError, "compute_metrics: frame shape mismatch");
      view_sum += frame_psnr(orig.frames[size_t(v)][size_t(t)],
                             recon.frames[size_t(v)][size_t(t)]);
    }
    psnr_sum += view_sum / frames;
  }
  RDPoint p;
  p.bpp = total_bits / (w * h * double(frames) * double(views));
  p.psnr = psnr_sum / views;
  return p;
}

}  // namespace lmvc
