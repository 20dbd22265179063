// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <array>
#include <cmath>
#include <fstream>
#include <sstream>

#include "lmvc/core/rng.hpp"
#include "lmvc/video/frame.hpp"

namespace lmvc {

// Multiview training clips are synthesized from single-view material: each
// dependent view is the source view pushed through one fixed geometric
// transform, so the simulated camera is temporally consistent.

enum class TransformKind : uint8_t { affine, homography };

struct ViewTransformParams {
  TransformKind kind = TransformKind::affine;
  double dx = 0.0, dy = 0.0;                         // pixels
  double perspective_x = 0.0, perspective_y = 0.0;   // dimensionless
  uint64_t seed = 0;
};

struct SynthesisBounds {
  double dx_max = 8.0;
  double dy_max = 8.0;
  double p_max = 4e-4;
};

using Mat3 = std::array<double, 9>;  // row major

inline Mat3 homography_from_params(const ViewTransformParams& p) {
  return {1.0, 0.0, p.dx, 0.0, 1.0, p.dy, p.perspective_x, p.perspective_y, 1.0};
}

inline double det3(const Mat3& m) {
  return m[0] * (m[4] * m[8] - m[5] * m[7]) - m[1] * (m[3] * m[8] - m[5] * m[6]) +
         m[2] * (m[3] * m[7] - m[4] * m[6]);
}

inline Mat3 invert3(const Mat3& m) {
  double d = det3(m);
  LMVC_REQUIRE(std::abs(d) > 1e-9, ParamError,
               "transform matrix is not invertible (perspective too large)");
  double id = 1.0 / d;
  return {(m[4] * m[8] - m[5] * m[7]) * id, (m[2] * m[7] - m[1] * m[8]) * id,
          (m[1] * m[5] - m[2] * m[4]) * id, (m[5] * m[6] - m[3] * m[8]) * id,
          (m[0] * m[8] - m[2] * m[6]) * id, (m[2] * m[3] - m[0] * m[5]) * id,
          (m[3] * m[7] - m[4] * m[6]) * id, (m[1] * m[6] - m[0] * m[7]) * id,
          (m[0] * m[4] - m[1] * m[3]) * id};
}

// Projects (x, y, 1) and dehomogenizes.
inline std::pair<double, double> apply_homography(const Mat3& m, double x, double y) {
  double X = m[0] * x + m[1] * y + m[2];
  double Y = m[3] * x + m[4] * y + m[5];
  double W = m[6] * x + m[7] * y + m[8];
  LMVC_REQUIRE(std::abs(W) > 1e-9, ParamError, "apply_homography: point at infinity");
  return {X / W, Y / W};
}

// Deterministic given the seed. Affine draws only the horizontal
// displacement; homography draws displacements and perspective intensities.
inline ViewTransformParams sample_params(uint64_t rng_seed, TransformKind kind,
                                         const SynthesisBounds& b = {}) {
  Rng rng(rng_seed);
  ViewTransformParams p;
  p.kind = kind;
  p.seed = rng_seed;
  p.dx = rng.uniform(-b.dx_max, b.dx_max);
  if (kind == TransformKind::homography) {
    p.dy = rng.uniform(-b.dy_max, b.dy_max);
    p.perspective_x = rng.uniform(-b.p_max, b.p_max);
    p.perspective_y = rng.uniform(-b.p_max, b.p_max);
  }
  return p;
}

// Applies the forward transform to the image content: an impulse at (x, y)
// lands at the projection of (x, y). Implemented as inverse-map bilinear
// sampling with edge replication; output has the input's dimensions.
inline VideoFrame warp_frame(const VideoFrame& frame, const ViewTransformParams& p) {
  LMVC_REQUIRE(!frame.empty(), UsageError, "warp_frame: empty frame");
  const int h = frame.height(), w = frame.width();
  Mat3 inv = invert3(homography_from_params(p));
  VideoFrame out;
  out.rgb = Tensor<float>({3, h, w});
  out.view_id = frame.view_id;
  out.poc = frame.poc;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      auto [sx, sy] = apply_homography(inv, double(x), double(y));
      sx = std::min(double(w - 1), std::max(0.0, sx));
      sy = std::min(double(h - 1), std::max(0.0, sy));
      int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
      int x1 = std::min(x0 + 1, w - 1), y1 = std::min(y0 + 1, h - 1);
      double ax = sx - x0, ay = sy - y0;
      for (int c = 0; c < 3; ++c) {
        double v00 = frame.rgb.at(c, y0, x0), v01 = frame.rgb.at(c, y0, x1);
        double v10 = frame.rgb.at(c, y1, x0), v11 = frame.rgb.at(c, y1, x1);
        out.rgb.at(c, y, x) = float((1 - ay) * ((1 - ax) * v00 + ax * v01) +
                                    ay * ((1 - ax) * v10 + ax * v11));
      }
    }
  return out;
}

struct MultiviewClip {
  FrameArray views;  // [view][time]
  std::vector<ViewTransformParams> transform_per_view;  // entry 0 is identity

  int num_views() const { return views.num_views(); }
};

// View 0 keeps the originals; dependent view v applies one params object
// (seed derived from (seed, v)) to every frame. Kinds alternate
// affine/homography across dependent views.
inline MultiviewClip synthesize_clip(const std::vector<VideoFrame>& single_view,
                                     int num_views, uint64_t seed,
                                     const SynthesisBounds& bounds = {}) {
  LMVC_REQUIRE(num_views >= 2, UsageError, "synthesize_clip: num_views must be >= 2");
  LMVC_REQUIRE(!single_view.empty(), UsageError, "synthesize_clip: empty input");
  MultiviewClip clip;
  clip.views.frames.resize(size_t(num_views));
  clip.transform_per_view.resize(size_t(num_views));
  clip.views.frames[0] = single_view;
  for (int t = 0; t < int(single_view.size()); ++t) {
    clip.views.frames[0][size_t(t)].view_id = 0;
    clip.views.frames[0][size_t(t)].poc = t;
  }
  Rng base(seed);
  for (int v = 1; v < num_views; ++v) {
    TransformKind kind = (v % 2 == 1) ? TransformKind::affine : TransformKind::homography;
    uint64_t view_seed = base.fork(uint64_t(v)).next_u64();
    ViewTransformParams p = sample_params(view_seed, kind, bounds);
    clip.transform_per_view[size_t(v)] = p;
    auto& dst = clip.views.frames[size_t(v)];
    dst.reserve(single_view.size());
    for (int t = 0; t < int(single_view.size()); ++t) {
      VideoFrame f = warp_frame(single_view[size_t(t)], p);
      f.view_id = v;
      f.poc = t;
      dst.push_back(std::move(f));
    }
  }
  return clip;
}

// ---- sidecar manifest: one line per view for replay tests ----

inline std::string dump_manifest(const MultiviewClip& clip) {
  std::ostringstream os;
  os.precision(17);
  for (int v = 0; v < clip.num_views(); ++v) {
    const auto& p = clip.transform_per_view[size_t(v)];
    os << v << ' ' << (p.kind == TransformKind::affine ? "affine" : "homography")
       << ' ' << p.dx << ' ' << p.dy << ' ' << p.perspective_x << ' '
       << p.perspective_y << ' ' << p.seed << '\n';
  }
  return os.str();
}

inline std::vector<ViewTransformParams> parse_manifest(const std::string& text) {
  std::vector<ViewTransformParams> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    int v;
    std::string kind;
    ViewTransformParams p;
    ls >> v >> kind >> p.dx >> p.dy >> p.perspective_x >> p.perspective_y >> p.seed;
    LMVC_REQUIRE(!ls.fail(), UsageError, "parse_manifest: bad line: " + line);
    p.kind = kind == "affine" ? TransformKind::affine : TransformKind::homography;
    out.push_back(p);
  }
  return out;
}

}  // namespace lmvc
