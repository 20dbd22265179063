// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <filesystem>

#include "lmvc/synthesis.hpp"

namespace lmvc {

// Training material: either single-view clips loaded from disk or procedural
// moving textures. Multiview pairs always come out of the synthesis pipeline.

// Smooth multi-frequency texture with global motion, a temporal phase drift
// and a moving blob. Deterministic in the seed; subpixel motion comes from
// evaluating the continuous pattern, not from resampling.
inline std::vector<VideoFrame> make_synthetic_video(uint64_t seed, int frames, int h,
                                                    int w) {
  Rng rng(seed);
  double fx[5], fy[5], ph[5], amp[5], drift[5];
  for (int i = 0; i < 5; ++i) {
    fx[i] = rng.uniform(0.03, 0.35);
    fy[i] = rng.uniform(0.03, 0.35);
    ph[i] = rng.uniform(0.0, 6.283);
    amp[i] = rng.uniform(0.04, 0.11);
    drift[i] = rng.uniform(-0.08, 0.08);
  }
  double vx = rng.uniform(-1.6, 1.6), vy = rng.uniform(-1.2, 1.2);
  double bx0 = rng.uniform(0.2, 0.8) * w, by0 = rng.uniform(0.2, 0.8) * h;
  double bvx = rng.uniform(-2.0, 2.0), bvy = rng.uniform(-2.0, 2.0);
  double brad = rng.uniform(0.08, 0.2) * std::min(h, w);

  std::vector<VideoFrame> out;
  out.reserve(size_t(frames));
  for (int t = 0; t < frames; ++t) {
    VideoFrame f;
    f.poc = t;
    f.rgb = Tensor<float>({3, h, w});
    double bx = bx0 + bvx * t, by = by0 + bvy * t;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double gx = x - vx * t, gy = y - vy * t;
        double base = 0.0;
        for (int i = 0; i < 5; ++i)
          base += amp[i] * std::sin(fx[i] * gx + fy[i] * gy + ph[i] + drift[i] * t);
        double dx = x - bx, dy = y - by;
        double blob = 0.25 * std::exp(-(dx * dx + dy * dy) / (2 * brad * brad));
        for (int c = 0; c < 3; ++c) {
          double v = 0.5 + base * (1.0 + 0.25 * c) + blob * (c == 1 ? -1.0 : 1.0);
          f.rgb.at(c, y, x) = float(std::clamp(v, 0.0, 1.0));
        }
      }
    out.push_back(std::move(f));
  }
  return out;
}

inline VideoFrame crop_frame(const VideoFrame& f, int y0, int x0, int h, int w) {
  VideoFrame out;
  out.view_id = f.view_id;
  out.poc = f.poc;
  out.rgb = Tensor<float>({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.rgb.at(c, y, x) = f.rgb.at(c, y0 + y, x0 + x);
  return out;
}

// Clip pool: procedural by default, or single-view clips from a directory of
// subdirectories of numbered frames.
class ClipSource {
 public:
  // procedural source
  ClipSource(int frame_count, int height, int width)
      : frames_(frame_count), h_(height), w_(width) {}

  // disk source: <dir>/<clip>/frame_%06d.ppm
  explicit ClipSource(const std::string& dir, int frame_count)
      : frames_(frame_count) {
    namespace fs = std::filesystem;
    for (const auto& e : fs::directory_iterator(dir))
      if (e.is_directory()) clip_dirs_.push_back(e.path().string());
    std::sort(clip_dirs_.begin(), clip_dirs_.end());
    LMVC_REQUIRE(!clip_dirs_.empty(), UsageError, "ClipSource: no clips in " + dir);
  }

  // `frames` consecutive frames of one single-view clip
  std::vector<VideoFrame> draw(Rng& rng) const {
    if (clip_dirs_.empty()) return make_synthetic_video(rng.next_u64(), frames_, h_, w_);
    const std::string& dir = clip_dirs_[size_t(rng.below(clip_dirs_.size()))];
    std::vector<VideoFrame> all;
    for (int t = 0;; ++t) {
      auto p = std::filesystem::path(dir) / frame_filename(t);
      if (!std::filesystem::exists(p)) break;
      all.push_back(read_ppm(p.string()));
    }
    LMVC_REQUIRE(int(all.size()) >= frames_, UsageError,
                 "ClipSource: clip too short: " + dir);
    size_t start = rng.below(all.size() - size_t(frames_) + 1);
    return {all.begin() + std::ptrdiff_t(start),
            all.begin() + std::ptrdiff_t(start + size_t(frames_))};
  }

  // random crop shared across the frames of a clip
  static std::vector<VideoFrame> random_crop(const std::vector<VideoFrame>& clip,
                                             int crop, Rng& rng) {
    int h = clip[0].height(), w = clip[0].width();
    LMVC_REQUIRE(h >= crop && w >= crop, UsageError, "random_crop: crop too large");
    int y0 = int(rng.below(uint64_t(h - crop + 1)));
    int x0 = int(rng.below(uint64_t(w - crop + 1)));
    std::vector<VideoFrame> out;
    out.reserve(clip.size());
    for (const auto& f : clip) out.push_back(crop_frame(f, y0, x0, crop, crop));
    return out;
  }

 private:
  std::vector<std::string> clip_dirs_;
  int frames_ = 5;
  int h_ = 128, w_ = 128;
};

}  // namespace lmvc
