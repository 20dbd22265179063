// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "lmvc/core/tensor.hpp"

namespace lmvc {

// One image of one view at one time instant. Pixels are RGB floats in [0,1],
// stored {3, H, W}.
struct VideoFrame {
  Tensor<float> rgb;
  int view_id = 0;
  int poc = 0;

  int height() const { return rgb.height(); }
  int width() const { return rgb.width(); }
  bool empty() const { return rgb.empty(); }
};

// frames[view][time]
struct FrameArray {
  std::vector<std::vector<VideoFrame>> frames;
  int num_views() const { return int(frames.size()); }
  int num_frames() const { return frames.empty() ? 0 : int(frames[0].size()); }
  int height() const { return frames[0][0].height(); }
  int width() const { return frames[0][0].width(); }
};

inline uint8_t to_u8(float v) {
  float x = v * 255.0f + 0.5f;
  if (x < 0.0f) x = 0.0f;
  if (x > 255.0f) x = 255.0f;
  return uint8_t(x);
}

inline float from_u8(uint8_t v) { return float(v) / 255.0f; }

// ---- binary PPM (P6, 8-bit) ----

inline void write_ppm(const std::string& path, const VideoFrame& f) {
  std::ofstream os(path, std::ios::binary);
  LMVC_REQUIRE(os.good(), UsageError, "write_ppm: cannot open " + path);
  os << "P6\n" << f.width() << " " << f.height() << "\n255\n";
  std::vector<uint8_t> row(size_t(f.width()) * 3);
  for (int y = 0; y < f.height(); ++y) {
    for (int x = 0; x < f.width(); ++x)
      for (int c = 0; c < 3; ++c) row[size_t(x) * 3 + c] = to_u8(f.rgb.at(c, y, x));
    os.write(reinterpret_cast<const char*>(row.data()), std::streamsize(row.size()));
  }
}

inline VideoFrame read_ppm(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  LMVC_REQUIRE(is.good(), UsageError, "read_ppm: cannot open " + path);
  std::string magic;
  is >> magic;
  LMVC_REQUIRE(magic == "P6", UsageError, "read_ppm: not a P6 file: " + path);
  auto skip_ws_comments = [&is]() {
    while (true) {
      int c = is.peek();
      if (c == '#') {
        std::string line;
        std::getline(is, line);
      } else if (std::isspace(c)) {
        is.get();
      } else {
        break;
      }
    }
  };
  int w = 0, h = 0, maxv = 0;
  skip_ws_comments();
  is >> w;
  skip_ws_comments();
  is >> h;
  skip_ws_comments();
  is >> maxv;
  is.get();  // single whitespace before raster
  LMVC_REQUIRE(w > 0 && h > 0 && maxv == 255, UsageError, "read_ppm: bad header");
  VideoFrame f;
  f.rgb = Tensor<float>({3, h, w});
  std::vector<uint8_t> row(size_t(w) * 3);
  for (int y = 0; y < h; ++y) {
    is.read(reinterpret_cast<char*>(row.data()), std::streamsize(row.size()));
    LMVC_REQUIRE(is.good(), UsageError, "read_ppm: truncated raster");
    for (int x = 0; x < w; ++x)
      for (int c = 0; c < 3; ++c) f.rgb.at(c, y, x) = from_u8(row[size_t(x) * 3 + c]);
  }
  return f;
}

// ---- raw YUV420 (8-bit planar, BT.601 full range) ----

inline VideoFrame yuv420_to_rgb(const std::vector<uint8_t>& buf, int w, int h) {
  LMVC_REQUIRE(buf.size() >= size_t(w) * h * 3 / 2, UsageError, "yuv420: short buffer");
  VideoFrame f;
  f.rgb = Tensor<float>({3, h, w});
  const uint8_t* yp = buf.data();
  const uint8_t* up = yp + size_t(w) * h;
  const uint8_t* vp = up + size_t(w / 2) * (h / 2);
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      float Y = float(yp[size_t(y) * w + x]);
      float U = float(up[size_t(y / 2) * (w / 2) + x / 2]) - 128.0f;
      float V = float(vp[size_t(y / 2) * (w / 2) + x / 2]) - 128.0f;
      float r = Y + 1.402f * V;
      float g = Y - 0.344136f * U - 0.714136f * V;
      float b = Y + 1.772f * U;
      auto clamp01 = [](float v) { return v < 0.f ? 0.f : (v > 255.f ? 255.f : v); };
      f.rgb.at(0, y, x) = clamp01(r) / 255.0f;
      f.rgb.at(1, y, x) = clamp01(g) / 255.0f;
      f.rgb.at(2, y, x) = clamp01(b) / 255.0f;
    }
  return f;
}

inline std::vector<VideoFrame> read_yuv420(const std::string& path, int w, int h,
                                           int max_frames = -1) {
  std::ifstream is(path, std::ios::binary);
  LMVC_REQUIRE(is.good(), UsageError, "read_yuv420: cannot open " + path);
  size_t frame_bytes = size_t(w) * h * 3 / 2;
  std::vector<VideoFrame> out;
  std::vector<uint8_t> buf(frame_bytes);
  while (max_frames < 0 || int(out.size()) < max_frames) {
    is.read(reinterpret_cast<char*>(buf.data()), std::streamsize(frame_bytes));
    if (size_t(is.gcount()) < frame_bytes) break;
    VideoFrame f = yuv420_to_rgb(buf, w, h);
    f.poc = int(out.size());
    out.push_back(std::move(f));
  }
  return out;
}

// ---- frame directories: <dir>/view<k>/frame_%06d.ppm ----

inline std::string frame_filename(int poc) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "frame_%06d.ppm", poc);
  return buf;
}

inline void write_frame_dir(const std::string& dir, const FrameArray& clip) {
  namespace fs = std::filesystem;
  for (int v = 0; v < clip.num_views(); ++v) {
    fs::path vd = fs::path(dir) / ("view" + std::to_string(v));
    fs::create_directories(vd);
    for (int t = 0; t < int(clip.frames[v].size()); ++t)
      write_ppm((vd / frame_filename(t)).string(), clip.frames[v][t]);
  }
}

inline FrameArray read_frame_dir(const std::string& dir, int num_views,
                                 int max_frames = -1) {
  namespace fs = std::filesystem;
  FrameArray clip;
  clip.frames.resize(size_t(num_views));
  for (int v = 0; v < num_views; ++v) {
    fs::path vd = fs::path(dir) / ("view" + std::to_string(v));
    LMVC_REQUIRE(fs::is_directory(vd), UsageError,
                 "read_frame_dir: missing " + vd.string());
    for (int t = 0; max_frames < 0 || t < max_frames; ++t) {
      fs::path p = vd / frame_filename(t);
      if (!fs::exists(p)) break;
      VideoFrame f = read_ppm(p.string());
      f.view_id = v;
      f.poc = t;
      clip.frames[size_t(v)].push_back(std::move(f));
    }
    LMVC_REQUIRE(!clip.frames[size_t(v)].empty(), UsageError,
                 "read_frame_dir: no frames in " + vd.string());
  }
  return clip;
}

inline double frame_mse(const VideoFrame& a, const VideoFrame& b) {
  LMVC_REQUIRE(a.rgb.same_dims(b.rgb), UsageError, "frame_mse: shape mismatch");
  double acc = 0.0;
  for (size_t i = 0; i < a.rgb.size(); ++i) {
    double d = double(a.rgb[i]) - double(b.rgb[i]);
    acc += d * d;
  }
  return acc / double(a.rgb.size());
}

}  // namespace lmvc
