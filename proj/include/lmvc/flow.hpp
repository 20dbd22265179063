// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <memory>

#include "lmvc/core/nn.hpp"

namespace lmvc {

// Dense displacement estimation between two frames, flow(y,x) = (dx, dy)
// such that a(y,x) ~= b(y+dy, x+dx). Pluggable backend: a tiny trainable
// pyramid network by default, a deterministic block matcher for tests and
// dependency-free runs.

template <typename S>
class FlowEstimator {
 public:
  virtual ~FlowEstimator() = default;
  // a, b: {3,H,W} frames; returns {2,H,W} (dx plane then dy plane).
  virtual nn::Var<S> estimate(const nn::Var<S>& a, const nn::Var<S>& b) = 0;
  virtual void collect(const std::string& prefix, nn::ParamList<S>& out) const {}

 protected:
  static void check_dims(const nn::Var<S>& a, const nn::Var<S>& b) {
    LMVC_REQUIRE(a->val.same_dims(b->val) && a->val.rank() == 3 &&
                     a->val.channels() == 3,
                 UsageError, "estimate_flow: frame dimension mismatch");
  }
};

// ---- coarse-to-fine exhaustive block matching ----

struct BlockMatchingConfig {
  int block = 8;
  int levels = 3;
  int radius = 2;         // per-level refinement radius
  int coarse_radius = 4;  // radius at the coarsest level
};

template <typename S>
class BlockMatchingFlow : public FlowEstimator<S> {
 public:
  explicit BlockMatchingFlow(BlockMatchingConfig cfg = {}) : cfg_(cfg) {}

  nn::Var<S> estimate(const nn::Var<S>& a, const nn::Var<S>& b) override {
    this->check_dims(a, b);
    return nn::constant(compute(a->val, b->val));
  }

  Tensor<S> compute(const Tensor<S>& a, const Tensor<S>& b) const {
    std::vector<Tensor<S>> pa = gray_pyramid(a), pb = gray_pyramid(b);
    Tensor<S> fx, fy;  // block-resolution flow at current level
    for (int l = int(pa.size()) - 1; l >= 0; --l) {
      int radius = (l == int(pa.size()) - 1) ? cfg_.coarse_radius : cfg_.radius;
      match_level(pa[size_t(l)], pb[size_t(l)], radius, fx, fy);
    }
    // expand block grid to per-pixel field
    const int H = a.height(), W = a.width();
    const int bw = fx.width();
    Tensor<S> out({2, H, W});
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x) {
        int by = std::min(y / cfg_.block, fx.height() - 1);
        int bx = std::min(x / cfg_.block, bw - 1);
        out.at(0, y, x) = fx.at(0, by, bx);
        out.at(1, y, x) = fy.at(0, by, bx);
      }
    return out;
  }

 private:
  std::vector<Tensor<S>> gray_pyramid(const Tensor<S>& rgb) const {
    const int H = rgb.height(), W = rgb.width();
    Tensor<S> g({1, H, W});
    for (int y = 0; y < H; ++y)
      for (int x = 0; x < W; ++x)
        g.at(0, y, x) =
            (rgb.at(0, y, x) + rgb.at(1, y, x) + rgb.at(2, y, x)) * S(1.0 / 3.0);
    std::vector<Tensor<S>> pyr{std::move(g)};
    for (int l = 1; l < cfg_.levels; ++l) {
      const Tensor<S>& p = pyr.back();
      if (p.height() < 2 * cfg_.block || p.width() < 2 * cfg_.block) break;
      Tensor<S> d({1, p.height() / 2, p.width() / 2});
      for (int y = 0; y < d.height(); ++y)
        for (int x = 0; x < d.width(); ++x)
          d.at(0, y, x) = S(0.25) * (p.at(0, 2 * y, 2 * x) + p.at(0, 2 * y, 2 * x + 1) +
                                     p.at(0, 2 * y + 1, 2 * x) + p.at(0, 2 * y + 1, 2 * x + 1));
      pyr.push_back(std::move(d));
    }
    return pyr;
  }

  static S sample_clamped(const Tensor<S>& img, int y, int x) {
    y = std::min(img.height() - 1, std::max(0, y));
    x = std::min(img.width() - 1, std::max(0, x));
    return img.at(0, y, x);
  }

  // Candidate offsets ordered by |dy|+|dx| so ties resolve to the smallest
  // displacement; identical frames therefore give an exactly zero field.
  static std::vector<std::pair<int, int>> candidates(int radius) {
    std::vector<std::pair<int, int>> c;
    for (int dy = -radius; dy <= radius; ++dy)
      for (int dx = -radius; dx <= radius; ++dx) c.push_back({dy, dx});
    std::stable_sort(c.begin(), c.end(), [](auto& p, auto& q) {
      return std::abs(p.first) + std::abs(p.second) <
             std::abs(q.first) + std::abs(q.second);
    });
    return c;
  }

  void match_level(const Tensor<S>& a, const Tensor<S>& b, int radius, Tensor<S>& fx,
                   Tensor<S>& fy) const {
    const int H = a.height(), W = a.width(), B = cfg_.block;
    const int BH = (H + B - 1) / B, BW = (W + B - 1) / B;
    Tensor<S> nfx({1, BH, BW}), nfy({1, BH, BW});
    auto offs = candidates(radius);
#pragma omp parallel for schedule(static)
    for (int by = 0; by < BH; ++by) {
      for (int bx = 0; bx < BW; ++bx) {
        int ix = 0, iy = 0;
        if (!fx.empty()) {  // init from coarser level (block grid is halved)
          int py = std::min(by / 2, fx.height() - 1);
          int px = std::min(bx / 2, fx.width() - 1);
          ix = 2 * int(fx.at(0, py, px));
          iy = 2 * int(fy.at(0, py, px));
        }
        int y0 = by * B, x0 = bx * B;
        int y1 = std::min(y0 + B, H), x1 = std::min(x0 + B, W);
        double best = 1e300;
        int bdx = ix, bdy = iy;
        for (auto [dy, dx] : offs) {
          double sad = 0.0;
          for (int y = y0; y < y1; ++y)
            for (int x = x0; x < x1; ++x)
              sad += std::abs(double(a.at(0, y, x)) -
                              double(sample_clamped(b, y + iy + dy, x + ix + dx)));
          if (sad < best) {
            best = sad;
            bdy = iy + dy;
            bdx = ix + dx;
          }
        }
        nfx.at(0, by, bx) = S(bdx);
        nfy.at(0, by, bx) = S(bdy);
      }
    }
    fx = std::move(nfx);
    fy = std::move(nfy);
  }

  BlockMatchingConfig cfg_;
};

// ---- trainable coarse-to-fine pyramid network ----

struct PyramidFlowConfig {
  int levels = 2;
  int channels = 24;
};

template <typename S>
class PyramidFlowNet : public FlowEstimator<S>, public nn::Module<S> {
 public:
  PyramidFlowNet() = default;
  PyramidFlowNet(PyramidFlowConfig cfg, Rng& rng) : cfg_(cfg) {
    for (int l = 0; l < cfg.levels; ++l) {
      LevelNet net;
      net.c1 = nn::Conv2d<S>(8, cfg.channels, 3, 1, rng);
      net.c2 = nn::Conv2d<S>(cfg.channels, cfg.channels, 3, 1, rng);
      net.c3 = nn::Conv2d<S>(cfg.channels, 2, 3, 1, rng);
      net.c3.zero_init();  // zero flow update at init
      levels_.push_back(std::move(net));
    }
  }

  nn::Var<S> estimate(const nn::Var<S>& a, const nn::Var<S>& b) override {
    this->check_dims(a, b);
    std::vector<nn::Var<S>> pa{a}, pb{b};
    for (int l = 1; l < cfg_.levels; ++l) {
      pa.push_back(nn::avgpool2(pa.back()));
      pb.push_back(nn::avgpool2(pb.back()));
    }
    nn::Var<S> flow;
    for (int l = cfg_.levels - 1; l >= 0; --l) {
      if (!flow) {
        flow = nn::zeros_like_shape<S>(2, pa[size_t(l)]->val.height(),
                                       pa[size_t(l)]->val.width());
      } else {
        flow = nn::scale(nn::upsample_nearest2(flow), S(2));
      }
      auto warped = nn::warp_bilinear(pb[size_t(l)], flow);
      auto in = nn::concat_ch<S>({pa[size_t(l)], warped, flow});
      const auto& net = levels_[size_t(l)];
      auto h = nn::leaky_relu(net.c1(in));
      h = nn::leaky_relu(net.c2(h));
      flow = nn::add(flow, net.c3(h));
    }
    return flow;
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    for (size_t l = 0; l < levels_.size(); ++l) {
      std::string p = prefix + ".l" + std::to_string(l);
      levels_[l].c1.collect(p + ".c1", out);
      levels_[l].c2.collect(p + ".c2", out);
      levels_[l].c3.collect(p + ".c3", out);
    }
  }

 private:
  struct LevelNet {
    nn::Conv2d<S> c1, c2, c3;
  };
  PyramidFlowConfig cfg_;
  std::vector<LevelNet> levels_;
};

}  // namespace lmvc
