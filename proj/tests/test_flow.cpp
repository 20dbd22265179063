// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lmvc/core/optim.hpp"
#include "lmvc/flow.hpp"

using namespace lmvc;
using nn::Var;

namespace {

// smooth but textured content so block SADs have a unique minimum
Tensor<float> textured(int h, int w, double phase = 0.0) {
  Tensor<float> t({3, h, w});
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x)
        t.at(c, y, x) = float(
            0.5 + 0.2 * std::sin(0.35 * x + 0.8 * c + phase) +
            0.2 * std::cos(0.23 * y - 0.3 * c + 1.7 * phase) +
            0.1 * std::sin(0.11 * (x + y) + phase));
  return t;
}

Tensor<float> shift_x(const Tensor<float>& src, int dx) {
  Tensor<float> out(src.dims());
  for (int c = 0; c < src.channels(); ++c)
    for (int y = 0; y < src.height(); ++y)
      for (int x = 0; x < src.width(); ++x) {
        int sx = std::clamp(x - dx, 0, src.width() - 1);
        out.at(c, y, x) = src.at(c, y, sx);
      }
  return out;
}

}  // namespace

TEST_CASE("identical frames give an exactly zero field (block matching)") {
  auto a = nn::constant(textured(48, 64));
  BlockMatchingFlow<float> bm;
  auto flow = bm.estimate(a, a);
  CHECK(flow->val.channels() == 2);
  CHECK(flow->val.height() == 48);
  for (size_t i = 0; i < flow->val.size(); ++i) CHECK(flow->val[i] == 0.0f);
}

TEST_CASE("pure translation recovered exactly in the valid interior") {
  auto base = textured(64, 80);
  auto moved = shift_x(base, 4);  // content moves +4 px in x
  BlockMatchingFlow<float> bm;
  // flow maps a-coords to b-coords: a(y,x) = b(y, x+4)
  auto flow = bm.estimate(nn::constant(base), nn::constant(moved));
  int wrong = 0;
  for (int y = 8; y < 56; ++y)
    for (int x = 8; x < 72; ++x) {
      if (flow->val.at(0, y, x) != 4.0f) ++wrong;
      if (flow->val.at(1, y, x) != 0.0f) ++wrong;
    }
  CHECK(wrong == 0);
}

TEST_CASE("dimension mismatch raises") {
  BlockMatchingFlow<float> bm;
  auto a = nn::constant(textured(32, 32));
  auto b = nn::constant(textured(32, 40));
  CHECK_THROWS_AS(bm.estimate(a, b), UsageError);
}

TEST_CASE("pyramid net: zero-initialized head gives zero flow, right shape") {
  Rng rng(3);
  PyramidFlowNet<float> net({2, 16}, rng);
  auto a = nn::constant(textured(32, 32));
  auto b = nn::constant(textured(32, 32, 0.5));
  nn::NoGradGuard ng;
  auto flow = net.estimate(a, b);
  CHECK(flow->val.dims() == std::vector<int>{2, 32, 32});
  for (size_t i = 0; i < flow->val.size(); ++i) CHECK(flow->val[i] == 0.0f);
}

TEST_CASE("pyramid net is deterministic and trainable toward a known shift") {
  Rng rng(4);
  PyramidFlowNet<float> net({2, 16}, rng);
  auto params = net.named_params("flow");
  CHECK(params.size() == 12);  // 2 levels x 3 convs x (w, b)

  auto base = textured(32, 32);
  auto moved = shift_x(base, 2);
  auto a = nn::constant(base), b = nn::constant(moved);

  nn::AdamW<float> opt(params, {.lr = 3e-3});
  float first_loss = 0, last_loss = 0;
  for (int it = 0; it < 250; ++it) {
    opt.zero_grad();
    auto flow = net.estimate(a, b);
    auto warped = nn::warp_bilinear(b, flow);
    auto loss = nn::mse(warped, a);
    if (it == 0) first_loss = loss->val[0];
    last_loss = loss->val[0];
    nn::backward(loss);
    opt.step();
  }
  CHECK(last_loss < first_loss * 0.5);  // photometric loss halves quickly

  nn::NoGradGuard ng;
  auto f1 = net.estimate(a, b);
  auto f2 = net.estimate(a, b);
  CHECK(bit_equal(f1->val, f2->val));

  // endpoint error vs the known (2,0) shift after the training smoke; the
  // frame border is excluded (warping there is clamped)
  double epe = 0;
  int n = 0;
  for (int y = 4; y < 28; ++y)
    for (int x = 4; x < 28; ++x) {
      double dx = f1->val.at(0, y, x) - 2.0, dy = f1->val.at(1, y, x);
      epe += std::sqrt(dx * dx + dy * dy);
      ++n;
    }
  CHECK(epe / n < 1.0);
}
