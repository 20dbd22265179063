// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "lmvc/model/codec.hpp"

using namespace lmvc;
using nn::Var;

namespace {
Tensor<float> randn(std::vector<int> dims, Rng& rng, double s = 1.0) {
  Tensor<float> t(std::move(dims));
  for (size_t i = 0; i < t.size(); ++i) t[i] = float(rng.normal(0, s));
  return t;
}
}  // namespace

TEST_CASE("mining: zero motion warps are the identity; scales and dims check out") {
  Rng rng(1);
  CodecConfig cfg = CodecConfig::micro();
  ContextCodec<float> cc(cfg, false, false, rng);
  const int H = 32, W = 32;
  auto ff = nn::constant(randn({cfg.feat_ch, H, W}, rng));
  auto fb = nn::constant(randn({cfg.feat_ch, H, W}, rng));
  auto zero = nn::zeros_like_shape<float>(2, H, W);
  nn::NoGradGuard ng;
  auto ctx = cc.mine_temporal_contexts(ff, fb, zero, zero);
  CHECK(ctx.fwd[0]->val.dims() == std::vector<int>{cfg.feat_ch, H, W});
  CHECK(ctx.fwd[1]->val.dims() == std::vector<int>{cfg.feat_ch, H / 2, W / 2});
  CHECK(ctx.fwd[2]->val.dims() == std::vector<int>{cfg.feat_ch, H / 4, W / 4});

  // warp with zero motion is the identity, so mining zero-motion equals
  // refining the unwarped pyramid directly
  auto warped = nn::warp_bilinear(ff, zero);
  CHECK(bit_equal(warped->val, ff->val));
}

TEST_CASE("constant motion (8,0) at full scale implies (4,0) at half scale") {
  // downscaled motion is the pooled field divided by the scale factor
  Tensor<float> v({2, 8, 8});
  for (int y = 0; y < 8; ++y)
    for (int x = 0; x < 8; ++x) v.at(0, y, x) = 8.0f;
  auto half = nn::scale(nn::avgpool2(nn::constant(v)), 0.5f);
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      CHECK(half->val.at(0, y, x) == 4.0f);
      CHECK(half->val.at(1, y, x) == 0.0f);
    }
}

TEST_CASE("warp correctness against the direct bilinear oracle on random fields") {
  Rng rng(2);
  Tensor<float> feat = randn({3, 12, 11}, rng);
  Tensor<float> flow({2, 12, 11});
  for (size_t i = 0; i < flow.size(); ++i) flow[i] = float(rng.uniform(-2.0, 2.0));
  auto out = nn::warp_bilinear(nn::constant(feat), nn::constant(flow));
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 12; ++y)
      for (int x = 0; x < 11; ++x) {
        double sx = std::clamp(double(x) + flow.at(0, y, x), 0.0, 10.0);
        double sy = std::clamp(double(y) + flow.at(1, y, x), 0.0, 11.0);
        int x0 = int(std::floor(sx)), y0 = int(std::floor(sy));
        int x1 = std::min(x0 + 1, 10), y1 = std::min(y0 + 1, 11);
        double ax = sx - x0, ay = sy - y0;
        double ref = (1 - ay) * ((1 - ax) * feat.at(c, y0, x0) + ax * feat.at(c, y0, x1)) +
                     ay * ((1 - ax) * feat.at(c, y1, x0) + ax * feat.at(c, y1, x1));
        CHECK(double(out->val.at(c, y, x)) == doctest::Approx(ref).epsilon(1e-5));
      }
}

TEST_CASE("predict_iv_context: resolution preserved, zero under zero init, footprint") {
  Rng rng(3);
  CodecConfig cfg = CodecConfig::micro();
  ContextCodec<float> cc(cfg, true, true, rng);
  const int h = 8, w = 8;
  nn::NoGradGuard ng;
  auto f8 = nn::constant(randn({cfg.feat_ch, h, w}, rng));
  auto ctx = cc.predict_iv_context(f8);
  CHECK(ctx->val.dims() == std::vector<int>{cfg.feat_ch, h, w});

  // zero input through zeroed extractor -> zero context
  nn::ParamList<float> ps = cc.iv_context_params("c");
  for (auto& p : ps) p.var->val.fill(0.0f);
  auto zero = nn::zeros_like_shape<float>(cfg.feat_ch, h, w);
  CHECK(cc.predict_iv_context(zero)->val.abs_max() == 0.0);

  // impulse response support: two 3x3 convs -> at most a 5x5 footprint
  ContextCodec<float> cc2(cfg, true, true, rng);
  Tensor<float> impulse({cfg.feat_ch, h, w});
  impulse.at(0, 4, 4) = 1.0f;
  auto r0 = cc2.predict_iv_context(nn::zeros_like_shape<float>(cfg.feat_ch, h, w));
  auto r1 = cc2.predict_iv_context(nn::constant(impulse));
  for (int c = 0; c < cfg.feat_ch; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        bool inside = std::abs(y - 4) <= 2 && std::abs(x - 4) <= 2;
        if (!inside)
          CHECK(r1->val.at(c, y, x) == r0->val.at(c, y, x));
      }

  // extractor absent -> usage error; missing record -> pipeline error
  ContextCodec<float> cc3(cfg, false, false, rng);
  CHECK_THROWS_AS(cc3.predict_iv_context(f8), UsageError);
  CHECK_THROWS_AS(cc2.predict_iv_context(Var<float>{}), PipelineError);
}

TEST_CASE("contextual encoder/decoder: latent dims, decoder taps, iv mismatch") {
  Rng rng(4);
  CodecConfig cfg = CodecConfig::micro();
  const int H = 64, W = 64;
  nn::NoGradGuard ng;

  for (bool use_iv : {false, true}) {
    ContextCodec<float> cc(cfg, use_iv, use_iv, rng);
    auto ff = nn::constant(randn({cfg.feat_ch, H, W}, rng));
    auto fb = nn::constant(randn({cfg.feat_ch, H, W}, rng));
    auto vf = nn::constant(randn({2, H, W}, rng));
    auto vb = nn::constant(randn({2, H, W}, rng));
    auto ctx = cc.mine_temporal_contexts(ff, fb, vf, vb);
    if (use_iv)
      ctx.inter_view = nn::constant(randn({cfg.feat_ch, H / 8, W / 8}, rng));

    auto x = nn::constant(randn({3, H, W}, rng, 0.2));
    auto y = cc.encode(x, ctx);
    CHECK(y->val.dims() == std::vector<int>{cfg.content_latent_ch, H / 16, W / 16});

    auto dec = cc.decode(y, ctx);
    CHECK(dec.frame->val.dims() == std::vector<int>{3, H, W});
    CHECK(dec.feat_eighth->val.dims() == std::vector<int>{cfg.feat_ch, H / 8, W / 8});
    CHECK(dec.feat_full->val.dims() == std::vector<int>{cfg.feat_ch, H, W});
    for (size_t i = 0; i < dec.frame->val.size(); ++i) {
      CHECK(dec.frame->val[i] >= 0.0f);
      CHECK(dec.frame->val[i] <= 1.0f);
    }

    // context/case mismatch raises
    auto wrong = ctx;
    wrong.inter_view = use_iv ? Var<float>{} : nn::constant(randn({cfg.feat_ch, 8, 8}, rng));
    CHECK_THROWS_AS(cc.encode(x, wrong), UsageError);
  }
}

TEST_CASE("temporal/iv context priors produce latent-shaped slots") {
  Rng rng(5);
  CodecConfig cfg = CodecConfig::micro();
  const int H = 64, W = 64;
  nn::NoGradGuard ng;
  TemporalContextPrior<float> tp(cfg, rng);
  auto c2f = nn::constant(randn({cfg.feat_ch, H / 4, W / 4}, rng));
  auto c2b = nn::constant(randn({cfg.feat_ch, H / 4, W / 4}, rng));
  auto yf = nn::constant(randn({cfg.content_latent_ch, H / 16, W / 16}, rng));
  auto yb = nn::constant(randn({cfg.content_latent_ch, H / 16, W / 16}, rng));
  auto slot = tp(c2f, c2b, yf, yb);
  CHECK(slot->val.dims() == std::vector<int>{3 * cfg.content_latent_ch, H / 16, W / 16});

  InterViewContextPrior<float> ivp(cfg, rng);
  auto ivctx = nn::constant(randn({cfg.feat_ch, H / 8, W / 8}, rng));
  auto y0 = nn::constant(randn({cfg.content_latent_ch, H / 16, W / 16}, rng));
  auto cy = ivp.context_feature(ivctx);
  CHECK(cy->val.dims() == std::vector<int>{cfg.content_latent_ch, H / 16, W / 16});
  auto ce = ivp(ivctx, y0);
  CHECK(ce->val.dims() == std::vector<int>{2 * cfg.content_latent_ch, H / 16, W / 16});
}
