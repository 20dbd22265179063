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

TEST_CASE("predict_motion halves the cross-reference fields") {
  Tensor<float> f({2, 4, 4});
  for (int y = 0; y < 4; ++y)
    for (int x = 0; x < 4; ++x) {
      f.at(0, y, x) = 6.0f;
      f.at(1, y, x) = 2.0f;
    }
  auto [pf, pb] = predict_motion(nn::constant(f), nn::constant(f));
  for (int y = 0; y < 4; ++y) {
    CHECK(pf->val.at(0, y, 1) == 3.0f);
    CHECK(pf->val.at(1, y, 2) == 1.0f);
    CHECK(pb->val.at(0, y, 0) == 3.0f);
  }
  // zero stays zero, halving twice equals quartering
  Rng rng(1);
  auto r = nn::constant(randn({2, 6, 6}, rng));
  auto [h1, _] = predict_motion(r, r);
  auto [h2, _2] = predict_motion(h1, h1);
  auto [q, _3] = predict_motion(nn::scale(r, 0.5f), nn::scale(r, 0.5f));
  CHECK(max_abs_diff(h2->val, q->val) < 1e-6);
}

TEST_CASE("fusion adaptors: shape contract, distinct params, case checks") {
  Rng rng(2);
  CodecConfig cfg = CodecConfig::micro();
  MotionCodec<float> mc(cfg, /*use_iv=*/true, rng);
  const int cm = cfg.motion_feat_ch;
  auto m_in = nn::constant(randn({cm, 8, 8}, rng));
  MotionFeaturePair<float> iv{nn::constant(randn({cm, 8, 8}, rng)),
                              nn::constant(randn({cm, 8, 8}, rng))};
  auto tf = nn::constant(randn({cm, 8, 8}, rng));
  auto tb = nn::constant(randn({cm, 8, 8}, rng));

  auto out_ii = mc.fuse_motion_features(m_in, RefKindCase::II, std::nullopt, std::nullopt, iv);
  CHECK(out_ii->val.dims() == std::vector<int>{cm, 8, 8});
  auto out_bb = mc.fuse_motion_features(m_in, RefKindCase::BB, tf, tb, iv);
  CHECK(out_bb->val.dims() == std::vector<int>{cm, 8, 8});
  auto out_ib = mc.fuse_motion_features(m_in, RefKindCase::IB, std::nullopt, tb, iv);
  auto out_bi = mc.fuse_motion_features(m_in, RefKindCase::BI, tf, std::nullopt, iv);
  CHECK(max_abs_diff(out_ib->val, out_bi->val) > 1e-6);  // distinct parameter sets

  // exactly four adaptors, each its own parameters
  auto params = mc.adaptor_params("m");
  std::set<std::string> names;
  for (auto& p : params) names.insert(p.name.substr(0, 4));
  CHECK(names == std::set<std::string>{"m.fm"});
  CHECK(params.size() == size_t(4 * 14));  // 4 cases x (reduce + 2 depth blocks, w/b each)

  // case/feature mismatch
  CHECK_THROWS_AS(
      mc.fuse_motion_features(m_in, RefKindCase::BB, tf, std::nullopt, iv), UsageError);
  CHECK_THROWS_AS(
      mc.fuse_motion_features(m_in, RefKindCase::II, tf, std::nullopt, iv), UsageError);
  CHECK_THROWS_AS(
      mc.fuse_motion_features(m_in, RefKindCase::II, std::nullopt, std::nullopt,
                              std::nullopt),
      UsageError);

  // temporal-only codec rejects inter-view features
  MotionCodec<float> mc0(cfg, /*use_iv=*/false, rng);
  CHECK_THROWS_AS(
      mc0.fuse_motion_features(m_in, RefKindCase::II, std::nullopt, std::nullopt, iv),
      UsageError);
  auto out0 = mc0.fuse_motion_features(m_in, RefKindCase::II, std::nullopt,
                                       std::nullopt, std::nullopt);
  CHECK(out0->val.dims() == std::vector<int>{cm, 8, 8});
}

TEST_CASE("motion codec: latent dims H/16 and reconstruction identity") {
  Rng rng(3);
  CodecConfig cfg = CodecConfig::micro();
  MotionCodec<float> mc(cfg, true, rng);
  const int H = 64, W = 64;
  auto r_f = nn::constant(randn({2, H, W}, rng, 0.5));
  auto r_b = nn::constant(randn({2, H, W}, rng, 0.5));
  MotionFeaturePair<float> iv{nn::constant(randn({cfg.motion_feat_ch, 32, 32}, rng)),
                              nn::constant(randn({cfg.motion_feat_ch, 32, 32}, rng))};
  nn::NoGradGuard ng;
  auto m = mc.encode(r_f, r_b, RefKindCase::II, std::nullopt, std::nullopt, iv);
  CHECK(m->val.dims() == std::vector<int>{cfg.motion_latent_ch, 4, 4});

  auto dec = mc.decode(m);
  CHECK(dec.r_fwd->val.dims() == std::vector<int>{2, H, W});
  CHECK(dec.feats.fwd->val.dims() == std::vector<int>{cfg.motion_feat_ch, 32, 32});
  CHECK(dec.feats.bwd->val.dims() == std::vector<int>{cfg.motion_feat_ch, 32, 32});

  // v_hat = prediction + decoded residual holds exactly (plain addition)
  auto pred = nn::constant(randn({2, H, W}, rng));
  auto v_hat = nn::add(pred, dec.r_fwd);
  for (size_t i = 0; i < v_hat->val.size(); ++i)
    CHECK(v_hat->val[i] == pred->val[i] + dec.r_fwd->val[i]);
}

TEST_CASE("motion decoder at zero latent with zero-ish trunk stays near zero") {
  Rng rng(4);
  CodecConfig cfg = CodecConfig::micro();
  MotionCodec<float> mc(cfg, false, rng);
  // zero all decoder parameters: decoded residuals must be exactly zero
  nn::ParamList<float> ps;
  mc.collect("m", ps);
  for (auto& p : ps)
    if (p.name.rfind("m.d", 0) == 0 || p.name.rfind("m.tap", 0) == 0)
      p.var->val.fill(0.0f);
  nn::NoGradGuard ng;
  auto zero_latent = nn::zeros_like_shape<float>(cfg.motion_latent_ch, 4, 4);
  auto dec = mc.decode(zero_latent);
  CHECK(dec.r_fwd->val.abs_max() == 0.0);
  CHECK(dec.r_bwd->val.abs_max() == 0.0);
}

TEST_CASE("inter-view motion prior matches the latent's shape (Mv || m0)") {
  Rng rng(5);
  CodecConfig cfg = CodecConfig::micro();
  InterViewMotionPrior<float> prior(cfg, rng);
  const int H = 64, W = 64;
  auto v0f = nn::constant(randn({2, H, W}, rng));
  auto v0b = nn::constant(randn({2, H, W}, rng));
  auto m0 = nn::constant(randn({cfg.motion_latent_ch, H / 16, W / 16}, rng));
  nn::NoGradGuard ng;
  auto mv = prior.motion_feature(v0f, v0b);
  CHECK(mv->val.dims() == std::vector<int>{cfg.motion_latent_ch, H / 16, W / 16});
  auto me = prior(v0f, v0b, m0);
  CHECK(me->val.dims() == std::vector<int>{2 * cfg.motion_latent_ch, H / 16, W / 16});

  // zero inputs through a zeroed extractor give a zero prior
  nn::ParamList<float> ps;
  prior.collect("p", ps);
  for (auto& p : ps) p.var->val.fill(0.0f);
  auto zf = nn::zeros_like_shape<float>(2, H, W);
  auto zm = nn::zeros_like_shape<float>(cfg.motion_latent_ch, H / 16, W / 16);
  CHECK(prior(zf, zf, zm)->val.abs_max() == 0.0);
}
