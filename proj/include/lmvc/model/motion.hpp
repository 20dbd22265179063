// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/model/entropy.hpp"
#include "lmvc/schedule.hpp"

namespace lmvc {

// Bi-directional motion-difference compression. Residuals against the halved
// cross-reference flows are encoded jointly; a case-selected fusion adaptor
// merges temporal motion-difference features of the two references and, when
// enabled, the independent view's motion-difference features at the encoder's
// half-resolution stage. The decoder reconstructs both residuals from the
// quantized latent alone and exports this frame's motion-difference feature
// pair for later temporal and inter-view use.

// Halved cross-reference flows: the midpoint predictions for (v_t->f, v_t->b).
template <typename S>
inline std::pair<Var<S>, Var<S>> predict_motion(const Var<S>& v_cross_bf,
                                                const Var<S>& v_cross_fb) {
  return {nn::scale(v_cross_bf, S(0.5)), nn::scale(v_cross_fb, S(0.5))};
}

template <typename S>
struct MotionFeaturePair {
  Var<S> fwd, bwd;  // each {C_m, H/2, W/2}
};

template <typename S>
class MotionCodec : public nn::Module<S> {
 public:
  MotionCodec() = default;
  MotionCodec(const CodecConfig& cfg, bool use_iv, Rng& rng)
      : cm_(cfg.motion_feat_ch), use_iv_(use_iv) {
    const int cm = cfg.motion_feat_ch;
    const int ml = cfg.motion_latent_ch;
    enc0_ = nn::Conv2d<S>(4, cm, 3, 2, rng);
    // adaptor input widths follow the per-case concatenation order
    static constexpr int kTemporalCount[4] = {0, 1, 1, 2};
    for (int k = 0; k < 4; ++k) {
      int in_ch = cm + kTemporalCount[k] * cm + (use_iv ? 2 * cm : 0);
      Adaptor a;
      a.reduce = nn::Conv2d<S>(in_ch, cm, 1, 1, rng);
      a.blk1 = nn::DepthBlock<S>(cm, rng);
      a.blk2 = nn::DepthBlock<S>(cm, rng);
      adaptors_[size_t(k)] = std::move(a);
    }
    enc1_ = nn::Conv2d<S>(cm, cm, 3, 2, rng);
    enc1b_ = nn::DepthBlock<S>(cm, rng);
    enc2_ = nn::Conv2d<S>(cm, cm, 3, 2, rng);
    enc3_ = nn::Conv2d<S>(cm, ml, 3, 2, rng);

    dec0_ = nn::UpConv<S>(ml, cm, rng);
    dec1_ = nn::UpConv<S>(cm, cm, rng);
    dec1b_ = nn::DepthBlock<S>(cm, rng);
    dec2_ = nn::UpSep<S>(cm, cm, rng);
    dec2b_ = nn::DepthBlock<S>(cm, rng);
    feat_tap_ = nn::Conv2d<S>(cm, 2 * cm, 1, 1, rng);
    dec3_ = nn::UpSep<S>(cm, 4, rng);
  }

  bool uses_inter_view() const { return use_iv_; }

  // Zeroes the adaptor weight columns that read the inter-view features, so
  // fusion starts at the temporal-only operating point.
  void zero_iv_input_columns() {
    if (!use_iv_) return;
    for (auto& a : adaptors_) {
      Tensor<S>& w = a.reduce.weight->val;
      const int in_ch = w.dim(1);
      for (int k = 0; k < w.dim(0); ++k)
        for (int c = in_ch - 2 * cm_; c < in_ch; ++c)
          w[(size_t(k) * in_ch + c)] = S(0);
    }
  }

  // Case-specific fusion at half resolution (adaptor f_m0..f_m3). Temporal
  // features must match the case; inter-view features must be present exactly
  // when the codec was built with them.
  Var<S> fuse_motion_features(const Var<S>& m_in, RefKindCase kind,
                              const std::optional<Var<S>>& temporal_fwd,
                              const std::optional<Var<S>>& temporal_bwd,
                              const std::optional<MotionFeaturePair<S>>& inter_view) const {
    const int k = int(kind);
    bool need_fwd = kind == RefKindCase::BI || kind == RefKindCase::BB;
    bool need_bwd = kind == RefKindCase::IB || kind == RefKindCase::BB;
    LMVC_REQUIRE(temporal_fwd.has_value() == need_fwd &&
                     temporal_bwd.has_value() == need_bwd,
                 UsageError, "fuse_motion_features: case/feature mismatch");
    LMVC_REQUIRE(inter_view.has_value() == use_iv_, UsageError,
                 "fuse_motion_features: inter-view feature mismatch");
    std::vector<Var<S>> parts{m_in};
    if (need_fwd) parts.push_back(*temporal_fwd);
    if (need_bwd) parts.push_back(*temporal_bwd);
    if (use_iv_) {
      parts.push_back(inter_view->fwd);
      parts.push_back(inter_view->bwd);
    }
    const Adaptor& a = adaptors_[size_t(k)];
    auto x = nn::leaky_relu(a.reduce(nn::concat_ch<S>(parts)));
    return a.blk2(a.blk1(x));
  }

  // residuals {2,H,W} each -> latent {ml, H/16, W/16} (pre-quantization)
  Var<S> encode(const Var<S>& r_fwd, const Var<S>& r_bwd, RefKindCase kind,
                const std::optional<Var<S>>& temporal_fwd,
                const std::optional<Var<S>>& temporal_bwd,
                const std::optional<MotionFeaturePair<S>>& inter_view) const {
    auto x = enc0_(nn::concat_ch<S>({r_fwd, r_bwd}));
    x = fuse_motion_features(x, kind, temporal_fwd, temporal_bwd, inter_view);
    x = enc1b_(nn::leaky_relu(enc1_(x)));
    x = nn::leaky_relu(enc2_(x));
    return enc3_(x);
  }

  struct Decoded {
    Var<S> r_fwd, r_bwd;             // reconstructed residuals {2,H,W}
    MotionFeaturePair<S> feats;      // this frame's motion-difference features
  };

  // Depends only on the quantized latent: the decoder side needs no access
  // to the original residuals or to fusion inputs.
  Decoded decode(const Var<S>& latent) const {
    auto x = nn::leaky_relu(dec0_(latent));
    x = dec1b_(nn::leaky_relu(dec1_(x)));
    x = dec2b_(nn::leaky_relu(dec2_(x)));  // half resolution
    auto tap = feat_tap_(x);
    auto r = dec3_(x);
    Decoded d;
    d.r_fwd = nn::slice_ch(r, 0, 2);
    d.r_bwd = nn::slice_ch(r, 2, 4);
    d.feats.fwd = nn::slice_ch(tap, 0, cm_);
    d.feats.bwd = nn::slice_ch(tap, cm_, 2 * cm_);
    return d;
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    enc0_.collect(prefix + ".e0", out);
    for (int k = 0; k < 4; ++k) {
      std::string p = prefix + ".fm" + std::to_string(k);
      adaptors_[size_t(k)].reduce.collect(p + ".r", out);
      adaptors_[size_t(k)].blk1.collect(p + ".b1", out);
      adaptors_[size_t(k)].blk2.collect(p + ".b2", out);
    }
    enc1_.collect(prefix + ".e1", out);
    enc1b_.collect(prefix + ".e1b", out);
    enc2_.collect(prefix + ".e2", out);
    enc3_.collect(prefix + ".e3", out);
    dec0_.collect(prefix + ".d0", out);
    dec1_.collect(prefix + ".d1", out);
    dec1b_.collect(prefix + ".d1b", out);
    dec2_.collect(prefix + ".d2", out);
    dec2b_.collect(prefix + ".d2b", out);
    feat_tap_.collect(prefix + ".tap", out);
    dec3_.collect(prefix + ".d3", out);
  }

  // fusion adaptor parameters only (f_m0..f_m3), for gradient coverage tests
  nn::ParamList<S> adaptor_params(const std::string& prefix) const {
    nn::ParamList<S> out;
    for (int k = 0; k < 4; ++k) {
      std::string p = prefix + ".fm" + std::to_string(k);
      adaptors_[size_t(k)].reduce.collect(p + ".r", out);
      adaptors_[size_t(k)].blk1.collect(p + ".b1", out);
      adaptors_[size_t(k)].blk2.collect(p + ".b2", out);
    }
    return out;
  }

 private:
  struct Adaptor {
    nn::Conv2d<S> reduce;
    nn::DepthBlock<S> blk1, blk2;
  };

  int cm_ = 0;
  bool use_iv_ = false;
  nn::Conv2d<S> enc0_;
  std::array<Adaptor, 4> adaptors_;
  nn::Conv2d<S> enc1_, enc2_, enc3_;
  nn::DepthBlock<S> enc1b_;
  nn::UpConv<S> dec0_, dec1_;
  nn::UpSep<S> dec2_, dec3_;
  nn::DepthBlock<S> dec1b_, dec2b_;
  nn::Conv2d<S> feat_tap_;
};

// Extracts the inter-view motion prior (f_me): view-0 decoded motion vectors
// down to latent resolution, then concatenated with the view-0 motion latent.
template <typename S>
class InterViewMotionPrior : public nn::Module<S> {
 public:
  InterViewMotionPrior() = default;
  InterViewMotionPrior(const CodecConfig& cfg, Rng& rng)
      : extract_(4, cfg.prior_ch, cfg.motion_latent_ch, 4, rng) {}

  // (v0 fwd, v0 bwd) {2,H,W} -> M_v with the latent's shape
  Var<S> motion_feature(const Var<S>& v0_fwd, const Var<S>& v0_bwd) const {
    return extract_(nn::concat_ch<S>({v0_fwd, v0_bwd}));
  }

  // M_e = M_v || m0_hat
  Var<S> operator()(const Var<S>& v0_fwd, const Var<S>& v0_bwd,
                    const Var<S>& m0_latent) const {
    return nn::concat_ch<S>({motion_feature(v0_fwd, v0_bwd), m0_latent});
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    extract_.collect(prefix + ".ex", out);
  }

  nn::StridedExtractor<S> extract_;
};

// Temporal motion prior from the cross-reference flows.
template <typename S>
class TemporalMotionPrior : public nn::Module<S> {
 public:
  TemporalMotionPrior() = default;
  TemporalMotionPrior(const CodecConfig& cfg, Rng& rng)
      : extract_(4, cfg.prior_ch, cfg.motion_latent_ch, 4, rng) {}

  Var<S> operator()(const Var<S>& v_cross_bf, const Var<S>& v_cross_fb) const {
    return extract_(nn::concat_ch<S>({v_cross_bf, v_cross_fb}));
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    extract_.collect(prefix + ".ex", out);
  }

  nn::StridedExtractor<S> extract_;
};

}  // namespace lmvc
