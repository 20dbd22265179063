// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/model/entropy.hpp"

namespace lmvc {

// Temporal context mining, disparity-free inter-view context prediction and
// the conditional contextual encoder-decoder.

template <typename S>
struct ContextSet {
  // per direction: full, half, quarter scale contexts
  std::array<Var<S>, 3> fwd;
  std::array<Var<S>, 3> bwd;
  Var<S> inter_view;  // eighth-scale C_t^{V0}, null unless dependent view
};

template <typename S>
class ContextCodec : public nn::Module<S> {
 public:
  ContextCodec() = default;
  // inject_iv: encoder/decoder take the inter-view context as an extra input.
  // build_extractor: construct f_c (needed when either the injection or the
  // inter-view contextual prior is active).
  ContextCodec(const CodecConfig& cfg, bool inject_iv, bool build_extractor, Rng& rng)
      : cf_(cfg.feat_ch), cy_(cfg.content_latent_ch), use_iv_(inject_iv),
        has_fc_(build_extractor) {
    const int cf = cfg.feat_ch, cy = cfg.content_latent_ch;
    pyr1_ = nn::Conv2d<S>(cf, cf, 3, 2, rng);
    pyr2_ = nn::Conv2d<S>(cf, cf, 3, 2, rng);
    refine0_ = nn::SepConv<S>(cf, cf, rng);
    refine1_ = nn::SepConv<S>(cf, cf, rng);
    refine2_ = nn::Conv2d<S>(cf, cf, 3, 1, rng);

    if (has_fc_) {
      // IVCP extractor: no downsampling anywhere on this path
      fc_a_ = nn::Conv2d<S>(cf, cf, 3, 1, rng);
      fc_b_ = nn::Conv2d<S>(cf, cf, 3, 1, rng);
    }

    enc0_ = nn::Conv2d<S>(3 + 2 * cf, cf, 3, 2, rng);
    enc0b_ = nn::DepthBlock<S>(cf, rng);
    enc1_ = nn::Conv2d<S>(cf + 2 * cf, cf, 3, 2, rng);
    enc1b_ = nn::DepthBlock<S>(cf, rng);
    enc2_ = nn::Conv2d<S>(cf + 2 * cf + (inject_iv ? cf : 0), cf, 3, 2, rng);
    enc2b_ = nn::DepthBlock<S>(cf, rng);
    enc3_ = nn::Conv2d<S>(cf, cy, 3, 2, rng);

    dec0_ = nn::UpConv<S>(cy, cf, rng);
    dec0b_ = nn::DepthBlock<S>(cf, rng);
    dec1_ = nn::UpConv<S>(cf, cf, rng);
    fuse1_ = nn::Conv2d<S>(cf + 2 * cf + (inject_iv ? cf : 0), cf, 3, 1, rng);
    dec1b_ = nn::DepthBlock<S>(cf, rng);
    dec2_ = nn::UpSep<S>(cf, cf, rng);
    fuse2_ = nn::SepConv<S>(cf + 2 * cf, cf, rng);
    dec2b_ = nn::DepthBlock<S>(cf, rng);
    dec3_ = nn::UpSep<S>(cf, cf, rng);
    fuse3_ = nn::SepConv<S>(cf + 2 * cf, cf, rng);
    dec3b_ = nn::DepthBlock<S>(cf, rng);
    recon_ = nn::Conv2d<S>(cf, 3, 3, 1, rng);
  }

  bool uses_inter_view() const { return use_iv_; }

  // Zeroes the encoder/decoder weight columns that read the injected
  // inter-view context.
  void zero_iv_input_columns() {
    if (!use_iv_) return;
    for (nn::Conv2d<S>* conv : {&enc2_, &fuse1_}) {
      Tensor<S>& w = conv->weight->val;
      const int in_ch = w.dim(1), kk = w.dim(2) * w.dim(3);
      for (int k = 0; k < w.dim(0); ++k)
        for (int c = in_ch - cf_; c < in_ch; ++c)
          for (int i = 0; i < kk; ++i)
            w[(size_t(k) * in_ch + c) * kk + i] = S(0);
    }
  }

  // Motion-compensated multi-scale mining from the two reference features.
  // Motion is downscaled with its resolution (values halved per level).
  ContextSet<S> mine_temporal_contexts(const Var<S>& feat_fwd, const Var<S>& feat_bwd,
                                       const Var<S>& v_fwd, const Var<S>& v_bwd) const {
    ContextSet<S> ctx;
    ctx.fwd = mine_one(feat_fwd, v_fwd);
    ctx.bwd = mine_one(feat_bwd, v_bwd);
    return ctx;
  }

  // C_t^{V0} = f_c(F0_hat) at eighth scale; resolution preserved.
  Var<S> predict_iv_context(const Var<S>& feat_eighth_v0) const {
    LMVC_REQUIRE(has_fc_, UsageError,
                 "predict_iv_context: codec built without the inter-view extractor");
    LMVC_REQUIRE(bool(feat_eighth_v0), PipelineError,
                 "predict_iv_context: missing independent-view record");
    return fc_b_(nn::leaky_relu(fc_a_(feat_eighth_v0)));
  }

  // frame {3,H,W} + contexts -> latent {cy, H/16, W/16} (pre-quantization)
  Var<S> encode(const Var<S>& frame, const ContextSet<S>& ctx) const {
    check_ctx(ctx);
    auto x = enc0b_(nn::leaky_relu(enc0_(nn::concat_ch<S>({frame, ctx.fwd[0], ctx.bwd[0]}))));
    x = enc1b_(nn::leaky_relu(enc1_(nn::concat_ch<S>({x, ctx.fwd[1], ctx.bwd[1]}))));
    std::vector<Var<S>> s2{x, ctx.fwd[2], ctx.bwd[2]};
    if (use_iv_) s2.push_back(nn::upsample_nearest2(ctx.inter_view));
    x = enc2b_(nn::leaky_relu(enc2_(nn::concat_ch<S>(s2))));
    return enc3_(x);
  }

  struct Decoded {
    Var<S> frame;        // clamped reconstruction {3,H,W}
    Var<S> feat_eighth;  // decoded feature at H/8 (inter-view record slot)
    Var<S> feat_full;    // full-scale feature for temporal reference
  };

  Decoded decode(const Var<S>& latent, const ContextSet<S>& ctx) const {
    check_ctx(ctx);
    Decoded d;
    auto x = dec0b_(nn::leaky_relu(dec0_(latent)));
    d.feat_eighth = x;
    x = nn::leaky_relu(dec1_(x));
    std::vector<Var<S>> s1{x, ctx.fwd[2], ctx.bwd[2]};
    if (use_iv_) s1.push_back(nn::upsample_nearest2(ctx.inter_view));
    x = dec1b_(nn::leaky_relu(fuse1_(nn::concat_ch<S>(s1))));
    x = nn::leaky_relu(dec2_(x));
    x = dec2b_(nn::leaky_relu(fuse2_(nn::concat_ch<S>({x, ctx.fwd[1], ctx.bwd[1]}))));
    x = nn::leaky_relu(dec3_(x));
    x = dec3b_(nn::leaky_relu(fuse3_(nn::concat_ch<S>({x, ctx.fwd[0], ctx.bwd[0]}))));
    d.feat_full = x;
    d.frame = nn::clamp(recon_(x), S(0), S(1));
    return d;
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    pyr1_.collect(prefix + ".p1", out);
    pyr2_.collect(prefix + ".p2", out);
    refine0_.collect(prefix + ".r0", out);
    refine1_.collect(prefix + ".r1", out);
    refine2_.collect(prefix + ".r2", out);
    if (has_fc_) {
      fc_a_.collect(prefix + ".fca", out);
      fc_b_.collect(prefix + ".fcb", out);
    }
    enc0_.collect(prefix + ".e0", out);
    enc0b_.collect(prefix + ".e0b", out);
    enc1_.collect(prefix + ".e1", out);
    enc1b_.collect(prefix + ".e1b", out);
    enc2_.collect(prefix + ".e2", out);
    enc2b_.collect(prefix + ".e2b", out);
    enc3_.collect(prefix + ".e3", out);
    dec0_.collect(prefix + ".d0", out);
    dec0b_.collect(prefix + ".d0b", out);
    dec1_.collect(prefix + ".d1", out);
    fuse1_.collect(prefix + ".f1", out);
    dec1b_.collect(prefix + ".d1b", out);
    dec2_.collect(prefix + ".d2", out);
    fuse2_.collect(prefix + ".f2", out);
    dec2b_.collect(prefix + ".d2b", out);
    dec3_.collect(prefix + ".d3", out);
    fuse3_.collect(prefix + ".f3", out);
    dec3b_.collect(prefix + ".d3b", out);
    recon_.collect(prefix + ".rc", out);
  }

  nn::ParamList<S> iv_context_params(const std::string& prefix) const {
    nn::ParamList<S> out;
    fc_a_.collect(prefix + ".fca", out);
    fc_b_.collect(prefix + ".fcb", out);
    return out;
  }

 private:
  void check_ctx(const ContextSet<S>& ctx) const {
    LMVC_REQUIRE(bool(ctx.inter_view) == use_iv_, UsageError,
                 "contextual codec: context/case mismatch (inter-view)");
    LMVC_REQUIRE(ctx.fwd[0] && ctx.bwd[0] && ctx.fwd[1] && ctx.bwd[1] && ctx.fwd[2] &&
                     ctx.bwd[2],
                 UsageError, "contextual codec: temporal contexts missing");
  }

  std::array<Var<S>, 3> mine_one(const Var<S>& feat, const Var<S>& v) const {
    auto f1 = nn::leaky_relu(pyr1_(feat));
    auto f2 = nn::leaky_relu(pyr2_(f1));
    auto v1 = nn::scale(nn::avgpool2(v), S(0.5));
    auto v2 = nn::scale(nn::avgpool2(v1), S(0.5));
    std::array<Var<S>, 3> out;
    out[0] = refine0_(nn::warp_bilinear(feat, v));
    out[1] = refine1_(nn::warp_bilinear(f1, v1));
    out[2] = refine2_(nn::warp_bilinear(f2, v2));
    return out;
  }

  int cf_ = 0, cy_ = 0;
  bool use_iv_ = false;
  bool has_fc_ = false;
  nn::Conv2d<S> pyr1_, pyr2_;
  nn::SepConv<S> refine0_, refine1_;
  nn::Conv2d<S> refine2_;
  nn::Conv2d<S> fc_a_, fc_b_;
  nn::Conv2d<S> enc0_, enc1_, enc2_, enc3_;
  nn::DepthBlock<S> enc0b_, enc1b_, enc2b_;
  nn::UpConv<S> dec0_, dec1_;
  nn::UpSep<S> dec2_, dec3_;
  nn::Conv2d<S> fuse1_;
  nn::SepConv<S> fuse2_, fuse3_;
  nn::DepthBlock<S> dec0b_, dec1b_, dec2b_, dec3b_;
  nn::Conv2d<S> recon_;
};

// Temporal context prior: quarter-scale contexts brought to latent
// resolution, concatenated with the two reference content latents.
template <typename S>
class TemporalContextPrior : public nn::Module<S> {
 public:
  TemporalContextPrior() = default;
  TemporalContextPrior(const CodecConfig& cfg, Rng& rng)
      : extract_(2 * cfg.feat_ch, cfg.prior_ch, cfg.content_latent_ch, 2, rng) {}

  Var<S> operator()(const Var<S>& ctx_f2, const Var<S>& ctx_b2, const Var<S>& latent_f,
                    const Var<S>& latent_b) const {
    auto feat = extract_(nn::concat_ch<S>({ctx_f2, ctx_b2}));
    return nn::concat_ch<S>({feat, latent_f, latent_b});
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    extract_.collect(prefix + ".ex", out);
  }

  nn::StridedExtractor<S> extract_;
};

// Inter-view context prior (f_ce): one strided conv + leaky relu maps the
// eighth-scale inter-view context onto the latent's shape, then the view-0
// content latent is appended.
template <typename S>
class InterViewContextPrior : public nn::Module<S> {
 public:
  InterViewContextPrior() = default;
  InterViewContextPrior(const CodecConfig& cfg, Rng& rng)
      : conv_(cfg.feat_ch, cfg.content_latent_ch, 3, 2, rng) {}

  Var<S> context_feature(const Var<S>& iv_context) const {
    return nn::leaky_relu(conv_(iv_context));
  }

  Var<S> operator()(const Var<S>& iv_context, const Var<S>& y0_latent) const {
    return nn::concat_ch<S>({context_feature(iv_context), y0_latent});
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    conv_.collect(prefix + ".c", out);
  }

  nn::Conv2d<S> conv_;
};

}  // namespace lmvc
