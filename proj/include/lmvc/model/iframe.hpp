// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/model/entropy.hpp"

namespace lmvc {

// Standalone learned image codec: analysis/synthesis transforms with a
// factorized-and-hyper prior (single-shot entropy model, no spatial
// conditioning). Shared by all views for intra frames. The synthesis path
// exports the eighth-scale decoded feature so intra pocs still populate the
// inter-view record, plus the full-scale feature used as temporal reference.
template <typename S>
class IFrameCodec : public nn::Module<S> {
 public:
  IFrameCodec() = default;
  IFrameCodec(const CodecConfig& cfg, Rng& rng) {
    const int cf = cfg.feat_ch, cy = cfg.content_latent_ch;
    enc0_ = nn::Conv2d<S>(3, cf, 3, 2, rng);
    enc0b_ = nn::DepthBlock<S>(cf, rng);
    enc1_ = nn::Conv2d<S>(cf, cf, 3, 2, rng);
    enc1b_ = nn::DepthBlock<S>(cf, rng);
    enc2_ = nn::Conv2d<S>(cf, cf, 3, 2, rng);
    enc3_ = nn::Conv2d<S>(cf, cy, 3, 2, rng);

    typename LatentCodec<S>::Spec spec;
    spec.latent_ch = cy;
    spec.hyper_ch = cfg.hyper_ch;
    spec.fuse_ch = cfg.prior_ch;
    spec.temporal_ch = 0;
    spec.iv_ch = 0;
    spec.spatial_steps = 1;  // hyper prior only
    spec.bound = cfg.symbol_bound;
    spec.sigma_min = cfg.sigma_min;
    spec.sigma_max = cfg.sigma_max;
    spec.num_rates = cfg.num_rates();
    spec.q_init = cfg.q_init;
    latent_ = LatentCodec<S>(spec, rng);

    dec0_ = nn::UpConv<S>(cy, cf, rng);
    dec0b_ = nn::DepthBlock<S>(cf, rng);
    dec1_ = nn::UpConv<S>(cf, cf, rng);
    dec2_ = nn::UpSep<S>(cf, cf, rng);
    dec3_ = nn::UpSep<S>(cf, cf, rng);
    dec3b_ = nn::DepthBlock<S>(cf, rng);
    recon_ = nn::Conv2d<S>(cf, 3, 3, 1, rng);
  }

  struct Synthesized {
    Var<S> frame;
    Var<S> feat_eighth;
    Var<S> feat_full;
  };

  Var<S> analyze(const Var<S>& x) const {
    auto h = enc0b_(nn::leaky_relu(enc0_(x)));
    h = enc1b_(nn::leaky_relu(enc1_(h)));
    h = nn::leaky_relu(enc2_(h));
    return enc3_(h);
  }

  Synthesized synthesize(const Var<S>& latent) const {
    Synthesized s;
    auto h = dec0b_(nn::leaky_relu(dec0_(latent)));
    s.feat_eighth = h;
    h = nn::leaky_relu(dec1_(h));
    h = nn::leaky_relu(dec2_(h));
    h = dec3b_(nn::leaky_relu(dec3_(h)));
    s.feat_full = h;
    s.frame = nn::clamp(recon_(h), S(0), S(1));
    return s;
  }

  // ---- training ----
  struct TrainOut {
    Synthesized out;
    Var<S> latent;  // decoded latent
    Var<S> bits;
  };
  TrainOut train_code(const Var<S>& x, int rate, QuantMode mode, Rng& rng) const {
    auto y = analyze(x);
    auto coded = latent_.train_code(y, {}, {}, rate, mode, rng);
    return {synthesize(coded.decoded), coded.decoded, coded.bits};
  }

  // ---- real coding ----
  struct CodedFrame {
    Synthesized out;
    Var<S> latent;
    std::vector<uint8_t> hyper_bytes, main_bytes;
    double model_bits = 0.0;
  };
  CodedFrame encode_real(const Var<S>& x, int rate) const {
    nn::NoGradGuard ng;
    auto y = analyze(x);
    auto coded = latent_.encode(y->val, nullptr, nullptr, rate);
    CodedFrame cf;
    cf.latent = nn::constant(coded.decoded);
    cf.out = synthesize(cf.latent);
    cf.hyper_bytes = std::move(coded.hyper_bytes);
    cf.main_bytes = std::move(coded.main_bytes);
    cf.model_bits = coded.model_bits_main + coded.model_bits_hyper;
    return cf;
  }

  CodedFrame decode_real(const std::vector<uint8_t>& hyper_bytes,
                         const std::vector<uint8_t>& main_bytes, int rate, int height,
                         int width) const {
    nn::NoGradGuard ng;
    auto coded = latent_.decode(hyper_bytes, main_bytes, nullptr, nullptr, rate,
                                height / 16, width / 16);
    CodedFrame cf;
    cf.latent = nn::constant(coded.decoded);
    cf.out = synthesize(cf.latent);
    return cf;
  }

  const LatentCodec<S>& latent_codec() const { return latent_; }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    enc0_.collect(prefix + ".e0", out);
    enc0b_.collect(prefix + ".e0b", out);
    enc1_.collect(prefix + ".e1", out);
    enc1b_.collect(prefix + ".e1b", out);
    enc2_.collect(prefix + ".e2", out);
    enc3_.collect(prefix + ".e3", out);
    latent_.collect(prefix + ".lat", out);
    dec0_.collect(prefix + ".d0", out);
    dec0b_.collect(prefix + ".d0b", out);
    dec1_.collect(prefix + ".d1", out);
    dec2_.collect(prefix + ".d2", out);
    dec3_.collect(prefix + ".d3", out);
    dec3b_.collect(prefix + ".d3b", out);
    recon_.collect(prefix + ".rc", out);
  }

 private:
  nn::Conv2d<S> enc0_, enc1_, enc2_, enc3_;
  nn::DepthBlock<S> enc0b_, enc1b_;
  LatentCodec<S> latent_;
  nn::UpConv<S> dec0_, dec1_;
  nn::UpSep<S> dec2_, dec3_;
  nn::DepthBlock<S> dec0b_, dec3b_;
  nn::Conv2d<S> recon_;
};

}  // namespace lmvc
