// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <optional>

#include "lmvc/coding/symbol_coding.hpp"
#include "lmvc/core/nn.hpp"
#include "lmvc/core/optim.hpp"
#include "lmvc/model/config.hpp"

namespace lmvc {

using nn::Var;

// Latent transform coding with a hyper prior, optional temporal and
// inter-view prior slots, an interleaved-subgroup spatial context model and
// learned per-rate quantization steps.
//
// Prior slots have a fixed channel layout; a structurally absent slot is
// zero-filled so one network serves independent-view, dependent-view and
// ablated configurations alike.
//
// The scaled latent s = y * q is what gets quantized and coded; decoding
// divides by q again. Encoder and decoder run the same member functions on
// the same decoded-side inputs, which is what makes reconstructions and
// re-encoded streams bit-identical.
template <typename S>
class LatentCodec : public nn::Module<S> {
 public:
  struct Spec {
    int latent_ch = 8;
    int hyper_ch = 4;
    int fuse_ch = 8;
    int temporal_ch = 0;  // 0: no temporal slot in this codec
    int iv_ch = 0;        // 0: no inter-view slot in this codec
    int spatial_steps = 4;
    int bound = 128;
    double sigma_min = 0.11;
    double sigma_max = 64.0;
    int num_rates = 4;
    std::array<double, 4> q_init{1.0, 1.0, 1.0, 1.0};
  };

  struct TrainOut {
    Var<S> decoded;  // descaled latent for downstream decoding
    Var<S> bits;     // scalar: main + hyper rate surrogate
  };

  struct CodedOut {
    Tensor<S> decoded;
    Tensor<S> scaled;  // decoded latent before the q division
    Tensor<S> z_hat;   // decoded hyper latent
    std::vector<uint8_t> hyper_bytes;
    std::vector<uint8_t> main_bytes;
    double model_bits_main = 0.0;
    double model_bits_hyper = 0.0;
  };

  LatentCodec() = default;
  LatentCodec(Spec spec, Rng& rng) : spec_(spec) {
    hyper_enc_ = nn::StridedExtractor<S>(spec.latent_ch, spec.hyper_ch, spec.hyper_ch, 2, rng);
    hyper_up1_ = nn::UpConv<S>(spec.hyper_ch, spec.hyper_ch, rng);
    hyper_up2_ = nn::UpConv<S>(spec.hyper_ch, spec.latent_ch, rng);
    z_loc_ = nn::make_var(Tensor<S>::zeros({spec.hyper_ch}), true);
    z_scale_raw_ = nn::make_var(Tensor<S>::zeros({spec.hyper_ch}), true);
    int fuse_in = spec.latent_ch + spec.temporal_ch + spec.iv_ch;
    fuse_a_ = nn::Conv2d<S>(fuse_in, spec.fuse_ch, 1, 1, rng);
    fuse_b_ = nn::Conv2d<S>(spec.fuse_ch, spec.fuse_ch, 3, 1, rng);
    for (int k = 0; k < spec.spatial_steps; ++k) {
      StepNet net;
      net.a = nn::Conv2d<S>(spec.fuse_ch + spec.latent_ch, spec.fuse_ch, 1, 1, rng);
      net.b = nn::Conv2d<S>(spec.fuse_ch, spec.fuse_ch, 3, 1, rng);
      net.head = nn::Conv2d<S>(spec.fuse_ch, 2 * spec.latent_ch, 1, 1, rng);
      net.head.zero_init();  // mu = 0, sigma = 1 until trained
      steps_.push_back(std::move(net));
    }
    for (int r = 0; r < spec.num_rates; ++r) {
      Tensor<S> q({spec.latent_ch});
      q.fill(S(std::log(spec.q_init[size_t(r)])));
      q_raw_.push_back(nn::make_var(std::move(q), true));
    }
    sigma_table_ = SigmaTable(spec.sigma_min, spec.sigma_max, 256, spec.bound);
  }

  const Spec& spec() const { return spec_; }

  // Zeroes the fusion weight columns that read the inter-view prior slot.
  void zero_iv_prior_columns() {
    if (spec_.iv_ch == 0) return;
    Tensor<S>& w = fuse_a_.weight->val;
    const int in_ch = w.dim(1);
    for (int k = 0; k < w.dim(0); ++k)
      for (int c = in_ch - spec_.iv_ch; c < in_ch; ++c)
        w[size_t(k) * in_ch + c] = S(0);
  }

  Var<S> q_step(int rate) const {
    LMVC_REQUIRE(rate >= 0 && rate < int(q_raw_.size()), ConfigError,
                 "rate index out of range");
    return nn::exp_(q_raw_[size_t(rate)]);
  }

  // ---- training path (differentiable rate surrogate, no coder) ----
  TrainOut train_code(const Var<S>& y, const Var<S>& temporal, const Var<S>& iv,
                      int rate, QuantMode mode, Rng& rng) const {
    auto s = nn::chan_scale(y, q_step(rate));
    const int h = s->val.height(), w = s->val.width();

    auto z = hyper_enc_(s);
    Var<S> z_q = quantize_plain(z, mode, rng);
    auto bits = nn::sum(logistic_bits(z_q, z_loc_, z_scale()));
    auto hyper_feat = hyper_up2_(nn::leaky_relu(hyper_up1_(z_q)));
    auto prior = fuse_priors(hyper_feat, temporal, iv, h, w);

    Var<S> noisy;  // one draw reused across subgroups (noise mode)
    if (mode == QuantMode::noise) {
      Tensor<S> u(s->val.dims());
      for (size_t i = 0; i < u.size(); ++i) u[i] = S(rng.uniform() - 0.5);
      noisy = nn::add(s, nn::constant(std::move(u)));
    }

    auto masks = subgroup_masks(h, w);
    Var<S> s_hat = nn::zeros_like_shape<S>(spec_.latent_ch, h, w);
    for (int k = 0; k < spec_.spatial_steps; ++k) {
      auto [mu, sigma] = step_params(k, prior, s_hat);
      Var<S> sq;
      switch (mode) {
        case QuantMode::ste:
          sq = nn::add(nn::round_ste(nn::sub(s, mu)), mu);
          break;
        case QuantMode::noise:
          sq = noisy;
          break;
        case QuantMode::none:
          sq = s;
          break;
      }
      auto mask = nn::constant(masks[size_t(k)]);
      bits = nn::add(bits, nn::sum(nn::mul(gaussian_bits(sq, mu, sigma), mask)));
      s_hat = nn::add(s_hat, nn::mul(sq, mask));
    }
    auto inv_q = nn::reciprocal(q_step(rate));
    return {nn::chan_scale(s_hat, inv_q), bits};
  }

  // ---- real coding ----
  CodedOut encode(const Tensor<S>& y, const Tensor<S>* temporal, const Tensor<S>* iv,
                  int rate) const {
    nn::NoGradGuard ng;
    CodedOut out;
    run_real(&y, temporal, iv, rate, y.height(), y.width(), nullptr, nullptr, out);
    return out;
  }

  CodedOut decode(const std::vector<uint8_t>& hyper_bytes,
                  const std::vector<uint8_t>& main_bytes, const Tensor<S>* temporal,
                  const Tensor<S>* iv, int rate, int h, int w) const {
    nn::NoGradGuard ng;
    CodedOut out;
    run_real(nullptr, temporal, iv, rate, h, w, &hyper_bytes, &main_bytes, out);
    return out;
  }

  // Replays the subgroup conditioning against a final decoded scaled latent
  // and returns the full (mu, sigma) grids. Diagnostic/test surface: step k's
  // parameters depend only on subgroups < k.
  std::pair<Tensor<S>, Tensor<S>> params_replay(const Tensor<S>& z_hat,
                                                const Tensor<S>* temporal,
                                                const Tensor<S>* iv,
                                                const Tensor<S>& s_hat_final) const {
    nn::NoGradGuard ng;
    const int h = s_hat_final.height(), w = s_hat_final.width();
    auto hyper_feat = hyper_up2_(nn::leaky_relu(hyper_up1_(nn::constant(z_hat))));
    auto prior = fuse_priors(hyper_feat, opt_const(temporal), opt_const(iv), h, w);
    auto masks = subgroup_masks(h, w);
    Tensor<S> mu_full({spec_.latent_ch, h, w}), sigma_full({spec_.latent_ch, h, w});
    Var<S> s_hat = nn::zeros_like_shape<S>(spec_.latent_ch, h, w);
    for (int k = 0; k < spec_.spatial_steps; ++k) {
      auto [mu, sigma] = step_params(k, prior, s_hat);
      const Tensor<S>& m = masks[size_t(k)];
      for (size_t i = 0; i < m.size(); ++i)
        if (m[i] != S(0)) {
          mu_full[i] = mu->val[i];
          sigma_full[i] = sigma->val[i];
        }
      s_hat = nn::add(s_hat, nn::mul(nn::constant(s_hat_final), nn::constant(m)));
    }
    return {std::move(mu_full), std::move(sigma_full)};
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    hyper_enc_.collect(prefix + ".he", out);
    hyper_up1_.collect(prefix + ".hd1", out);
    hyper_up2_.collect(prefix + ".hd2", out);
    out.push_back({prefix + ".zloc", z_loc_});
    out.push_back({prefix + ".zscale", z_scale_raw_});
    fuse_a_.collect(prefix + ".fa", out);
    fuse_b_.collect(prefix + ".fb", out);
    for (size_t k = 0; k < steps_.size(); ++k) {
      steps_[k].a.collect(prefix + ".s" + std::to_string(k) + "a", out);
      steps_[k].b.collect(prefix + ".s" + std::to_string(k) + "b", out);
      steps_[k].head.collect(prefix + ".s" + std::to_string(k) + "h", out);
    }
    for (size_t r = 0; r < q_raw_.size(); ++r)
      out.push_back({prefix + ".q" + std::to_string(r), q_raw_[size_t(r)]});
  }

  // The entropy heads (fusion + step nets): handy for targeted tests.
  nn::ParamList<S> head_params(const std::string& prefix) const {
    nn::ParamList<S> out;
    fuse_a_.collect(prefix + ".fa", out);
    fuse_b_.collect(prefix + ".fb", out);
    for (size_t k = 0; k < steps_.size(); ++k)
      steps_[k].head.collect(prefix + ".s" + std::to_string(k) + "h", out);
    return out;
  }

 private:
  struct StepNet {
    nn::Conv2d<S> a, b, head;
  };

  Var<S> z_scale() const {
    return nn::clamp(nn::exp_(z_scale_raw_), S(0.05), S(64.0));
  }

  static Var<S> opt_const(const Tensor<S>* t) {
    return t ? nn::constant(*t) : Var<S>{};
  }

  Var<S> fuse_priors(const Var<S>& hyper_feat, const Var<S>& temporal, const Var<S>& iv,
                     int h, int w) const {
    std::vector<Var<S>> slots{hyper_feat};
    if (spec_.temporal_ch > 0) {
      auto t = temporal ? temporal : nn::zeros_like_shape<S>(spec_.temporal_ch, h, w);
      LMVC_REQUIRE(t->val.channels() == spec_.temporal_ch && t->val.height() == h &&
                       t->val.width() == w,
                   UsageError, "latent codec: temporal prior dims");
      slots.push_back(t);
    }
    if (spec_.iv_ch > 0) {
      auto v = iv ? iv : nn::zeros_like_shape<S>(spec_.iv_ch, h, w);
      LMVC_REQUIRE(v->val.channels() == spec_.iv_ch && v->val.height() == h &&
                       v->val.width() == w,
                   UsageError, "latent codec: inter-view prior dims");
      slots.push_back(v);
    }
    auto x = nn::leaky_relu(fuse_a_(nn::concat_ch<S>(slots)));
    return nn::leaky_relu(fuse_b_(x));
  }

  std::pair<Var<S>, Var<S>> step_params(int k, const Var<S>& prior,
                                        const Var<S>& s_hat) const {
    const auto& net = steps_[size_t(k)];
    auto x = nn::leaky_relu(net.a(nn::concat_ch<S>({prior, s_hat})));
    x = nn::leaky_relu(net.b(x));
    auto ps = net.head(x);
    auto mu = nn::slice_ch(ps, 0, spec_.latent_ch);
    auto sigma = nn::clamp(nn::exp_(nn::slice_ch(ps, spec_.latent_ch, 2 * spec_.latent_ch)),
                           S(spec_.sigma_min), S(spec_.sigma_max));
    return {mu, sigma};
  }

  // Subgroup pattern over a 2x2 tile: (0,0), (1,1), (0,1), (1,0). A single
  // step covers every position.
  std::vector<Tensor<S>> subgroup_masks(int h, int w) const {
    static constexpr int pat[4][2] = {{0, 0}, {1, 1}, {0, 1}, {1, 0}};
    std::vector<Tensor<S>> masks;
    for (int k = 0; k < spec_.spatial_steps; ++k) {
      Tensor<S> m({spec_.latent_ch, h, w});
      for (int c = 0; c < spec_.latent_ch; ++c)
        for (int y = 0; y < h; ++y)
          for (int x = 0; x < w; ++x)
            m.at(c, y, x) = (spec_.spatial_steps == 1 ||
                             (y % 2 == pat[k][0] && x % 2 == pat[k][1]))
                                ? S(1)
                                : S(0);
      masks.push_back(std::move(m));
    }
    return masks;
  }

  Var<S> quantize_plain(const Var<S>& z, QuantMode mode, Rng& rng) const {
    switch (mode) {
      case QuantMode::ste:
        return nn::round_ste(z);
      case QuantMode::noise: {
        Tensor<S> u(z->val.dims());
        for (size_t i = 0; i < u.size(); ++i) u[i] = S(rng.uniform() - 0.5);
        return nn::add(z, nn::constant(std::move(u)));
      }
      case QuantMode::none:
        return z;
    }
    return z;
  }

  // Shared real-coding walk. Encoding consumes `y`; decoding consumes the
  // byte payloads. Everything that shapes (mu, sigma) is computed from
  // decoded-side values only, so both directions follow the same arithmetic.
  void run_real(const Tensor<S>* y, const Tensor<S>* temporal, const Tensor<S>* iv,
                int rate, int h, int w, const std::vector<uint8_t>* hyper_bytes,
                const std::vector<uint8_t>* main_bytes, CodedOut& out) const {
    const bool encoding = y != nullptr;
    const int C = spec_.latent_ch;
    const int bound = spec_.bound;
    Tensor<S> qv = q_step(rate)->val;

    // hyper substream
    Tensor<S> z_hat;
    Tensor<S> s_scaled;
    Tensor<S> zscale = z_scale()->val;
    if (encoding) {
      auto s_var = nn::chan_scale(nn::constant(*y), nn::constant(qv));
      auto z = hyper_enc_(s_var);
      Tensor<int> z_sym(z->val.dims());
      for (size_t i = 0; i < z_sym.size(); ++i) {
        int v = int(std::nearbyint(double(z->val[i])));
        z_sym[i] = std::clamp(v, -bound, bound);
      }
      RangeEncoder enc;
      encode_logistic_grid(enc, z_sym, z_loc_->val, zscale, bound);
      out.hyper_bytes = enc.finish();
      out.model_bits_hyper = logistic_grid_bits(z_sym, z_loc_->val, zscale, bound);
      z_hat = Tensor<S>(z->val.dims());
      for (size_t i = 0; i < z_hat.size(); ++i) z_hat[i] = S(z_sym[i]);
      s_scaled = s_var->val;
    } else {
      std::vector<int> zdims{spec_.hyper_ch, hyper_dim(h), hyper_dim(w)};
      RangeDecoder dec(*hyper_bytes);
      Tensor<int> z_sym = decode_logistic_grid(dec, zdims, z_loc_->val, zscale, bound);
      z_hat = Tensor<S>(zdims);
      for (size_t i = 0; i < z_hat.size(); ++i) z_hat[i] = S(z_sym[i]);
    }

    auto hyper_feat = hyper_up2_(nn::leaky_relu(hyper_up1_(nn::constant(z_hat))));
    auto prior = fuse_priors(hyper_feat, opt_const(temporal), opt_const(iv), h, w);
    auto masks = subgroup_masks(h, w);

    Tensor<S> s_hat({C, h, w});
    RangeEncoder main_enc;
    std::optional<RangeDecoder> main_dec;
    if (!encoding) main_dec.emplace(*main_bytes);
    double bits = 0.0;
    for (int k = 0; k < spec_.spatial_steps; ++k) {
      auto [mu, sigma] = step_params(k, prior, nn::constant(s_hat));
      const Tensor<S>& mask = masks[size_t(k)];
      for (int c = 0; c < C; ++c)
        for (int yy = 0; yy < h; ++yy)
          for (int xx = 0; xx < w; ++xx) {
            if (mask.at(c, yy, xx) == S(0)) continue;
            double m = double(mu->val.at(c, yy, xx));
            // sigma snapped to the table grid; symbol is mean-shifted
            int si = sigma_table().index(double(sigma->val.at(c, yy, xx)));
            const auto& cdf = sigma_table().cdf(si);
            int sym;
            if (encoding) {
              sym = int(std::nearbyint(double(s_scaled.at(c, yy, xx)) - m));
              sym = std::clamp(sym, -bound, bound);
              encode_symbol(main_enc, cdf, sym, bound);
            } else {
              sym = decode_symbol(*main_dec, cdf, bound);
            }
            bits += sigma_table().bits(sym, si);
            s_hat.at(c, yy, xx) = S(double(sym) + m);
          }
    }
    if (encoding) {
      out.main_bytes = main_enc.finish();
      out.model_bits_main = bits;
    }
    out.scaled = s_hat;
    out.z_hat = z_hat;
    out.decoded = Tensor<S>({C, h, w});
    for (int c = 0; c < C; ++c) {
      S inv = S(1) / qv[size_t(c)];
      for (int yy = 0; yy < h; ++yy)
        for (int xx = 0; xx < w; ++xx) out.decoded.at(c, yy, xx) = s_hat.at(c, yy, xx) * inv;
    }
  }

  static int hyper_dim(int d) {
    int d1 = nn::conv_out_dim(d, 3, 2, 1);
    return nn::conv_out_dim(d1, 3, 2, 1);
  }

  SigmaTable& sigma_table() const { return sigma_table_; }

  Spec spec_;
  nn::StridedExtractor<S> hyper_enc_;
  nn::UpConv<S> hyper_up1_, hyper_up2_;
  Var<S> z_loc_, z_scale_raw_;
  nn::Conv2d<S> fuse_a_, fuse_b_;
  std::vector<StepNet> steps_;
  std::vector<Var<S>> q_raw_;
  mutable SigmaTable sigma_table_;
};

}  // namespace lmvc
