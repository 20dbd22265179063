// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/flow.hpp"
#include "lmvc/model/context.hpp"
#include "lmvc/model/iframe.hpp"
#include "lmvc/model/motion.hpp"

namespace lmvc {

// Cached state of one decoded frame while it can still be referenced.
template <typename S>
struct RefState {
  Var<S> frame;      // {3,H,W}
  Var<S> feat_full;  // {C_f,H,W}
  Var<S> latent;     // content latent, decoded
  std::optional<MotionFeaturePair<S>> motion_feats;  // absent for intra frames
  bool is_intra = false;
};

// Independent-view side information for one poc. Intra pocs carry only the
// content feature and latent.
template <typename S>
struct IvRecord {
  std::optional<MotionFeaturePair<S>> motion_feats;  // (M0_f, M0_b)
  Var<S> v_fwd, v_bwd;                               // decoded view-0 motion
  Var<S> motion_latent;                              // m0_hat
  Var<S> feat_eighth;                                // F0_hat
  Var<S> content_latent;                             // y0_hat
};

struct BPayload {
  std::vector<uint8_t> motion_hyper, motion_main, ctx_hyper, ctx_main;
};

template <typename S>
struct BCodingOutputs {
  Var<S> recon;
  Var<S> feat_full, feat_eighth;
  Var<S> content_latent;
  MotionFeaturePair<S> motion_feats;
  Var<S> v_fwd, v_bwd;
  Var<S> motion_latent;
  double coded_bits_motion = 0.0;   // real coding only
  double coded_bits_content = 0.0;  // real coding only
};

// Hierarchical B-frame codec for one view class. With every inter-view flag
// off this is the temporal-only (independent view) codec; the dependent-view
// configuration layers the inter-view mechanisms on top of the same paths.
template <typename S>
class BFrameCodec : public nn::Module<S> {
 public:
  BFrameCodec() = default;
  BFrameCodec(const CodecConfig& cfg, InterViewFlags flags, Rng& rng)
      : cfg_(cfg), flags_(flags) {
    motion_ = MotionCodec<S>(cfg, flags.ivmvp, rng);
    temporal_motion_prior_ = TemporalMotionPrior<S>(cfg, rng);
    if (flags.ivmem) iv_motion_prior_ = InterViewMotionPrior<S>(cfg, rng);

    typename LatentCodec<S>::Spec mspec;
    mspec.latent_ch = cfg.motion_latent_ch;
    mspec.hyper_ch = cfg.hyper_ch;
    mspec.fuse_ch = cfg.prior_ch;
    mspec.temporal_ch = cfg.motion_latent_ch;
    mspec.iv_ch = 2 * cfg.motion_latent_ch;
    mspec.spatial_steps = 4;
    mspec.bound = cfg.symbol_bound;
    mspec.sigma_min = cfg.sigma_min;
    mspec.sigma_max = cfg.sigma_max;
    mspec.num_rates = cfg.num_rates();
    mspec.q_init = cfg.q_init;
    motion_latent_ = LatentCodec<S>(mspec, rng);

    context_ = ContextCodec<S>(cfg, flags.ivcp, flags.ivcp || flags.ivcem, rng);
    temporal_ctx_prior_ = TemporalContextPrior<S>(cfg, rng);
    if (flags.ivcem) iv_ctx_prior_ = InterViewContextPrior<S>(cfg, rng);

    typename LatentCodec<S>::Spec yspec = mspec;
    yspec.latent_ch = cfg.content_latent_ch;
    yspec.temporal_ch = 3 * cfg.content_latent_ch;
    yspec.iv_ch = 2 * cfg.content_latent_ch;
    ctx_latent_ = LatentCodec<S>(yspec, rng);

    // inter-view pathways start with zero influence; training grows them
    if (flags.ivmvp) motion_.zero_iv_input_columns();
    if (flags.ivmem) motion_latent_.zero_iv_prior_columns();
    if (flags.ivcp) context_.zero_iv_input_columns();
    if (flags.ivcem) ctx_latent_.zero_iv_prior_columns();
  }

  const InterViewFlags& flags() const { return flags_; }
  MotionCodec<S>& motion_codec() { return motion_; }
  ContextCodec<S>& context_codec() { return context_; }
  const ContextCodec<S>& context_codec() const { return context_; }
  LatentCodec<S>& motion_latent_codec() { return motion_latent_; }
  LatentCodec<S>& ctx_latent_codec() { return ctx_latent_; }
  const InterViewMotionPrior<S>& iv_motion_prior() const { return *iv_motion_prior_; }
  const InterViewContextPrior<S>& iv_ctx_prior() const { return *iv_ctx_prior_; }

  // ---- real coding ----

  std::pair<BCodingOutputs<S>, BPayload> encode_real(
      const Var<S>& x, const RefState<S>& ref_f, const RefState<S>& ref_b,
      RefKindCase kind, const IvRecord<S>* ivr, int rate,
      FlowEstimator<S>& flow) const {
    nn::NoGradGuard ng;
    check_inputs(ref_f, ref_b, kind, ivr);
    auto front = motion_front(ref_f, ref_b, flow);

    // residuals against the midpoint predictions
    auto v_fwd = flow.estimate(x, ref_f.frame);
    auto v_bwd = flow.estimate(x, ref_b.frame);
    auto r_f = nn::sub(v_fwd, front.pred_f);
    auto r_b = nn::sub(v_bwd, front.pred_b);

    auto m = motion_.encode(r_f, r_b, kind, temporal_fwd_feat(ref_f),
                            temporal_bwd_feat(ref_b), iv_feats(ivr));
    auto mprior = motion_priors(front, ivr);
    auto mcoded = motion_latent_.encode(m->val, &mprior.temporal->val,
                                        mprior.iv ? &mprior.iv->val : nullptr, rate);

    BPayload payload;
    payload.motion_hyper = std::move(mcoded.hyper_bytes);
    payload.motion_main = std::move(mcoded.main_bytes);

    auto outs = after_motion(nn::constant(mcoded.decoded), front, ref_f, ref_b, ivr,
                             rate, &x, &payload);
    outs.coded_bits_motion =
        8.0 * double(payload.motion_hyper.size() + payload.motion_main.size());
    outs.coded_bits_content =
        8.0 * double(payload.ctx_hyper.size() + payload.ctx_main.size());
    return {std::move(outs), std::move(payload)};
  }

  BCodingOutputs<S> decode_real(const BPayload& payload, const RefState<S>& ref_f,
                                const RefState<S>& ref_b, RefKindCase kind,
                                const IvRecord<S>* ivr, int rate, FlowEstimator<S>& flow,
                                int height, int width) const {
    nn::NoGradGuard ng;
    check_inputs(ref_f, ref_b, kind, ivr);
    auto front = motion_front(ref_f, ref_b, flow);
    auto mprior = motion_priors(front, ivr);
    auto mcoded = motion_latent_.decode(payload.motion_hyper, payload.motion_main,
                                        &mprior.temporal->val,
                                        mprior.iv ? &mprior.iv->val : nullptr, rate,
                                        height / 16, width / 16);
    auto outs = after_motion(nn::constant(mcoded.decoded), front, ref_f, ref_b, ivr,
                             rate, nullptr, const_cast<BPayload*>(&payload));
    outs.coded_bits_motion =
        8.0 * double(payload.motion_hyper.size() + payload.motion_main.size());
    outs.coded_bits_content =
        8.0 * double(payload.ctx_hyper.size() + payload.ctx_main.size());
    return outs;
  }

  // ---- training ----

  struct TrainOut {
    BCodingOutputs<S> outs;
    Var<S> bits_motion;   // scalar Var (bits)
    Var<S> bits_content;  // scalar Var (bits)
    Var<S> warped_pred;   // motion-compensated frame average (stage-1 loss)
  };

  TrainOut train_code(const Var<S>& x, const RefState<S>& ref_f,
                      const RefState<S>& ref_b, RefKindCase kind,
                      const IvRecord<S>* ivr, int rate, FlowEstimator<S>& flow,
                      QuantMode mode, Rng& rng, bool flow_grad = false,
                      bool run_context = true) const {
    check_inputs(ref_f, ref_b, kind, ivr);
    MotionFront front;
    Var<S> v_fwd, v_bwd;
    if (flow_grad) {
      front = motion_front(ref_f, ref_b, flow);
      v_fwd = flow.estimate(x, ref_f.frame);
      v_bwd = flow.estimate(x, ref_b.frame);
    } else {
      nn::NoGradGuard ng;
      front = motion_front(ref_f, ref_b, flow);
      front.v_bf = nn::constant(front.v_bf->val);
      front.v_fb = nn::constant(front.v_fb->val);
      front.pred_f = nn::constant(front.pred_f->val);
      front.pred_b = nn::constant(front.pred_b->val);
      Var<S> vf = flow.estimate(x, ref_f.frame);
      Var<S> vb = flow.estimate(x, ref_b.frame);
      v_fwd = nn::constant(vf->val);
      v_bwd = nn::constant(vb->val);
    }
    auto r_f = nn::sub(v_fwd, front.pred_f);
    auto r_b = nn::sub(v_bwd, front.pred_b);

    auto m = motion_.encode(r_f, r_b, kind, temporal_fwd_feat(ref_f),
                            temporal_bwd_feat(ref_b), iv_feats(ivr));
    auto mprior = motion_priors(front, ivr);
    auto mcoded = motion_latent_.train_code(m, mprior.temporal, mprior.iv, rate, mode, rng);

    auto mdec = motion_.decode(mcoded.decoded);
    TrainOut to;
    to.outs.v_fwd = nn::add(front.pred_f, mdec.r_fwd);
    to.outs.v_bwd = nn::add(front.pred_b, mdec.r_bwd);
    to.outs.motion_feats = mdec.feats;
    to.outs.motion_latent = mcoded.decoded;
    to.bits_motion = mcoded.bits;

    auto wf = nn::warp_bilinear(ref_f.frame, to.outs.v_fwd);
    auto wb = nn::warp_bilinear(ref_b.frame, to.outs.v_bwd);
    to.warped_pred = nn::scale(nn::add(wf, wb), S(0.5));

    if (!run_context) {
      to.bits_content = nn::constant(Tensor<S>::scalar(S(0)));
      return to;
    }

    auto ctx = context_.mine_temporal_contexts(ref_f.feat_full, ref_b.feat_full,
                                               to.outs.v_fwd, to.outs.v_bwd);
    Var<S> iv_ctx = compute_iv_context(ivr);
    if (flags_.ivcp) ctx.inter_view = iv_ctx;

    auto y = context_.encode(x, ctx);
    auto yprior_t = temporal_ctx_prior_(ctx.fwd[2], ctx.bwd[2], ref_f.latent, ref_b.latent);
    Var<S> yprior_iv;
    if (flags_.ivcem) yprior_iv = (*iv_ctx_prior_)(iv_ctx, ivr->content_latent);
    auto ycoded = ctx_latent_.train_code(y, yprior_t, yprior_iv, rate, mode, rng);
    to.bits_content = ycoded.bits;

    auto dec = context_.decode(ycoded.decoded, ctx);
    to.outs.recon = dec.frame;
    to.outs.feat_full = dec.feat_full;
    to.outs.feat_eighth = dec.feat_eighth;
    to.outs.content_latent = ycoded.decoded;
    return to;
  }

  // Parameter groups for the staged curriculum.
  nn::ParamList<S> motion_path_params(const std::string& prefix) const {
    nn::ParamList<S> out;
    motion_.collect(prefix + ".mc", out);
    temporal_motion_prior_.collect(prefix + ".tmp", out);
    if (iv_motion_prior_) iv_motion_prior_->collect(prefix + ".ivm", out);
    motion_latent_.collect(prefix + ".mlat", out);
    return out;
  }
  nn::ParamList<S> context_path_params(const std::string& prefix) const {
    nn::ParamList<S> out;
    context_.collect(prefix + ".cc", out);
    temporal_ctx_prior_.collect(prefix + ".tcp", out);
    if (iv_ctx_prior_) iv_ctx_prior_->collect(prefix + ".ivc", out);
    ctx_latent_.collect(prefix + ".ylat", out);
    return out;
  }

  void collect(const std::string& prefix, nn::ParamList<S>& out) const override {
    for (auto& p : motion_path_params(prefix)) out.push_back(p);
    for (auto& p : context_path_params(prefix)) out.push_back(p);
  }

 private:
  struct MotionFront {
    Var<S> v_bf, v_fb;      // cross-reference flows
    Var<S> pred_f, pred_b;  // halved predictions
  };
  struct MotionPriors {
    Var<S> temporal;
    Var<S> iv;  // null when IVMEM is off or structurally absent
  };

  void check_inputs(const RefState<S>& ref_f, const RefState<S>& ref_b,
                    RefKindCase kind, const IvRecord<S>* ivr) const {
    bool need_fwd = kind == RefKindCase::BI || kind == RefKindCase::BB;
    bool need_bwd = kind == RefKindCase::IB || kind == RefKindCase::BB;
    LMVC_REQUIRE(ref_f.motion_feats.has_value() == need_fwd &&
                     ref_b.motion_feats.has_value() == need_bwd,
                 PipelineError, "reference kind does not match cached state");
    if (flags_.any())
      LMVC_REQUIRE(ivr != nullptr && ivr->motion_feats.has_value(), PipelineError,
                   "dependent-view coding requires the inter-view record");
  }

  MotionFront motion_front(const RefState<S>& ref_f, const RefState<S>& ref_b,
                           FlowEstimator<S>& flow) const {
    MotionFront f;
    f.v_bf = flow.estimate(ref_b.frame, ref_f.frame);
    f.v_fb = flow.estimate(ref_f.frame, ref_b.frame);
    std::tie(f.pred_f, f.pred_b) = predict_motion(f.v_bf, f.v_fb);
    return f;
  }

  // Each cached reference contributes the half of its motion feature pair
  // that points toward the current frame.
  std::optional<Var<S>> temporal_fwd_feat(const RefState<S>& ref_f) const {
    if (!ref_f.motion_feats) return std::nullopt;
    return ref_f.motion_feats->bwd;
  }
  std::optional<Var<S>> temporal_bwd_feat(const RefState<S>& ref_b) const {
    if (!ref_b.motion_feats) return std::nullopt;
    return ref_b.motion_feats->fwd;
  }

  std::optional<MotionFeaturePair<S>> iv_feats(const IvRecord<S>* ivr) const {
    if (!flags_.ivmvp) return std::nullopt;
    return *ivr->motion_feats;
  }

  MotionPriors motion_priors(const MotionFront& front, const IvRecord<S>* ivr) const {
    MotionPriors p;
    p.temporal = temporal_motion_prior_(front.v_bf, front.v_fb);
    if (flags_.ivmem)
      p.iv = (*iv_motion_prior_)(ivr->v_fwd, ivr->v_bwd, ivr->motion_latent);
    return p;
  }

  Var<S> compute_iv_context(const IvRecord<S>* ivr) const {
    if (!(flags_.ivcp || flags_.ivcem)) return {};
    return context_.predict_iv_context(ivr->feat_eighth);
  }

  // Everything downstream of the decoded motion latent; shared verbatim by
  // real encode (x != null: codes the content latent) and real decode.
  BCodingOutputs<S> after_motion(const Var<S>& motion_latent, const MotionFront& front,
                                 const RefState<S>& ref_f, const RefState<S>& ref_b,
                                 const IvRecord<S>* ivr, int rate, const Var<S>* x,
                                 BPayload* payload) const {
    BCodingOutputs<S> outs;
    auto mdec = motion_.decode(motion_latent);
    outs.motion_latent = motion_latent;
    outs.motion_feats = mdec.feats;
    outs.v_fwd = nn::add(front.pred_f, mdec.r_fwd);
    outs.v_bwd = nn::add(front.pred_b, mdec.r_bwd);

    auto ctx = context_.mine_temporal_contexts(ref_f.feat_full, ref_b.feat_full,
                                               outs.v_fwd, outs.v_bwd);
    Var<S> iv_ctx = compute_iv_context(ivr);
    if (flags_.ivcp) ctx.inter_view = iv_ctx;

    auto yprior_t = temporal_ctx_prior_(ctx.fwd[2], ctx.bwd[2], ref_f.latent, ref_b.latent);
    Var<S> yprior_iv;
    if (flags_.ivcem) yprior_iv = (*iv_ctx_prior_)(iv_ctx, ivr->content_latent);

    Var<S> y_hat;
    if (x) {
      auto y = context_.encode(*x, ctx);
      auto ycoded = ctx_latent_.encode(y->val, &yprior_t->val,
                                       yprior_iv ? &yprior_iv->val : nullptr, rate);
      payload->ctx_hyper = std::move(ycoded.hyper_bytes);
      payload->ctx_main = std::move(ycoded.main_bytes);
      y_hat = nn::constant(ycoded.decoded);
    } else {
      const int h = motion_latent->val.height(), w = motion_latent->val.width();
      auto ycoded = ctx_latent_.decode(payload->ctx_hyper, payload->ctx_main,
                                       &yprior_t->val,
                                       yprior_iv ? &yprior_iv->val : nullptr, rate, h, w);
      y_hat = nn::constant(ycoded.decoded);
    }
    auto dec = context_.decode(y_hat, ctx);
    outs.recon = dec.frame;
    outs.feat_full = dec.feat_full;
    outs.feat_eighth = dec.feat_eighth;
    outs.content_latent = y_hat;
    return outs;
  }

  CodecConfig cfg_;
  InterViewFlags flags_;
  MotionCodec<S> motion_;
  TemporalMotionPrior<S> temporal_motion_prior_;
  std::optional<InterViewMotionPrior<S>> iv_motion_prior_;
  LatentCodec<S> motion_latent_;
  ContextCodec<S> context_;
  TemporalContextPrior<S> temporal_ctx_prior_;
  std::optional<InterViewContextPrior<S>> iv_ctx_prior_;
  LatentCodec<S> ctx_latent_;
};

// The whole model: shared I-frame codec, temporal-only independent-view
// codec, inter-view dependent-view codec, and the flow estimator.
template <typename S>
class LmvcModel {
 public:
  explicit LmvcModel(const CodecConfig& cfg = {}, InterViewFlags dep_flags = {},
                     uint64_t seed = 0)
      : cfg_(cfg) {
    cfg.validate();
    Rng rng(seed ^ 0x1A2B3C4D5E6F7081ull);
    iframe_ = IFrameCodec<S>(cfg, rng);
    view0_ = BFrameCodec<S>(cfg, InterViewFlags{false, false, false, false}, rng);
    dependent_ = BFrameCodec<S>(cfg, dep_flags, rng);
    if (cfg.flow_backend == FlowBackend::pyramid_net)
      flow_ = std::make_shared<PyramidFlowNet<S>>(
          PyramidFlowConfig{cfg.flow_levels, cfg.flow_ch}, rng);
    else
      flow_ = std::make_shared<BlockMatchingFlow<S>>();
  }

  const CodecConfig& config() const { return cfg_; }
  IFrameCodec<S>& iframe() { return iframe_; }
  BFrameCodec<S>& view0() { return view0_; }
  BFrameCodec<S>& dependent() { return dependent_; }
  BFrameCodec<S>& codec_for_view(int view_id) {
    return view_id == 0 ? view0_ : dependent_;
  }
  FlowEstimator<S>& flow() { return *flow_; }

  nn::ParamList<S> named_params() const {
    nn::ParamList<S> out;
    iframe_.collect("i", out);
    view0_.collect("v0", out);
    dependent_.collect("dep", out);
    flow_->collect("flow", out);
    return out;
  }

  nn::ParamList<S> independent_params() const {
    nn::ParamList<S> out;
    iframe_.collect("i", out);
    view0_.collect("v0", out);
    flow_->collect("flow", out);
    return out;
  }

  nn::ParamList<S> dependent_params() const {
    nn::ParamList<S> out;
    dependent_.collect("dep", out);
    return out;
  }

 private:
  CodecConfig cfg_;
  IFrameCodec<S> iframe_;
  BFrameCodec<S> view0_, dependent_;
  std::shared_ptr<FlowEstimator<S>> flow_;
};

}  // namespace lmvc
