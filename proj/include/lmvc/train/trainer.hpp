// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/train/checkpoint.hpp"
#include "lmvc/train/data.hpp"
#include "lmvc/train/loss.hpp"

namespace lmvc {

// Cascaded training. The independent-view codec (intra codec, temporal-only
// B codec, flow net) is pre-trained first; dependent-view training then runs
// with those parameters frozen — structurally: they are never handed to the
// optimizer, and their requires_grad flags stay off.

enum class TrainTarget : uint8_t { independent, dependent };

// What each curriculum stage trains and optimizes.
struct StagePlan {
  bool train_iframe = false;
  bool train_motion_path = false;
  bool train_context_path = false;
  bool motion_loss_only = false;  // warped-frame distortion + motion rate
  int unroll_levels = 1;          // dyadic levels per clip sample
};

inline StagePlan training_schedule(TrainTarget target, int stage) {
  StagePlan p;
  switch (stage) {
    case 0:  // intra codec pre-training (independent target only)
      LMVC_REQUIRE(target == TrainTarget::independent, ConfigError,
                   "stage 0 applies to the independent target");
      p.train_iframe = true;
      p.unroll_levels = 0;
      return p;
    case 1:
      p.train_motion_path = true;
      p.motion_loss_only = true;
      return p;
    case 2:
      p.train_context_path = true;
      return p;
    case 3:
      p.train_motion_path = true;
      p.train_context_path = true;
      p.unroll_levels = 2;
      return p;
    default:
      throw ConfigError("stage must be in {0,1,2,3}");
  }
}

struct TrainConfig {
  TrainTarget target = TrainTarget::dependent;
  int stage = 3;
  int steps = 100;
  uint64_t seed = 0;
  double lr = 1e-4;
  int batch_size = 8;  // gradient accumulation over clips
  int crop = 256;      // multiple of 64
  double clip_norm = 1.0;
  int rate_index = -1;  // -1: sampled uniformly per step
  int views = 2;        // synthesized views for the dependent target
  bool train_q_steps = true;  // off: keep the rate-point vectors fixed
  SynthesisBounds bounds{};
};

struct TrainStats {
  int64_t step = 0;
  int rate_index = 0;
  std::vector<LossBreakdown> units;  // one entry per trained unit per clip
  LossBreakdown mean;
  double grad_norm = 0.0;
  bool aborted = false;
  std::string abort_unit;
};

template <typename S>
class Trainer {
 public:
  Trainer(LmvcModel<S>& model, const ClipSource& source, TrainConfig cfg)
      : model_(model), source_(source), cfg_(cfg), rng_(cfg.seed ^ 0x7261696Eull) {
    LMVC_REQUIRE(cfg.crop % 64 == 0 && cfg.crop >= 64, ConfigError,
                 "crop must be a positive multiple of 64");
    plan_ = training_schedule(cfg.target, cfg.stage);

    nn::ParamList<S> trainable;
    if (cfg.target == TrainTarget::independent) {
      if (plan_.train_iframe)
        model.iframe().collect("i", trainable);
      if (plan_.train_motion_path) {
        for (auto& p : model.view0().motion_path_params("v0")) trainable.push_back(p);
        model.flow().collect("flow", trainable);
      }
      if (plan_.train_context_path)
        for (auto& p : model.view0().context_path_params("v0")) trainable.push_back(p);
    } else {
      if (plan_.train_motion_path)
        for (auto& p : model.dependent().motion_path_params("dep")) trainable.push_back(p);
      if (plan_.train_context_path)
        for (auto& p : model.dependent().context_path_params("dep")) trainable.push_back(p);
    }
    if (!cfg.train_q_steps) {
      nn::ParamList<S> kept;
      for (auto& p : trainable) {
        const std::string& n = p.name;
        bool is_q = n.size() > 3 && n[n.size() - 2] == 'q' && n[n.size() - 3] == '.' &&
                    std::isdigit(static_cast<unsigned char>(n.back()));
        if (!is_q) kept.push_back(p);
      }
      trainable = std::move(kept);
    }
    LMVC_REQUIRE(!trainable.empty(), ConfigError, "nothing to train for this stage");

    for (auto& p : model.named_params()) p.var->requires_grad = false;
    for (auto& p : trainable) p.var->requires_grad = true;

    typename nn::AdamW<S>::Config oc;
    oc.lr = cfg.lr;
    opt_ = nn::AdamW<S>(std::move(trainable), oc);
  }

  nn::AdamW<S>& optimizer() { return opt_; }
  const StagePlan& plan() const { return plan_; }

  TrainStats step() {
    TrainStats stats;
    stats.step = opt_.step_count() + 1;
    int rate = cfg_.rate_index >= 0 ? cfg_.rate_index
                                    : int(rng_.below(uint64_t(model_.config().num_rates())));
    stats.rate_index = rate;
    RatePoint rp = RatePoint::at(model_.config(), rate);

    opt_.zero_grad();
    double norm_scale = 1.0 / double(cfg_.batch_size);
    for (int b = 0; b < cfg_.batch_size; ++b) {
      auto loss = clip_loss(rp, stats);
      if (stats.aborted || !std::isfinite(double(loss->val[0]))) {
        stats.aborted = true;
        opt_.zero_grad();
        return stats;  // step aborted; parameters untouched
      }
      nn::backward(nn::scale(loss, S(norm_scale)));
    }
    stats.grad_norm = opt_.clip_grad_norm(cfg_.clip_norm);
    opt_.step();

    if (!stats.units.empty()) {
      LossBreakdown m;
      for (const auto& u : stats.units) {
        m.distortion += u.distortion;
        m.bits_motion += u.bits_motion;
        m.bits_content += u.bits_content;
        m.weight += u.weight;
      }
      double inv = 1.0 / double(stats.units.size());
      stats.mean = LossBreakdown::make(m.distortion * inv, m.bits_motion * inv,
                                       m.bits_content * inv, m.weight * inv,
                                       rp.lambda_value);
    }
    return stats;
  }

 private:
  // Builds the loss graph for one clip sample and logs per-unit breakdowns.
  Var<S> clip_loss(const RatePoint& rp, TrainStats& stats) {
    const int crop = cfg_.crop;
    const double rnorm = rate_norm_constant(crop, crop);
    QuantMode qm = model_.config().quant_mode;

    if (plan_.unroll_levels == 0) {  // intra stage: single frames
      auto clip = ClipSource::random_crop(source_.draw(rng_), crop, rng_);
      auto x = nn::constant(clip[0].rgb.template cast<S>());
      auto out = model_.iframe().train_code(x, rp.lambda_index, qm, rng_);
      auto d = nn::mse(out.out.frame, x);
      auto loss = nn::add(nn::scale(d, S(rp.lambda_value)),
                          nn::scale(out.bits, S(rnorm)));
      LossBreakdown lb = LossBreakdown::make(double(d->val[0]), 0.0,
                                             double(out.bits->val[0]) * rnorm, 1.0,
                                             rp.lambda_value);
      stats.units.push_back(lb);
      if (!std::isfinite(lb.total)) {
        stats.aborted = true;
        stats.abort_unit = "intra frame";
      }
      return loss;
    }

    // dyadic sample: intra period 2^levels, 2^levels + 1 frames
    SchedulerConfig scfg;
    scfg.intra_period = 1 << plan_.unroll_levels;
    scfg.num_frames = scfg.intra_period + 1;
    scfg.layer_weights = model_.config().layer_weights;
    scfg.iframe_weight = model_.config().iframe_weight;
    const bool dep = cfg_.target == TrainTarget::dependent;
    scfg.view_order = dep ? std::vector<int>{0, 1} : std::vector<int>{0};

    auto single = ClipSource::random_crop(source_.draw(rng_), crop, rng_);
    LMVC_REQUIRE(int(single.size()) >= scfg.num_frames, UsageError,
                 "clip source too short for the unroll depth");
    single.resize(size_t(scfg.num_frames));
    FrameArray views;
    if (dep) {
      // synthesize the configured view count, then train against one randomly
      // chosen dependent view so both transform kinds are visited
      auto clip = synthesize_clip(single, std::max(2, cfg_.views), rng_.next_u64(),
                                  cfg_.bounds);
      size_t pick = 1 + rng_.below(uint64_t(clip.num_views() - 1));
      views.frames.push_back(std::move(clip.views.frames[0]));
      views.frames.push_back(std::move(clip.views.frames[pick]));
    } else {
      views.frames.push_back(std::move(single));
    }

    auto schedule = build_schedule(scfg);
    std::map<std::pair<int, int>, RefState<S>> refs;
    std::map<int, IvRecord<S>> ivrs;
    Var<S> total;
    const bool flow_grad = cfg_.target == TrainTarget::independent &&
                           plan_.train_motion_path &&
                           model_.config().flow_backend == FlowBackend::pyramid_net;

    for (const auto& u : schedule) {
      auto x = nn::constant(
          views.frames[size_t(u.view_id)][size_t(u.poc)].rgb.template cast<S>());
      const bool trainable_unit = dep ? (u.view_id == 1 && !u.is_intra())
                                      : !u.is_intra();
      if (u.is_intra()) {
        nn::NoGradGuard ng;
        auto out = model_.iframe().train_code(x, rp.lambda_index, qm, rng_);
        refs[{u.view_id, u.poc}] =
            RefState<S>{out.out.frame, out.out.feat_full, out.latent, std::nullopt, true};
        if (u.view_id == 0) {
          IvRecord<S> rec;
          rec.feat_eighth = out.out.feat_eighth;
          rec.content_latent = out.latent;
          ivrs[u.poc] = std::move(rec);
        }
        continue;
      }

      const RefState<S>& rf = refs.at({u.view_id, *u.fwd_ref_poc});
      const RefState<S>& rb = refs.at({u.view_id, *u.bwd_ref_poc});
      const IvRecord<S>* ivr = nullptr;
      if (u.view_id != 0) ivr = &ivrs.at(u.poc);
      auto& codec = model_.codec_for_view(u.view_id);
      const bool run_ctx = !plan_.motion_loss_only || !trainable_unit;

      typename BFrameCodec<S>::TrainOut out;
      if (trainable_unit) {
        out = codec.train_code(x, rf, rb, ref_kind_case(u), ivr, rp.lambda_index,
                               model_.flow(), qm, rng_, flow_grad,
                               /*run_context=*/run_ctx);
      } else {
        nn::NoGradGuard ng;
        out = codec.train_code(x, rf, rb, ref_kind_case(u), ivr, rp.lambda_index,
                               model_.flow(), QuantMode::ste, rng_, false, true);
      }

      if (u.view_id == 0) {
        IvRecord<S> rec;
        rec.motion_feats = out.outs.motion_feats;
        rec.v_fwd = out.outs.v_fwd;
        rec.v_bwd = out.outs.v_bwd;
        rec.motion_latent = out.outs.motion_latent;
        rec.feat_eighth = out.outs.feat_eighth;
        rec.content_latent = out.outs.content_latent;
        ivrs[u.poc] = std::move(rec);
      }
      if (run_ctx)
        refs[{u.view_id, u.poc}] = RefState<S>{out.outs.recon, out.outs.feat_full,
                                               out.outs.content_latent,
                                               out.outs.motion_feats, false};

      if (!trainable_unit) continue;

      Var<S> d;
      Var<S> unit_loss;
      double ry_logged = 0.0;
      if (plan_.motion_loss_only) {
        d = nn::mse(out.warped_pred, x);
        unit_loss = nn::add(nn::scale(d, S(u.loss_weight * rp.lambda_value)),
                            nn::scale(out.bits_motion, S(rnorm)));
      } else {
        d = nn::mse(out.outs.recon, x);
        auto rate_term =
            nn::scale(nn::add(out.bits_motion, out.bits_content), S(rnorm));
        unit_loss = nn::add(nn::scale(d, S(u.loss_weight * rp.lambda_value)), rate_term);
        ry_logged = double(out.bits_content->val[0]) * rnorm;
      }
      stats.units.push_back(LossBreakdown::make(
          double(d->val[0]), double(out.bits_motion->val[0]) * rnorm, ry_logged,
          u.loss_weight, rp.lambda_value));
      if (!std::isfinite(double(unit_loss->val[0])) && !stats.aborted) {
        stats.aborted = true;
        stats.abort_unit =
            "view=" + std::to_string(u.view_id) + " poc=" + std::to_string(u.poc);
      }
      total = total ? nn::add(total, unit_loss) : unit_loss;
    }
    LMVC_REQUIRE(bool(total), PipelineError, "no trainable units in sample");
    return total;
  }

  LmvcModel<S>& model_;
  const ClipSource& source_;
  TrainConfig cfg_;
  StagePlan plan_;
  Rng rng_;
  nn::AdamW<S> opt_;
};

}  // namespace lmvc
