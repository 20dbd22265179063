// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cmath>
#include <map>

#include "lmvc/model/codec.hpp"
#include "lmvc/pipeline/bitstream.hpp"
#include "lmvc/video/frame.hpp"

namespace lmvc {

// Drives the schedule over the codecs: intra codec for I units, the
// temporal-only codec for view-0 B units, the inter-view codec for dependent
// B units. Reference buffers and inter-view records are evicted by last use,
// so the live set stays O(views + intra_period).

namespace pad_detail {

inline int reflect_index(int i, int n) {
  if (n == 1) return 0;
  while (i < 0 || i >= n) {
    if (i < 0) i = -i;
    if (i >= n) i = 2 * n - 2 - i;
  }
  return i;
}

}  // namespace pad_detail

// Reflection padding on the bottom/right to the next multiple of `mult`.
template <typename S>
inline Tensor<S> pad_to_multiple(const Tensor<S>& img, int mult) {
  const int c = img.channels(), h = img.height(), w = img.width();
  const int ph = (h + mult - 1) / mult * mult;
  const int pw = (w + mult - 1) / mult * mult;
  if (ph == h && pw == w) return img;
  Tensor<S> out({c, ph, pw});
  for (int ch = 0; ch < c; ++ch)
    for (int y = 0; y < ph; ++y)
      for (int x = 0; x < pw; ++x)
        out.at(ch, y, x) = img.at(ch, pad_detail::reflect_index(y, h),
                                  pad_detail::reflect_index(x, w));
  return out;
}

template <typename S>
inline Tensor<S> crop_top_left(const Tensor<S>& img, int h, int w) {
  if (img.height() == h && img.width() == w) return img;
  Tensor<S> out({img.channels(), h, w});
  for (int c = 0; c < img.channels(); ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out.at(c, y, x) = img.at(c, y, x);
  return out;
}

struct FrameStats {
  int view_id = 0;
  int poc = 0;
  char type = 'B';
  double bits_motion = 0.0;
  double bits_content = 0.0;
  double psnr = 0.0;
};

struct EncodeResult {
  std::vector<uint8_t> bitstream;
  FrameArray recon;  // cropped to original dims
  std::vector<FrameStats> stats;
  double total_payload_bits = 0.0;
  size_t max_live_refs = 0;
  size_t max_live_ivr = 0;
};

struct DecodePolicy {
  int from_poc = 0;                      // multiple of intra_period (random access)
  bool tolerate_dependent_errors = false;  // never affects view-0 output
};

template <typename S>
class SequencePipeline {
 public:
  explicit SequencePipeline(LmvcModel<S>& model) : model_(model) {}

  EncodeResult encode(const FrameArray& clip, const SchedulerConfig& scfg,
                      int rate_index) const {
    nn::NoGradGuard ng;
    LMVC_REQUIRE(clip.num_views() == scfg.num_views(), ConfigError,
                 "view count mismatch between clip and schedule");
    LMVC_REQUIRE(clip.num_frames() >= scfg.num_frames, ConfigError,
                 "clip shorter than the schedule");
    RatePoint::at(model_.config(), rate_index);

    const int oh = clip.height(), ow = clip.width();
    auto schedule = build_schedule(scfg);
    auto last_ref_use = compute_last_ref_use(schedule);
    auto last_ivr_use = compute_last_ivr_use(schedule);

    EncodeResult res;
    res.recon.frames.assign(size_t(scfg.num_views()), {});
    for (auto& v : res.recon.frames) v.resize(size_t(scfg.num_frames));

    std::map<std::pair<int, int>, RefState<S>> refs;
    std::map<int, IvRecord<S>> ivrs;
    std::vector<BitstreamPacket> packets;

    for (size_t idx = 0; idx < schedule.size(); ++idx) {
      const CodingUnit& u = schedule[idx];
      const VideoFrame& src = clip.frames[size_t(u.view_id)][size_t(u.poc)];
      auto x = nn::constant(pad_to_multiple(src.rgb.template cast<S>(), 64));

      RefState<S> state;
      FrameStats fs{u.view_id, u.poc, u.is_intra() ? 'I' : 'B', 0, 0, 0};
      if (u.is_intra()) {
        auto coded = model_.iframe().encode_real(x, rate_index);
        BitstreamPacket p{u.view_id, u.poc, PacketKind::iframe,
                          seal_payload(join_substreams(coded.main_bytes, coded.hyper_bytes))};
        fs.bits_content = 8.0 * double(p.payload.size());
        packets.push_back(std::move(p));
        state = RefState<S>{coded.out.frame, coded.out.feat_full, coded.latent,
                            std::nullopt, true};
        if (u.view_id == 0) {
          IvRecord<S> rec;
          rec.feat_eighth = coded.out.feat_eighth;
          rec.content_latent = coded.latent;
          ivrs[u.poc] = std::move(rec);
        }
      } else {
        const RefState<S>& rf = refs.at({u.view_id, *u.fwd_ref_poc});
        const RefState<S>& rb = refs.at({u.view_id, *u.bwd_ref_poc});
        const IvRecord<S>* ivr = nullptr;
        if (u.view_id != 0) {
          auto it = ivrs.find(u.poc);
          LMVC_REQUIRE(it != ivrs.end(), PipelineError,
                       "missing inter-view record for dependent unit");
          ivr = &it->second;
        }
        auto& codec = model_.codec_for_view(u.view_id);
        auto [outs, payload] = codec.encode_real(x, rf, rb, ref_kind_case(u), ivr,
                                                 rate_index, model_.flow());
        fs.bits_motion = outs.coded_bits_motion + 64.0;   // + checksums
        fs.bits_content = outs.coded_bits_content + 64.0;
        append_b_packets(packets, u, payload);
        state = RefState<S>{outs.recon, outs.feat_full, outs.content_latent,
                            outs.motion_feats, false};
        if (u.view_id == 0) {
          IvRecord<S> rec;
          rec.motion_feats = outs.motion_feats;
          rec.v_fwd = outs.v_fwd;
          rec.v_bwd = outs.v_bwd;
          rec.motion_latent = outs.motion_latent;
          rec.feat_eighth = outs.feat_eighth;
          rec.content_latent = outs.content_latent;
          ivrs[u.poc] = std::move(rec);
        }
      }

      // reconstruction + stats on original dimensions
      VideoFrame rec_frame;
      rec_frame.view_id = u.view_id;
      rec_frame.poc = u.poc;
      rec_frame.rgb = crop_top_left(state.frame->val, oh, ow).template cast<float>();
      fs.psnr = psnr_vs(src, rec_frame);
      res.recon.frames[size_t(u.view_id)][size_t(u.poc)] = std::move(rec_frame);
      res.stats.push_back(fs);

      stash_and_evict(refs, ivrs, u, std::move(state), idx, last_ref_use, last_ivr_use,
                      res.max_live_refs, res.max_live_ivr);
    }

    StreamHeader h;
    h.width = ow;
    h.height = oh;
    h.views = scfg.num_views();
    h.frames = scfg.num_frames;
    h.intra_period = scfg.intra_period;
    h.rate_index = rate_index;
    h.view_order = scfg.view_order;
    for (const auto& p : packets) res.total_payload_bits += 8.0 * double(p.payload.size());
    res.bitstream = write_stream(h, packets);
    return res;
  }

  struct DecodeResult {
    StreamHeader header;
    FrameArray recon;  // indexed [view][poc - from_poc]
  };

  DecodeResult decode(const std::vector<uint8_t>& bytes,
                      const DecodePolicy& policy = {}) const {
    nn::NoGradGuard ng;
    ParsedStream stream = parse_stream(bytes);
    const StreamHeader& h = stream.header;
    LMVC_REQUIRE(policy.from_poc == 0 || (policy.from_poc % h.intra_period == 0 &&
                                          policy.from_poc < h.frames),
                 UsageError, "from_poc must be an intra boundary inside the sequence");

    std::map<std::tuple<int, int, int>, const BitstreamPacket*> by_key;
    for (const auto& p : stream.packets)
      by_key[{p.view_id, p.poc, int(p.kind)}] = &p;

    SchedulerConfig scfg;
    scfg.intra_period = h.intra_period;
    scfg.num_frames = h.frames;
    scfg.view_order = h.view_order;
    auto schedule = build_schedule(scfg);
    auto last_ref_use = compute_last_ref_use(schedule);
    auto last_ivr_use = compute_last_ivr_use(schedule);

    const int ph = (h.height + 63) / 64 * 64;
    const int pw = (h.width + 63) / 64 * 64;

    DecodeResult res;
    res.header = h;
    res.recon.frames.assign(size_t(h.views), {});
    for (auto& v : res.recon.frames) v.resize(size_t(h.frames - policy.from_poc));

    std::map<std::pair<int, int>, RefState<S>> refs;
    std::map<int, IvRecord<S>> ivrs;
    std::vector<bool> view_dead(size_t(h.views), false);
    size_t live_refs_hwm = 0, live_ivr_hwm = 0;

    for (size_t idx = 0; idx < schedule.size(); ++idx) {
      const CodingUnit& u = schedule[idx];
      if (u.poc < policy.from_poc) continue;
      if (view_dead[size_t(u.view_id)]) continue;
      RefState<S> state;
      try {
        state = decode_unit(u, by_key, refs, ivrs, h, ph, pw);
      } catch (const DecodeError&) {
        if (policy.tolerate_dependent_errors && u.view_id != 0) {
          view_dead[size_t(u.view_id)] = true;  // view-0 output is unaffected
          continue;
        }
        throw;
      }
      VideoFrame rec;
      rec.view_id = u.view_id;
      rec.poc = u.poc;
      rec.rgb = crop_top_left(state.frame->val, h.height, h.width).template cast<float>();
      res.recon.frames[size_t(u.view_id)][size_t(u.poc - policy.from_poc)] = std::move(rec);
      stash_and_evict(refs, ivrs, u, std::move(state), idx, last_ref_use, last_ivr_use,
                      live_refs_hwm, live_ivr_hwm);
    }
    return res;
  }

 private:
  void append_b_packets(std::vector<BitstreamPacket>& packets, const CodingUnit& u,
                        const BPayload& payload) const {
    packets.push_back({u.view_id, u.poc, PacketKind::motion_hyper,
                       seal_payload(payload.motion_hyper)});
    packets.push_back({u.view_id, u.poc, PacketKind::motion_main,
                       seal_payload(payload.motion_main)});
    packets.push_back({u.view_id, u.poc, PacketKind::ctx_hyper,
                       seal_payload(payload.ctx_hyper)});
    packets.push_back({u.view_id, u.poc, PacketKind::ctx_main,
                       seal_payload(payload.ctx_main)});
  }

  RefState<S> decode_unit(const CodingUnit& u,
                          const std::map<std::tuple<int, int, int>, const BitstreamPacket*>& by_key,
                          std::map<std::pair<int, int>, RefState<S>>& refs,
                          std::map<int, IvRecord<S>>& ivrs, const StreamHeader& h,
                          int ph, int pw) const {
    auto fetch = [&](PacketKind kind) -> std::vector<uint8_t> {
      auto it = by_key.find({u.view_id, u.poc, int(kind)});
      if (it == by_key.end())
        throw DecodeError("missing packet", u.view_id, u.poc, int(kind));
      return unseal_payload(it->second->payload, u.view_id, u.poc, int(kind));
    };

    RefState<S> state;
    if (u.is_intra()) {
      auto joined = fetch(PacketKind::iframe);
      auto [main, hyper] = split_substreams(joined, u.view_id, u.poc, int(PacketKind::iframe));
      auto coded = model_.iframe().decode_real(hyper, main, h.rate_index, ph, pw);
      state = RefState<S>{coded.out.frame, coded.out.feat_full, coded.latent,
                          std::nullopt, true};
      if (u.view_id == 0) {
        IvRecord<S> rec;
        rec.feat_eighth = coded.out.feat_eighth;
        rec.content_latent = coded.latent;
        ivrs[u.poc] = std::move(rec);
      }
    } else {
      BPayload payload;
      payload.motion_hyper = fetch(PacketKind::motion_hyper);
      payload.motion_main = fetch(PacketKind::motion_main);
      payload.ctx_hyper = fetch(PacketKind::ctx_hyper);
      payload.ctx_main = fetch(PacketKind::ctx_main);
      const RefState<S>& rf = refs.at({u.view_id, *u.fwd_ref_poc});
      const RefState<S>& rb = refs.at({u.view_id, *u.bwd_ref_poc});
      const IvRecord<S>* ivr = nullptr;
      if (u.view_id != 0) {
        auto it = ivrs.find(u.poc);
        LMVC_REQUIRE(it != ivrs.end(), PipelineError,
                     "missing inter-view record for dependent unit");
        ivr = &it->second;
      }
      auto& codec = model_.codec_for_view(u.view_id);
      auto outs = codec.decode_real(payload, rf, rb, ref_kind_case(u), ivr,
                                    h.rate_index, model_.flow(), ph, pw);
      state = RefState<S>{outs.recon, outs.feat_full, outs.content_latent,
                          outs.motion_feats, false};
      if (u.view_id == 0) {
        IvRecord<S> rec;
        rec.motion_feats = outs.motion_feats;
        rec.v_fwd = outs.v_fwd;
        rec.v_bwd = outs.v_bwd;
        rec.motion_latent = outs.motion_latent;
        rec.feat_eighth = outs.feat_eighth;
        rec.content_latent = outs.content_latent;
        ivrs[u.poc] = std::move(rec);
      }
    }
    return state;
  }

  // last schedule index at which each (view, poc) serves as a temporal
  // reference, and each poc's inter-view record is read
  static std::map<std::pair<int, int>, size_t> compute_last_ref_use(
      const std::vector<CodingUnit>& schedule) {
    std::map<std::pair<int, int>, size_t> last;
    for (size_t i = 0; i < schedule.size(); ++i) {
      const auto& u = schedule[i];
      if (u.is_intra()) continue;
      last[{u.view_id, *u.fwd_ref_poc}] = i;
      last[{u.view_id, *u.bwd_ref_poc}] = i;
    }
    return last;
  }
  static std::map<int, size_t> compute_last_ivr_use(
      const std::vector<CodingUnit>& schedule) {
    std::map<int, size_t> last;
    for (size_t i = 0; i < schedule.size(); ++i)
      if (schedule[i].view_id != 0 && !schedule[i].is_intra())
        last[schedule[i].poc] = i;
    return last;
  }

  static void stash_and_evict(std::map<std::pair<int, int>, RefState<S>>& refs,
                              std::map<int, IvRecord<S>>& ivrs, const CodingUnit& u,
                              RefState<S> state, size_t idx,
                              const std::map<std::pair<int, int>, size_t>& last_ref_use,
                              const std::map<int, size_t>& last_ivr_use,
                              size_t& refs_hwm, size_t& ivr_hwm) {
    auto ref_it = last_ref_use.find({u.view_id, u.poc});
    if (ref_it != last_ref_use.end() && ref_it->second > idx)
      refs[{u.view_id, u.poc}] = std::move(state);
    refs_hwm = std::max(refs_hwm, refs.size());
    ivr_hwm = std::max(ivr_hwm, ivrs.size());
    for (auto it = refs.begin(); it != refs.end();) {
      auto lu = last_ref_use.find(it->first);
      if (lu == last_ref_use.end() || lu->second <= idx)
        it = refs.erase(it);
      else
        ++it;
    }
    for (auto it = ivrs.begin(); it != ivrs.end();) {
      auto lu = last_ivr_use.find(it->first);
      if (lu == last_ivr_use.end() || lu->second <= idx)
        it = ivrs.erase(it);
      else
        ++it;
    }
  }

  static double psnr_vs(const VideoFrame& a, const VideoFrame& b) {
    double mse = frame_mse(a, b);
    if (mse <= 0.0) return 100.0;
    return std::min(100.0, 10.0 * std::log10(1.0 / mse));
  }

  LmvcModel<S>& model_;
};

}  // namespace lmvc
