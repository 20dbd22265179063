// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lmvc/core/check.hpp"

namespace lmvc {

enum class FrameType : uint8_t { I, B };

// Which kinds of frames the two temporal references of a B unit are. Selects
// the motion feature fusion adaptor.
enum class RefKindCase : uint8_t { II, IB, BI, BB };

// One scheduled encode/decode step.
struct CodingUnit {
  int view_id = 0;
  int poc = 0;
  FrameType frame_type = FrameType::I;
  std::optional<int> fwd_ref_poc;  // earlier reference
  std::optional<int> bwd_ref_poc;  // later reference
  int temporal_layer = 0;
  double loss_weight = 1.0;
  std::pair<FrameType, FrameType> ref_kinds{FrameType::I, FrameType::I};

  bool is_intra() const { return frame_type == FrameType::I; }
};

struct SchedulerConfig {
  int intra_period = 32;
  int num_frames = 1;
  std::vector<int> view_order = {0};  // coding order of views, view 0 first
  std::vector<double> layer_weights = {1.4, 1.4, 0.7, 0.5, 0.2};
  double iframe_weight = 1.0;

  int num_views() const { return int(view_order.size()); }
};

inline RefKindCase ref_kind_case(const CodingUnit& unit) {
  LMVC_REQUIRE(unit.frame_type == FrameType::B, UsageError,
               "ref_kind_case: called on an I unit");
  bool fwd_i = unit.ref_kinds.first == FrameType::I;
  bool bwd_i = unit.ref_kinds.second == FrameType::I;
  if (fwd_i && bwd_i) return RefKindCase::II;
  if (fwd_i) return RefKindCase::IB;
  if (bwd_i) return RefKindCase::BI;
  return RefKindCase::BB;
}

namespace detail {

struct PocEntry {
  int poc;
  FrameType type;
  std::optional<int> fwd, bwd;
  int layer;
};

inline void dyadic_fill(int a, int b, int depth, std::vector<PocEntry>& out) {
  if (b - a < 2) return;
  int mid = (a + b) / 2;
  out.push_back({mid, FrameType::B, a, b, depth + 1});
  dyadic_fill(a, mid, depth + 1, out);
  dyadic_fill(mid, b, depth + 1, out);
}

inline void validate(const SchedulerConfig& cfg) {
  int p = cfg.intra_period;
  LMVC_REQUIRE(p >= 2 && p <= 32 && (p & (p - 1)) == 0, ConfigError,
               "intra_period must be a power of two in [2,32]");
  LMVC_REQUIRE(cfg.num_frames >= 1, ConfigError, "num_frames must be >= 1");
  LMVC_REQUIRE(!cfg.view_order.empty() && cfg.view_order[0] == 0, ConfigError,
               "view_order must start with view 0");
  std::vector<bool> seen(cfg.view_order.size(), false);
  for (int v : cfg.view_order) {
    LMVC_REQUIRE(v >= 0 && v < int(cfg.view_order.size()) && !seen[size_t(v)],
                 ConfigError, "view_order must be a permutation of 0..V-1");
    seen[size_t(v)] = true;
  }
  LMVC_REQUIRE(!cfg.layer_weights.empty(), ConfigError, "layer_weights empty");
  for (double w : cfg.layer_weights)
    LMVC_REQUIRE(w > 0.0, ConfigError, "layer_weights must be positive");
}

// Per-view poc sequence in coding order. Intra frames sit at multiples of the
// intra period; a trailing partial GOP is closed by a chain of power-of-two
// sub-GOPs whose last frame is intra, keeping every B a dyadic midpoint.
inline std::vector<PocEntry> single_view_order(const SchedulerConfig& cfg) {
  std::vector<int> anchors{0};
  int last = 0;
  while (last + cfg.intra_period <= cfg.num_frames - 1) {
    last += cfg.intra_period;
    anchors.push_back(last);
  }
  while (last < cfg.num_frames - 1) {
    int span = cfg.num_frames - 1 - last;
    int step = 1;
    while (step * 2 <= span) step *= 2;
    last += step;
    anchors.push_back(last);
  }
  std::vector<PocEntry> out;
  out.push_back({0, FrameType::I, std::nullopt, std::nullopt, 0});
  for (size_t i = 1; i < anchors.size(); ++i) {
    out.push_back({anchors[i], FrameType::I, std::nullopt, std::nullopt, 0});
    dyadic_fill(anchors[i - 1], anchors[i], 0, out);
  }
  return out;
}

}  // namespace detail

// Multiview hierarchical coding order: time groups in dyadic order, views in
// cfg.view_order within each group.
inline std::vector<CodingUnit> build_schedule(const SchedulerConfig& cfg) {
  detail::validate(cfg);
  auto pocs = detail::single_view_order(cfg);

  // frame type per poc (shared by all views)
  std::vector<FrameType> type_of(size_t(cfg.num_frames), FrameType::I);
  for (const auto& e : pocs) type_of[size_t(e.poc)] = e.type;

  std::vector<CodingUnit> schedule;
  schedule.reserve(pocs.size() * cfg.view_order.size());
  for (const auto& e : pocs) {
    for (int v : cfg.view_order) {
      CodingUnit u;
      u.view_id = v;
      u.poc = e.poc;
      u.frame_type = e.type;
      u.fwd_ref_poc = e.fwd;
      u.bwd_ref_poc = e.bwd;
      u.temporal_layer = e.layer;
      if (e.type == FrameType::I) {
        u.loss_weight = cfg.iframe_weight;
      } else {
        size_t idx = std::min(size_t(e.layer - 1), cfg.layer_weights.size() - 1);
        u.loss_weight = cfg.layer_weights[idx];
        u.ref_kinds = {type_of[size_t(*e.fwd)], type_of[size_t(*e.bwd)]};
      }
      schedule.push_back(u);
    }
  }
  return schedule;
}

// ---- line-oriented dump: "poc view type fwd bwd layer weight" ----

inline std::string dump_schedule(const std::vector<CodingUnit>& schedule) {
  std::ostringstream os;
  for (const auto& u : schedule) {
    os << u.poc << ' ' << u.view_id << ' ' << (u.is_intra() ? 'I' : 'B') << ' ';
    if (u.fwd_ref_poc)
      os << *u.fwd_ref_poc;
    else
      os << '-';
    os << ' ';
    if (u.bwd_ref_poc)
      os << *u.bwd_ref_poc;
    else
      os << '-';
    os << ' ' << u.temporal_layer << ' ' << u.loss_weight << '\n';
  }
  return os.str();
}

inline std::vector<CodingUnit> parse_schedule(const std::string& text) {
  std::vector<CodingUnit> out;
  std::istringstream is(text);
  std::string line;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    CodingUnit u;
    char type = 0;
    std::string fwd, bwd;
    ls >> u.poc >> u.view_id >> type >> fwd >> bwd >> u.temporal_layer >> u.loss_weight;
    LMVC_REQUIRE(!ls.fail(), UsageError, "parse_schedule: bad line: " + line);
    u.frame_type = type == 'I' ? FrameType::I : FrameType::B;
    if (fwd != "-") u.fwd_ref_poc = std::stoi(fwd);
    if (bwd != "-") u.bwd_ref_poc = std::stoi(bwd);
    out.push_back(u);
  }
  // recover ref_kinds from the parsed set
  int max_poc = 0;
  for (const auto& u : out) max_poc = std::max(max_poc, u.poc);
  std::vector<FrameType> type_of(size_t(max_poc + 1), FrameType::I);
  for (const auto& u : out) type_of[size_t(u.poc)] = u.frame_type;
  for (auto& u : out)
    if (u.frame_type == FrameType::B)
      u.ref_kinds = {type_of[size_t(*u.fwd_ref_poc)], type_of[size_t(*u.bwd_ref_poc)]};
  return out;
}

}  // namespace lmvc
