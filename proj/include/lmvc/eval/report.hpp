// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <algorithm>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "lmvc/eval/bdrate.hpp"

namespace lmvc {

// Sequence descriptions (one table row per test sequence) and RD reporting.

struct SequenceConfig {
  std::string name;
  int width = 0, height = 0;
  std::vector<int> view_ids;  // capture view numbers in coding order
  int frames = 0;
};

// Minimal TOML-style reader:
//   [Poznan_Hall2]
//   resolution = 1920x1088
//   views = 7-6-5
//   frames = 97
inline std::vector<SequenceConfig> parse_sequence_config(const std::string& text) {
  std::vector<SequenceConfig> out;
  std::istringstream is(text);
  std::string line;
  SequenceConfig cur;
  auto flush = [&] {
    if (!cur.name.empty()) {
      LMVC_REQUIRE(cur.width > 0 && cur.height > 0 && !cur.view_ids.empty() &&
                       cur.frames > 0,
                   ConfigError, "sequence config incomplete: " + cur.name);
      out.push_back(cur);
    }
    cur = SequenceConfig{};
  };
  while (std::getline(is, line)) {
    auto strip = [](std::string s) {
      size_t a = s.find_first_not_of(" \t\r");
      size_t b = s.find_last_not_of(" \t\r");
      return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
    };
    line = strip(line);
    if (line.empty() || line[0] == '#') continue;
    if (line.front() == '[' && line.back() == ']') {
      flush();
      cur.name = strip(line.substr(1, line.size() - 2));
      continue;
    }
    auto eq = line.find('=');
    LMVC_REQUIRE(eq != std::string::npos && !cur.name.empty(), ConfigError,
                 "sequence config: bad line: " + line);
    std::string key = strip(line.substr(0, eq));
    std::string val = strip(line.substr(eq + 1));
    if (key == "resolution") {
      auto x = val.find('x');
      LMVC_REQUIRE(x != std::string::npos, ConfigError, "resolution must be WxH");
      cur.width = std::stoi(val.substr(0, x));
      cur.height = std::stoi(val.substr(x + 1));
    } else if (key == "views") {
      cur.view_ids.clear();
      std::istringstream vs(val);
      std::string tok;
      while (std::getline(vs, tok, '-')) cur.view_ids.push_back(std::stoi(tok));
    } else if (key == "frames") {
      cur.frames = std::stoi(val);
    } else {
      throw ConfigError("sequence config: unknown key " + key);
    }
  }
  flush();
  return out;
}

struct RdRecord {
  std::string sequence;
  std::string codec;
  int lambda_index = 0;
  double bpp = 0.0;
  double psnr = 0.0;
};

inline std::string rd_table_csv(const std::vector<RdRecord>& records) {
  std::ostringstream os;
  os.precision(10);
  os << "sequence,codec,lambda_index,bpp,psnr\n";
  for (const auto& r : records)
    os << r.sequence << ',' << r.codec << ',' << r.lambda_index << ',' << r.bpp << ','
       << r.psnr << '\n';
  return os.str();
}

inline std::vector<RdRecord> parse_rd_table_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  std::getline(is, line);
  LMVC_REQUIRE(line == "sequence,codec,lambda_index,bpp,psnr", UsageError,
               "rd table: unexpected header");
  std::vector<RdRecord> out;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    std::istringstream ls(line);
    RdRecord r;
    std::string tok;
    std::getline(ls, r.sequence, ',');
    std::getline(ls, r.codec, ',');
    std::getline(ls, tok, ',');
    r.lambda_index = std::stoi(tok);
    std::getline(ls, tok, ',');
    r.bpp = std::stod(tok);
    std::getline(ls, tok, ',');
    r.psnr = std::stod(tok);
    out.push_back(std::move(r));
  }
  return out;
}

// One RD-curve plot per sequence as a standalone SVG file (no plotting
// dependency; output is deterministic).
inline std::string rd_plot_svg(const std::string& sequence,
                               const std::vector<RdRecord>& records) {
  std::vector<RdRecord> pts;
  for (const auto& r : records)
    if (r.sequence == sequence) pts.push_back(r);
  LMVC_REQUIRE(!pts.empty(), UsageError, "rd_plot_svg: no points for " + sequence);
  double bmin = 1e300, bmax = -1e300, pmin = 1e300, pmax = -1e300;
  for (const auto& p : pts) {
    bmin = std::min(bmin, p.bpp);
    bmax = std::max(bmax, p.bpp);
    pmin = std::min(pmin, p.psnr);
    pmax = std::max(pmax, p.psnr);
  }
  if (bmax <= bmin) bmax = bmin + 1e-6;
  if (pmax <= pmin) pmax = pmin + 1e-6;
  const int W = 640, H = 480, M = 60;
  auto sx = [&](double b) { return M + (b - bmin) / (bmax - bmin) * (W - 2 * M); };
  auto sy = [&](double p) { return H - M - (p - pmin) / (pmax - pmin) * (H - 2 * M); };

  std::set<std::string> codecs;
  for (const auto& p : pts) codecs.insert(p.codec);
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"};

  std::ostringstream os;
  os.precision(8);
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"24\" text-anchor=\"middle\" font-size=\"16\">"
     << sequence << "</text>\n";
  os << "<line x1=\"" << M << "\" y1=\"" << H - M << "\" x2=\"" << W - M << "\" y2=\""
     << H - M << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << M << "\" y1=\"" << M << "\" x2=\"" << M << "\" y2=\"" << H - M
     << "\" stroke=\"black\"/>\n";
  os << "<text x=\"" << W / 2 << "\" y=\"" << H - 16
     << "\" text-anchor=\"middle\" font-size=\"12\">bpp</text>\n";
  os << "<text x=\"16\" y=\"" << H / 2
     << "\" text-anchor=\"middle\" font-size=\"12\" transform=\"rotate(-90 16 "
     << H / 2 << ")\">PSNR (dB)</text>\n";

  int ci = 0;
  for (const auto& codec : codecs) {
    std::vector<RdRecord> cps;
    for (const auto& p : pts)
      if (p.codec == codec) cps.push_back(p);
    std::sort(cps.begin(), cps.end(),
              [](const RdRecord& a, const RdRecord& b) { return a.bpp < b.bpp; });
    const char* col = colors[ci % 5];
    os << "<polyline fill=\"none\" stroke=\"" << col << "\" stroke-width=\"2\" points=\"";
    for (const auto& p : cps) os << sx(p.bpp) << ',' << sy(p.psnr) << ' ';
    os << "\"/>\n";
    for (const auto& p : cps)
      os << "<circle cx=\"" << sx(p.bpp) << "\" cy=\"" << sy(p.psnr)
         << "\" r=\"3\" fill=\"" << col << "\"/>\n";
    os << "<text x=\"" << W - M + 4 << "\" y=\"" << M + 16 * ci
       << "\" font-size=\"12\" fill=\"" << col << "\" text-anchor=\"end\">" << codec
       << "</text>\n";
    ++ci;
  }
  os << "</svg>\n";
  return os.str();
}

// Writes the CSV (and optionally one SVG per sequence); returns written paths.
inline std::vector<std::string> emit_report(const std::vector<RdRecord>& records,
                                            const std::string& csv_path,
                                            bool plots = false,
                                            const std::string& plot_dir = "") {
  std::vector<std::string> written;
  std::ofstream os(csv_path);
  LMVC_REQUIRE(os.good(), UsageError, "emit_report: cannot open " + csv_path);
  os << rd_table_csv(records);
  written.push_back(csv_path);
  if (plots) {
    std::set<std::string> seqs;
    for (const auto& r : records) seqs.insert(r.sequence);
    for (const auto& s : seqs) {
      std::string path =
          (plot_dir.empty() ? std::string(".") : plot_dir) + "/" + s + "_rd.svg";
      std::ofstream ps(path);
      LMVC_REQUIRE(ps.good(), UsageError, "emit_report: cannot open " + path);
      ps << rd_plot_svg(s, records);
      written.push_back(path);
    }
  }
  return written;
}

}  // namespace lmvc
