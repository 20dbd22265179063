// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <algorithm>
#include <array>
#include <vector>

#include "lmvc/eval/metrics.hpp"

namespace lmvc {

// Bjontegaard delta rate. log10(rate) is fitted as a function of quality and
// integrated over the common quality interval; the result is the average
// rate ratio in percent (negative = savings of `test` against `anchor`).

enum class BdVariant : uint8_t { cubic, pchip };

struct BdResult {
  double percent = 0.0;
  bool monotonic_warning = false;  // inputs were not strictly increasing
};

namespace bd_detail {

// least-squares cubic fit y(x), evaluated analytically for the integral
inline std::array<double, 4> cubic_fit(const std::vector<double>& x,
                                       const std::vector<double>& y) {
  // normal equations for degree 3
  double sx[7] = {0};
  double sy[4] = {0};
  for (size_t i = 0; i < x.size(); ++i) {
    double p = 1.0;
    for (int k = 0; k < 7; ++k) {
      sx[k] += p;
      p *= x[i];
    }
    p = y[i];
    for (int k = 0; k < 4; ++k) {
      sy[k] += p;
      p *= x[i];
    }
  }
  double a[4][5];
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) a[r][c] = sx[r + c];
    a[r][4] = sy[r];
  }
  // gaussian elimination with partial pivoting
  for (int col = 0; col < 4; ++col) {
    int piv = col;
    for (int r = col + 1; r < 4; ++r)
      if (std::abs(a[r][col]) > std::abs(a[piv][col])) piv = r;
    std::swap(a[col], a[piv]);
    LMVC_REQUIRE(std::abs(a[col][col]) > 1e-12, ParamError,
                 "bd_rate: degenerate fit (quality values too close)");
    for (int r = 0; r < 4; ++r) {
      if (r == col) continue;
      double f = a[r][col] / a[col][col];
      for (int c = col; c < 5; ++c) a[r][c] -= f * a[col][c];
    }
  }
  return {a[0][4] / a[0][0], a[1][4] / a[1][1], a[2][4] / a[2][2], a[3][4] / a[3][3]};
}

inline double cubic_integral(const std::array<double, 4>& c, double lo, double hi) {
  auto F = [&](double x) {
    return c[0] * x + c[1] * x * x / 2 + c[2] * x * x * x / 3 + c[3] * x * x * x * x / 4;
  };
  return F(hi) - F(lo);
}

// Fritsch-Carlson monotone cubic Hermite integral over [lo, hi]
inline double pchip_integral(const std::vector<double>& x, const std::vector<double>& y,
                             double lo, double hi) {
  const size_t n = x.size();
  std::vector<double> d(n - 1), m(n, 0.0);
  for (size_t i = 0; i + 1 < n; ++i) d[i] = (y[i + 1] - y[i]) / (x[i + 1] - x[i]);
  m[0] = d[0];
  m[n - 1] = d[n - 2];
  for (size_t i = 1; i + 1 < n; ++i)
    m[i] = (d[i - 1] * d[i] <= 0.0) ? 0.0 : 2.0 * d[i - 1] * d[i] / (d[i - 1] + d[i]);

  double acc = 0.0;
  for (size_t i = 0; i + 1 < n; ++i) {
    double a = std::max(lo, x[i]), b = std::min(hi, x[i + 1]);
    if (b <= a) continue;
    double h = x[i + 1] - x[i];
    // integrate the Hermite basis form with a 4-point Gauss-Legendre rule
    static const double gl_x[4] = {-0.8611363116, -0.3399810436, 0.3399810436,
                                   0.8611363116};
    static const double gl_w[4] = {0.3478548451, 0.6521451549, 0.6521451549,
                                   0.3478548451};
    for (int g = 0; g < 4; ++g) {
      double t = 0.5 * (a + b) + 0.5 * (b - a) * gl_x[g];
      double s = (t - x[i]) / h;
      double h00 = (1 + 2 * s) * (1 - s) * (1 - s);
      double h10 = s * (1 - s) * (1 - s);
      double h01 = s * s * (3 - 2 * s);
      double h11 = s * s * (s - 1);
      double val = h00 * y[i] + h10 * h * m[i] + h01 * y[i + 1] + h11 * h * m[i + 1];
      acc += 0.5 * (b - a) * gl_w[g] * val;
    }
  }
  return acc;
}

}  // namespace bd_detail

inline BdResult bd_rate_full(std::vector<RDPoint> anchor, std::vector<RDPoint> test,
                             BdVariant variant = BdVariant::cubic) {
  LMVC_REQUIRE(anchor.size() >= 4 && test.size() >= 4, ParamError,
               "bd_rate: need at least 4 points per curve");
  BdResult res;
  auto prep = [&res](std::vector<RDPoint>& pts) {
    std::sort(pts.begin(), pts.end(),
              [](const RDPoint& a, const RDPoint& b) { return a.psnr < b.psnr; });
    for (size_t i = 0; i + 1 < pts.size(); ++i) {
      if (pts[i + 1].psnr <= pts[i].psnr || pts[i + 1].bpp <= pts[i].bpp)
        res.monotonic_warning = true;
      if (pts[i + 1].psnr <= pts[i].psnr)
        pts[i + 1].psnr = pts[i].psnr + 1e-9;  // keep the fit well-posed
    }
    for (const auto& p : pts)
      LMVC_REQUIRE(p.bpp > 0.0, ParamError, "bd_rate: nonpositive rate");
  };
  prep(anchor);
  prep(test);

  double lo = std::max(anchor.front().psnr, test.front().psnr);
  double hi = std::min(anchor.back().psnr, test.back().psnr);
  LMVC_REQUIRE(hi > lo, ParamError, "bd_rate: quality ranges do not overlap");

  auto integrate = [&](const std::vector<RDPoint>& pts) {
    std::vector<double> q, lr;
    for (const auto& p : pts) {
      q.push_back(p.psnr);
      lr.push_back(std::log10(p.bpp));
    }
    if (variant == BdVariant::cubic) {
      auto fit = bd_detail::cubic_fit(q, lr);
      return bd_detail::cubic_integral(fit, lo, hi);
    }
    return bd_detail::pchip_integral(q, lr, lo, hi);
  };

  double delta = (integrate(test) - integrate(anchor)) / (hi - lo);
  res.percent = 100.0 * (std::pow(10.0, delta) - 1.0);
  return res;
}

inline double bd_rate(const std::vector<RDPoint>& anchor, const std::vector<RDPoint>& test,
                      BdVariant variant = BdVariant::cubic) {
  return bd_rate_full(anchor, test, variant).percent;
}

}  // namespace lmvc
