// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include "lmvc/core/autograd.hpp"

namespace lmvc {
namespace nn {

// Direct convolutions in NCHW. Parallel loops are arranged so that every
// output element is accumulated by exactly one thread; results are identical
// for any thread count.

namespace detail {

template <typename S>
void conv2d_forward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& b,
                    Tensor<S>& out, int k, int stride, int pad) {
  const int C = in.channels(), H = in.height(), W = in.width();
  const int K = out.channels(), OH = out.height(), OW = out.width();
#pragma omp parallel for schedule(static)
  for (int ko = 0; ko < K; ++ko) {
    S* o = out.data() + static_cast<size_t>(ko) * OH * OW;
    const S bias = b[ko];
    for (int i = 0; i < OH * OW; ++i) o[i] = bias;
    for (int c = 0; c < C; ++c) {
      const S* x = in.data() + static_cast<size_t>(c) * H * W;
      const S* wk = w.data() + ((static_cast<size_t>(ko) * C + c) * k) * k;
      for (int oy = 0; oy < OH; ++oy) {
        S* orow = o + oy * OW;
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          const S* xrow = x + iy * W;
          const S* wr = wk + ky * k;
          for (int kx = 0; kx < k; ++kx) {
            int ix0 = kx - pad;  // input x for ox=0
            S wv = wr[kx];
            int ox_lo = 0, ox_hi = OW;
            // clip to valid input columns: 0 <= ox*stride + ix0 < W
            while (ox_lo < OW && ox_lo * stride + ix0 < 0) ++ox_lo;
            while (ox_hi > ox_lo && (ox_hi - 1) * stride + ix0 >= W) --ox_hi;
            if (stride == 1) {
              const S* xp = xrow + ix0 + ox_lo;
              for (int ox = ox_lo; ox < ox_hi; ++ox) orow[ox] += wv * xp[ox - ox_lo];
            } else {
              for (int ox = ox_lo; ox < ox_hi; ++ox)
                orow[ox] += wv * xrow[ox * stride + ix0];
            }
          }
        }
      }
    }
  }
}

template <typename S>
void conv2d_backward(const Tensor<S>& in, const Tensor<S>& w, const Tensor<S>& g,
                     Tensor<S>* din, Tensor<S>* dw, Tensor<S>* db, int k,
                     int stride, int pad) {
  const int C = in.channels(), H = in.height(), W = in.width();
  const int K = g.channels(), OH = g.height(), OW = g.width();
  if (db) {
    for (int ko = 0; ko < K; ++ko) {
      const S* gp = g.data() + static_cast<size_t>(ko) * OH * OW;
      double acc = 0.0;
      for (int i = 0; i < OH * OW; ++i) acc += double(gp[i]);
      (*db)[ko] += S(acc);
    }
  }
  if (dw) {
#pragma omp parallel for schedule(static)
    for (int ko = 0; ko < K; ++ko) {
      const S* gp = g.data() + static_cast<size_t>(ko) * OH * OW;
      for (int c = 0; c < C; ++c) {
        const S* x = in.data() + static_cast<size_t>(c) * H * W;
        S* dwk = dw->data() + ((static_cast<size_t>(ko) * C + c) * k) * k;
        for (int ky = 0; ky < k; ++ky)
          for (int kx = 0; kx < k; ++kx) {
            double acc = 0.0;
            for (int oy = 0; oy < OH; ++oy) {
              int iy = oy * stride + ky - pad;
              if (iy < 0 || iy >= H) continue;
              const S* xrow = x + iy * W;
              const S* grow = gp + oy * OW;
              for (int ox = 0; ox < OW; ++ox) {
                int ix = ox * stride + kx - pad;
                if (ix < 0 || ix >= W) continue;
                acc += double(grow[ox]) * double(xrow[ix]);
              }
            }
            dwk[ky * k + kx] += S(acc);
          }
      }
    }
  }
  if (din) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
      S* dx = din->data() + static_cast<size_t>(c) * H * W;
      for (int ko = 0; ko < K; ++ko) {
        const S* gp = g.data() + static_cast<size_t>(ko) * OH * OW;
        const S* wk = w.data() + ((static_cast<size_t>(ko) * C + c) * k) * k;
        for (int oy = 0; oy < OH; ++oy) {
          const S* grow = gp + oy * OW;
          for (int ky = 0; ky < k; ++ky) {
            int iy = oy * stride + ky - pad;
            if (iy < 0 || iy >= H) continue;
            S* dxrow = dx + iy * W;
            const S* wr = wk + ky * k;
            for (int kx = 0; kx < k; ++kx) {
              int ix0 = kx - pad;
              S wv = wr[kx];
              for (int ox = 0; ox < OW; ++ox) {
                int ix = ox * stride + ix0;
                if (ix < 0 || ix >= W) continue;
                dxrow[ix] += wv * grow[ox];
              }
            }
          }
        }
      }
    }
  }
}

}  // namespace detail

inline int conv_out_dim(int in, int k, int stride, int pad) {
  return (in + 2 * pad - k) / stride + 1;
}

// w: {K, C, k, k}, b: {K}.
template <typename S>
inline Var<S> conv2d(const Var<S>& in, const Var<S>& w, const Var<S>& b,
                     int stride = 1) {
  LMVC_REQUIRE(in->val.rank() == 3 && w->val.rank() == 4, UsageError,
               "conv2d: bad ranks");
  const int k = w->val.dim(2);
  const int pad = k / 2;
  LMVC_REQUIRE(w->val.dim(1) == in->val.channels(), UsageError,
               "conv2d: channel mismatch");
  const int K = w->val.dim(0);
  Tensor<S> out({K, conv_out_dim(in->val.height(), k, stride, pad),
                 conv_out_dim(in->val.width(), k, stride, pad)});
  detail::conv2d_forward(in->val, w->val, b->val, out, k, stride, pad);
  return make_op<S>(std::move(out), {in, w, b}, [in, w, b, k, stride, pad](Node<S>& n) {
    detail::conv2d_backward(in->val, w->val, n.grad,
                            in->requires_grad ? &in->grad : nullptr,
                            w->requires_grad ? &w->grad : nullptr,
                            b->requires_grad ? &b->grad : nullptr, k, stride, pad);
  });
}

// Depthwise 3x3, stride 1, pad 1. w: {C, 1, 3, 3}, b: {C}.
template <typename S>
inline Var<S> depthwise3(const Var<S>& in, const Var<S>& w, const Var<S>& b) {
  const int C = in->val.channels(), H = in->val.height(), W = in->val.width();
  LMVC_REQUIRE(w->val.dim(0) == C, UsageError, "depthwise3: channel mismatch");
  Tensor<S> out({C, H, W});
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const S* x = in->val.data() + static_cast<size_t>(c) * H * W;
    const S* wk = w->val.data() + static_cast<size_t>(c) * 9;
    S* o = out.data() + static_cast<size_t>(c) * H * W;
    const S bias = b->val[c];
    for (int y = 0; y < H; ++y) {
      S* orow = o + y * W;
      for (int x0 = 0; x0 < W; ++x0) orow[x0] = bias;
      for (int ky = 0; ky < 3; ++ky) {
        int iy = y + ky - 1;
        if (iy < 0 || iy >= H) continue;
        const S* xrow = x + iy * W;
        for (int kx = 0; kx < 3; ++kx) {
          S wv = wk[ky * 3 + kx];
          int lo = std::max(0, 1 - kx), hi = std::min(W, W + 1 - kx);
          for (int ox = lo; ox < hi; ++ox) orow[ox] += wv * xrow[ox + kx - 1];
        }
      }
    }
  }
  return make_op<S>(std::move(out), {in, w, b}, [in, w, b, C, H, W](Node<S>& n) {
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
      const S* g = n.grad.data() + static_cast<size_t>(c) * H * W;
      const S* x = in->val.data() + static_cast<size_t>(c) * H * W;
      const S* wk = w->val.data() + static_cast<size_t>(c) * 9;
      if (b->requires_grad) {
        double acc = 0.0;
        for (int i = 0; i < H * W; ++i) acc += double(g[i]);
        b->grad[c] += S(acc);
      }
      for (int ky = 0; ky < 3; ++ky)
        for (int kx = 0; kx < 3; ++kx) {
          double wacc = 0.0;
          for (int y = 0; y < H; ++y) {
            int iy = y + ky - 1;
            if (iy < 0 || iy >= H) continue;
            const S* grow = g + y * W;
            const S* xrow = x + iy * W;
            S* dxrow = in->requires_grad
                           ? in->grad.data() + static_cast<size_t>(c) * H * W + iy * W
                           : nullptr;
            S wv = wk[ky * 3 + kx];
            for (int ox = 0; ox < W; ++ox) {
              int ix = ox + kx - 1;
              if (ix < 0 || ix >= W) continue;
              if (w->requires_grad) wacc += double(grow[ox]) * double(xrow[ix]);
              if (dxrow) dxrow[ix] += wv * grow[ox];
            }
          }
          if (w->requires_grad) w->grad[static_cast<size_t>(c) * 9 + ky * 3 + kx] += S(wacc);
        }
    }
  });
}

template <typename S>
inline Var<S> upsample_nearest2(const Var<S>& a) {
  const int C = a->val.channels(), H = a->val.height(), W = a->val.width();
  Tensor<S> out({C, H * 2, W * 2});
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const S* x = a->val.data() + static_cast<size_t>(c) * H * W;
    S* o = out.data() + static_cast<size_t>(c) * H * W * 4;
    for (int y = 0; y < H; ++y)
      for (int xx = 0; xx < W; ++xx) {
        S v = x[y * W + xx];
        S* p = o + (2 * y) * (2 * W) + 2 * xx;
        p[0] = v;
        p[1] = v;
        p[2 * W] = v;
        p[2 * W + 1] = v;
      }
  }
  return make_op<S>(std::move(out), {a}, [a, C, H, W](Node<S>& n) {
    if (!a->requires_grad) return;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
      S* dx = a->grad.data() + static_cast<size_t>(c) * H * W;
      const S* g = n.grad.data() + static_cast<size_t>(c) * H * W * 4;
      for (int y = 0; y < H; ++y)
        for (int xx = 0; xx < W; ++xx) {
          const S* p = g + (2 * y) * (2 * W) + 2 * xx;
          dx[y * W + xx] += p[0] + p[1] + p[2 * W] + p[2 * W + 1];
        }
    }
  });
}

// 2x2 average pooling; odd trailing row/col handled by edge duplication.
template <typename S>
inline Var<S> avgpool2(const Var<S>& a) {
  const int C = a->val.channels(), H = a->val.height(), W = a->val.width();
  const int OH = (H + 1) / 2, OW = (W + 1) / 2;
  Tensor<S> out({C, OH, OW});
#pragma omp parallel for schedule(static)
  for (int c = 0; c < C; ++c) {
    const S* x = a->val.data() + static_cast<size_t>(c) * H * W;
    S* o = out.data() + static_cast<size_t>(c) * OH * OW;
    for (int y = 0; y < OH; ++y)
      for (int xx = 0; xx < OW; ++xx) {
        int y0 = 2 * y, y1 = std::min(2 * y + 1, H - 1);
        int x0 = 2 * xx, x1 = std::min(2 * xx + 1, W - 1);
        o[y * OW + xx] = S(0.25) * (x[y0 * W + x0] + x[y0 * W + x1] +
                                    x[y1 * W + x0] + x[y1 * W + x1]);
      }
  }
  return make_op<S>(std::move(out), {a}, [a, C, H, W, OH, OW](Node<S>& n) {
    if (!a->requires_grad) return;
#pragma omp parallel for schedule(static)
    for (int c = 0; c < C; ++c) {
      S* dx = a->grad.data() + static_cast<size_t>(c) * H * W;
      const S* g = n.grad.data() + static_cast<size_t>(c) * OH * OW;
      for (int y = 0; y < OH; ++y)
        for (int xx = 0; xx < OW; ++xx) {
          S gv = S(0.25) * g[y * OW + xx];
          int y0 = 2 * y, y1 = std::min(2 * y + 1, H - 1);
          int x0 = 2 * xx, x1 = std::min(2 * xx + 1, W - 1);
          dx[y0 * W + x0] += gv;
          dx[y0 * W + x1] += gv;
          dx[y1 * W + x0] += gv;
          dx[y1 * W + x1] += gv;
        }
    }
  });
}

// Backward-warps `feat` by a dense displacement field: out(c,y,x) =
// feat(c, y + flow_y(y,x), x + flow_x(y,x)), bilinear, border clamped.
// flow: {2,H,W} with channel 0 = x displacement, channel 1 = y displacement.
template <typename S>
inline Var<S> warp_bilinear(const Var<S>& feat, const Var<S>& flow) {
  const int C = feat->val.channels(), H = feat->val.height(), W = feat->val.width();
  LMVC_REQUIRE(flow->val.rank() == 3 && flow->val.channels() == 2 &&
                   flow->val.height() == H && flow->val.width() == W,
               UsageError, "warp_bilinear: flow dims");
  Tensor<S> out({C, H, W});
  const S* fx = flow->val.data();
  const S* fy = flow->val.data() + static_cast<size_t>(H) * W;
#pragma omp parallel for schedule(static)
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      double sx = x + double(fx[y * W + x]);
      double sy = y + double(fy[y * W + x]);
      sx = std::min(double(W - 1), std::max(0.0, sx));
      sy = std::min(double(H - 1), std::max(0.0, sy));
      int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
      int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
      S ax = S(sx - x0), ay = S(sy - y0);
      for (int c = 0; c < C; ++c) {
        const S* p = feat->val.data() + static_cast<size_t>(c) * H * W;
        S v00 = p[y0 * W + x0], v01 = p[y0 * W + x1];
        S v10 = p[y1 * W + x0], v11 = p[y1 * W + x1];
        out.at(c, y, x) = (S(1) - ay) * ((S(1) - ax) * v00 + ax * v01) +
                          ay * ((S(1) - ax) * v10 + ax * v11);
      }
    }
  }
  return make_op<S>(std::move(out), {feat, flow}, [feat, flow, C, H, W](Node<S>& n) {
    const S* fx = flow->val.data();
    const S* fy = flow->val.data() + static_cast<size_t>(H) * W;
    // feat grad: scatter per channel (sequential over pixels within channel).
    if (feat->requires_grad) {
#pragma omp parallel for schedule(static)
      for (int c = 0; c < C; ++c) {
        S* dp = feat->grad.data() + static_cast<size_t>(c) * H * W;
        const S* g = n.grad.data() + static_cast<size_t>(c) * H * W;
        for (int y = 0; y < H; ++y)
          for (int x = 0; x < W; ++x) {
            double sx = std::min(double(W - 1), std::max(0.0, x + double(fx[y * W + x])));
            double sy = std::min(double(H - 1), std::max(0.0, y + double(fy[y * W + x])));
            int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
            int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
            S ax = S(sx - x0), ay = S(sy - y0);
            S gv = g[y * W + x];
            dp[y0 * W + x0] += (S(1) - ay) * (S(1) - ax) * gv;
            dp[y0 * W + x1] += (S(1) - ay) * ax * gv;
            dp[y1 * W + x0] += ay * (S(1) - ax) * gv;
            dp[y1 * W + x1] += ay * ax * gv;
          }
      }
    }
    if (flow->requires_grad) {
#pragma omp parallel for schedule(static)
      for (int y = 0; y < H; ++y)
        for (int x = 0; x < W; ++x) {
          double sxr = x + double(fx[y * W + x]);
          double syr = y + double(fy[y * W + x]);
          bool in_x = sxr > 0.0 && sxr < double(W - 1);
          bool in_y = syr > 0.0 && syr < double(H - 1);
          double sx = std::min(double(W - 1), std::max(0.0, sxr));
          double sy = std::min(double(H - 1), std::max(0.0, syr));
          int x0 = static_cast<int>(std::floor(sx)), y0 = static_cast<int>(std::floor(sy));
          int x1 = std::min(x0 + 1, W - 1), y1 = std::min(y0 + 1, H - 1);
          S ax = S(sx - x0), ay = S(sy - y0);
          double gx = 0.0, gy = 0.0;
          for (int c = 0; c < C; ++c) {
            const S* p = feat->val.data() + static_cast<size_t>(c) * H * W;
            const S g = n.grad[(static_cast<size_t>(c) * H + y) * W + x];
            S v00 = p[y0 * W + x0], v01 = p[y0 * W + x1];
            S v10 = p[y1 * W + x0], v11 = p[y1 * W + x1];
            gx += double(g) * double((S(1) - ay) * (v01 - v00) + ay * (v11 - v10));
            gy += double(g) * double((S(1) - ax) * (v10 - v00) + ax * (v11 - v01));
          }
          if (in_x) flow->grad[y * W + x] += S(gx);
          if (in_y) flow->grad[static_cast<size_t>(H) * W + y * W + x] += S(gy);
        }
    }
  });
}

// out = a*mask + b*(1-mask); mask is a constant {1,H,W} 0/1 plane applied
// across channels. Used by the interleaved-subgroup context model.
template <typename S>
inline Var<S> mask_merge(const Var<S>& a, const Var<S>& b, const Tensor<S>& mask) {
  LMVC_REQUIRE(a->val.same_dims(b->val), UsageError, "mask_merge: dim mismatch");
  const int C = a->val.channels();
  const size_t plane = static_cast<size_t>(a->val.height()) * a->val.width();
  LMVC_REQUIRE(mask.size() == plane, UsageError, "mask_merge: mask dims");
  Tensor<S> out = a->val;
  for (int c = 0; c < C; ++c) {
    S* o = out.data() + c * plane;
    const S* bv = b->val.data() + c * plane;
    for (size_t i = 0; i < plane; ++i)
      if (mask[i] == S(0)) o[i] = bv[i];
  }
  auto mask_copy = std::make_shared<Tensor<S>>(mask);
  return make_op<S>(std::move(out), {a, b}, [a, b, C, plane, mask_copy](Node<S>& n) {
    for (int c = 0; c < C; ++c) {
      const S* g = n.grad.data() + c * plane;
      for (size_t i = 0; i < plane; ++i) {
        bool on = (*mask_copy)[i] != S(0);
        if (on && a->requires_grad) a->grad[c * plane + i] += g[i];
        if (!on && b->requires_grad) b->grad[c * plane + i] += g[i];
      }
    }
  });
}

}  // namespace nn
}  // namespace lmvc
