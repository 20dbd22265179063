// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cmath>
#include <functional>
#include <memory>
#include <unordered_set>
#include <vector>

#include "lmvc/core/tensor.hpp"

namespace lmvc {
namespace nn {

// Dynamic-graph reverse-mode autodiff over whole tensors. A Node owns its
// forward value; backward closures add into parent gradients. When grad mode
// is off (inference, entropy coding) no graph is recorded, so intermediates
// free themselves as their reference counts drop.

inline bool& grad_mode_flag() {
  thread_local bool enabled = true;
  return enabled;
}

struct NoGradGuard {
  NoGradGuard() : prev(grad_mode_flag()) { grad_mode_flag() = false; }
  ~NoGradGuard() { grad_mode_flag() = prev; }
  bool prev;
};

template <typename S>
struct Node {
  Tensor<S> val;
  Tensor<S> grad;  // allocated on demand, same dims as val
  bool requires_grad = false;
  std::vector<std::shared_ptr<Node<S>>> parents;
  std::function<void(Node<S>&)> backward_fn;

  void ensure_grad() {
    if (grad.size() != val.size()) grad = Tensor<S>::zeros(val.dims());
  }
  void zero_grad() {
    if (grad.size() == val.size()) grad.fill(S(0));
  }
};

template <typename S>
using Var = std::shared_ptr<Node<S>>;

template <typename S>
inline Var<S> make_var(Tensor<S> value, bool requires_grad = false) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(value);
  n->requires_grad = requires_grad;
  return n;
}

template <typename S>
inline Var<S> constant(Tensor<S> value) {
  return make_var(std::move(value), false);
}

template <typename S>
inline bool track(const std::vector<Var<S>>& parents) {
  if (!grad_mode_flag()) return false;
  for (const auto& p : parents)
    if (p && p->requires_grad) return true;
  return false;
}

// Builds a result node; installs the backward closure only when recording.
template <typename S>
inline Var<S> make_op(Tensor<S> value, std::vector<Var<S>> parents,
                      std::function<void(Node<S>&)> backward_fn) {
  auto n = std::make_shared<Node<S>>();
  n->val = std::move(value);
  if (track(parents)) {
    n->requires_grad = true;
    n->parents = std::move(parents);
    n->backward_fn = std::move(backward_fn);
  }
  return n;
}

// Reverse-topological sweep from a scalar root.
template <typename S>
inline void backward(const Var<S>& root) {
  LMVC_REQUIRE(root->val.size() == 1, UsageError, "backward: root must be scalar");
  std::vector<Node<S>*> order;
  std::unordered_set<Node<S>*> visited;
  std::vector<std::pair<Node<S>*, size_t>> stack;
  stack.push_back({root.get(), 0});
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, idx] = stack.back();
    if (idx < node->parents.size()) {
      Node<S>* p = node->parents[idx++].get();
      if (p->requires_grad && !visited.count(p)) {
        visited.insert(p);
        stack.push_back({p, 0});
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  root->grad[0] += S(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node<S>* n = *it;
    if (n->backward_fn) {
      for (auto& p : n->parents)
        if (p->requires_grad) p->ensure_grad();
      n->backward_fn(*n);
    }
  }
}

// ---- elementwise ops ----

template <typename S>
inline Var<S> add(const Var<S>& a, const Var<S>& b) {
  LMVC_REQUIRE(a->val.same_dims(b->val), UsageError, "add: dim mismatch");
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] += b->val[i];
  return make_op<S>(std::move(out), {a, b}, [a, b](Node<S>& n) {
    if (a->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
    if (b->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) b->grad[i] += n.grad[i];
  });
}

template <typename S>
inline Var<S> sub(const Var<S>& a, const Var<S>& b) {
  LMVC_REQUIRE(a->val.same_dims(b->val), UsageError, "sub: dim mismatch");
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] -= b->val[i];
  return make_op<S>(std::move(out), {a, b}, [a, b](Node<S>& n) {
    if (a->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
    if (b->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) b->grad[i] -= n.grad[i];
  });
}

template <typename S>
inline Var<S> mul(const Var<S>& a, const Var<S>& b) {
  LMVC_REQUIRE(a->val.same_dims(b->val), UsageError, "mul: dim mismatch");
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= b->val[i];
  return make_op<S>(std::move(out), {a, b}, [a, b](Node<S>& n) {
    if (a->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i] * b->val[i];
    if (b->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) b->grad[i] += n.grad[i] * a->val[i];
  });
}

template <typename S>
inline Var<S> scale(const Var<S>& a, S k) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] *= k;
  return make_op<S>(std::move(out), {a}, [a, k](Node<S>& n) {
    if (a->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i] * k;
  });
}

template <typename S>
inline Var<S> add_scalar(const Var<S>& a, S k) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] += k;
  return make_op<S>(std::move(out), {a}, [a](Node<S>& n) {
    if (a->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
  });
}

template <typename S>
inline Var<S> reciprocal(const Var<S>& a) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] = S(1) / out[i];
  return make_op<S>(std::move(out), {a}, [a](Node<S>& n) {
    if (!a->requires_grad) return;
    for (size_t i = 0; i < n.grad.size(); ++i) {
      S inv = S(1) / a->val[i];
      a->grad[i] -= n.grad[i] * inv * inv;
    }
  });
}

template <typename S>
inline Var<S> leaky_relu(const Var<S>& a, S slope = S(0.1)) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i)
    if (out[i] < S(0)) out[i] *= slope;
  return make_op<S>(std::move(out), {a}, [a, slope](Node<S>& n) {
    if (!a->requires_grad) return;
    for (size_t i = 0; i < n.grad.size(); ++i)
      a->grad[i] += n.grad[i] * (a->val[i] >= S(0) ? S(1) : slope);
  });
}

template <typename S>
inline Var<S> sigmoid(const Var<S>& a) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i)
    out[i] = S(1) / (S(1) + std::exp(-double(out[i])));
  return make_op<S>(std::move(out), {a}, [a](Node<S>& n) {
    if (!a->requires_grad) return;
    for (size_t i = 0; i < n.grad.size(); ++i) {
      S s = n.val[i];
      a->grad[i] += n.grad[i] * s * (S(1) - s);
    }
  });
}

template <typename S>
inline Var<S> exp_(const Var<S>& a) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::exp(double(out[i]));
  return make_op<S>(std::move(out), {a}, [a](Node<S>& n) {
    if (!a->requires_grad) return;
    for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i] * n.val[i];
  });
}

// Hard clamp. Gradient passes strictly inside the interval.
template <typename S>
inline Var<S> clamp(const Var<S>& a, S lo, S hi) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::min(hi, std::max(lo, out[i]));
  return make_op<S>(std::move(out), {a}, [a, lo, hi](Node<S>& n) {
    if (!a->requires_grad) return;
    for (size_t i = 0; i < n.grad.size(); ++i)
      if (a->val[i] > lo && a->val[i] < hi) a->grad[i] += n.grad[i];
  });
}

// Cuts the graph; forward value passes through.
template <typename S>
inline Var<S> detach(const Var<S>& a) {
  return constant<S>(a->val);
}

// forward: round(x), backward: identity (straight-through estimator).
template <typename S>
inline Var<S> round_ste(const Var<S>& a) {
  Tensor<S> out = a->val;
  for (size_t i = 0; i < out.size(); ++i) out[i] = std::nearbyint(double(out[i]));
  return make_op<S>(std::move(out), {a}, [a](Node<S>& n) {
    if (a->requires_grad)
      for (size_t i = 0; i < n.grad.size(); ++i) a->grad[i] += n.grad[i];
  });
}

// ---- shape ops ----

template <typename S>
inline Var<S> concat_ch(const std::vector<Var<S>>& parts) {
  LMVC_REQUIRE(!parts.empty(), UsageError, "concat_ch: empty");
  int h = parts[0]->val.height(), w = parts[0]->val.width();
  int c = 0;
  for (const auto& p : parts) {
    LMVC_REQUIRE(p->val.rank() == 3 && p->val.height() == h && p->val.width() == w,
                 UsageError, "concat_ch: spatial dims mismatch");
    c += p->val.channels();
  }
  Tensor<S> out({c, h, w});
  size_t plane = static_cast<size_t>(h) * w;
  size_t off = 0;
  for (const auto& p : parts) {
    size_t n = p->val.size();
    std::copy(p->val.data(), p->val.data() + n, out.data() + off);
    off += n;
  }
  (void)plane;
  return make_op<S>(std::move(out), parts, [parts](Node<S>& n) {
    size_t off = 0;
    for (const auto& p : parts) {
      size_t cnt = p->val.size();
      if (p->requires_grad)
        for (size_t i = 0; i < cnt; ++i) p->grad[i] += n.grad[off + i];
      off += cnt;
    }
  });
}

template <typename S>
inline Var<S> slice_ch(const Var<S>& a, int c0, int c1) {
  LMVC_REQUIRE(a->val.rank() == 3 && c0 >= 0 && c1 <= a->val.channels() && c0 < c1,
               UsageError, "slice_ch: bad range");
  int h = a->val.height(), w = a->val.width();
  size_t plane = static_cast<size_t>(h) * w;
  Tensor<S> out({c1 - c0, h, w});
  std::copy(a->val.data() + c0 * plane, a->val.data() + c1 * plane, out.data());
  return make_op<S>(std::move(out), {a}, [a, c0, plane](Node<S>& n) {
    if (!a->requires_grad) return;
    size_t base = c0 * plane;
    for (size_t i = 0; i < n.grad.size(); ++i) a->grad[base + i] += n.grad[i];
  });
}

// Per-channel scaling of a {C,H,W} map by a {C} vector.
template <typename S>
inline Var<S> chan_scale(const Var<S>& a, const Var<S>& v) {
  LMVC_REQUIRE(a->val.rank() == 3 && v->val.rank() == 1 &&
                   v->val.dim(0) == a->val.channels(),
               UsageError, "chan_scale: dim mismatch");
  int c = a->val.channels();
  size_t plane = static_cast<size_t>(a->val.height()) * a->val.width();
  Tensor<S> out = a->val;
  for (int ch = 0; ch < c; ++ch) {
    S k = v->val[ch];
    S* p = out.data() + ch * plane;
    for (size_t i = 0; i < plane; ++i) p[i] *= k;
  }
  return make_op<S>(std::move(out), {a, v}, [a, v, c, plane](Node<S>& n) {
    for (int ch = 0; ch < c; ++ch) {
      const S* g = n.grad.data() + ch * plane;
      if (a->requires_grad) {
        S k = v->val[ch];
        S* ag = a->grad.data() + ch * plane;
        for (size_t i = 0; i < plane; ++i) ag[i] += g[i] * k;
      }
      if (v->requires_grad) {
        const S* av = a->val.data() + ch * plane;
        double acc = 0.0;
        for (size_t i = 0; i < plane; ++i) acc += double(g[i]) * double(av[i]);
        v->grad[ch] += S(acc);
      }
    }
  });
}

// ---- reductions ----

template <typename S>
inline Var<S> sum(const Var<S>& a) {
  double acc = 0.0;
  for (size_t i = 0; i < a->val.size(); ++i) acc += double(a->val[i]);
  return make_op<S>(Tensor<S>::scalar(S(acc)), {a}, [a](Node<S>& n) {
    if (!a->requires_grad) return;
    S g = n.grad[0];
    for (size_t i = 0; i < a->grad.size(); ++i) a->grad[i] += g;
  });
}

template <typename S>
inline Var<S> mean(const Var<S>& a) {
  size_t n_elems = a->val.size();
  return scale(sum(a), S(1.0 / double(n_elems)));
}

template <typename S>
inline Var<S> mse(const Var<S>& a, const Var<S>& b) {
  LMVC_REQUIRE(a->val.same_dims(b->val), UsageError, "mse: dim mismatch");
  size_t n_elems = a->val.size();
  double acc = 0.0;
  for (size_t i = 0; i < n_elems; ++i) {
    double d = double(a->val[i]) - double(b->val[i]);
    acc += d * d;
  }
  double inv = 1.0 / double(n_elems);
  return make_op<S>(Tensor<S>::scalar(S(acc * inv)), {a, b}, [a, b, inv](Node<S>& n) {
    S g = n.grad[0];
    for (size_t i = 0; i < a->val.size(); ++i) {
      S d = S(2) * (a->val[i] - b->val[i]) * S(inv) * g;
      if (a->requires_grad) a->grad[i] += d;
      if (b->requires_grad) b->grad[i] -= d;
    }
  });
}

}  // namespace nn
}  // namespace lmvc
