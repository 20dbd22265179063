// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <initializer_list>
#include <vector>

#include "lmvc/core/check.hpp"

namespace lmvc {

// Dense row-major tensor. Rank 3 {C, H, W} carries feature maps and frames,
// rank 1 holds parameter vectors and scalars.
template <typename S>
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
    size_t n = 1;
    for (int d : dims_) {
      LMVC_REQUIRE(d >= 0, UsageError, "negative tensor dim");
      n *= static_cast<size_t>(d);
    }
    v_.assign(n, S(0));
  }
  Tensor(std::initializer_list<int> dims) : Tensor(std::vector<int>(dims)) {}

  static Tensor zeros(std::vector<int> dims) { return Tensor(std::move(dims)); }
  static Tensor full(std::vector<int> dims, S value) {
    Tensor t(std::move(dims));
    std::fill(t.v_.begin(), t.v_.end(), value);
    return t;
  }
  static Tensor scalar(S value) { return full({1}, value); }

  const std::vector<int>& dims() const { return dims_; }
  int rank() const { return static_cast<int>(dims_.size()); }
  int dim(int i) const { return dims_[static_cast<size_t>(i)]; }
  size_t size() const { return v_.size(); }
  bool empty() const { return v_.empty(); }

  // Rank-3 helpers.
  int channels() const { return dims_[0]; }
  int height() const { return dims_[1]; }
  int width() const { return dims_[2]; }

  S* data() { return v_.data(); }
  const S* data() const { return v_.data(); }
  S& operator[](size_t i) { return v_[i]; }
  const S& operator[](size_t i) const { return v_[i]; }

  S& at(int c, int y, int x) {
    return v_[(static_cast<size_t>(c) * dims_[1] + y) * dims_[2] + x];
  }
  const S& at(int c, int y, int x) const {
    return v_[(static_cast<size_t>(c) * dims_[1] + y) * dims_[2] + x];
  }

  bool same_dims(const Tensor& o) const { return dims_ == o.dims_; }

  void fill(S value) { std::fill(v_.begin(), v_.end(), value); }

  template <typename T>
  Tensor<T> cast() const {
    Tensor<T> out(dims_);
    for (size_t i = 0; i < v_.size(); ++i) out[i] = static_cast<T>(v_[i]);
    return out;
  }

  bool all_finite() const {
    for (S x : v_)
      if (!std::isfinite(static_cast<double>(x))) return false;
    return true;
  }

  double sum() const {
    double acc = 0.0;
    for (S x : v_) acc += static_cast<double>(x);
    return acc;
  }

  double abs_max() const {
    double m = 0.0;
    for (S x : v_) m = std::max(m, std::abs(static_cast<double>(x)));
    return m;
  }

 private:
  std::vector<int> dims_;
  std::vector<S> v_;
};

template <typename S>
inline double max_abs_diff(const Tensor<S>& a, const Tensor<S>& b) {
  LMVC_REQUIRE(a.same_dims(b), UsageError, "max_abs_diff: dim mismatch");
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::abs(static_cast<double>(a[i]) - static_cast<double>(b[i])));
  return m;
}

template <typename S>
inline bool bit_equal(const Tensor<S>& a, const Tensor<S>& b) {
  if (!a.same_dims(b)) return false;
  for (size_t i = 0; i < a.size(); ++i)
    if (a[i] != b[i]) return false;
  return true;
}

}  // namespace lmvc
