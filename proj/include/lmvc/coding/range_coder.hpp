// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cstdint>
#include <vector>

#include "lmvc/core/check.hpp"

namespace lmvc {

// Byte-oriented carry-propagating range coder (LZMA style). Integer-only
// arithmetic: given identical cumulative-frequency tables the byte stream is
// identical on every platform. Cumulative totals must not exceed 1<<16.

constexpr uint32_t kRcTopBits = 24;
constexpr uint32_t kRcTop = 1u << kRcTopBits;
constexpr uint32_t kFreqTotalBits = 16;
constexpr uint32_t kFreqTotal = 1u << kFreqTotalBits;

class RangeEncoder {
 public:
  // cum/freq from a CDF with total `tot`; requires freq > 0.
  void encode(uint32_t cum, uint32_t freq, uint32_t tot) {
    LMVC_REQUIRE(freq > 0 && cum + freq <= tot && tot <= kFreqTotal, CoderError,
                 "range encoder: bad frequency interval");
    uint32_t r = range_ / tot;
    low_ += uint64_t(r) * cum;
    if (cum + freq == tot)
      range_ -= r * cum;
    else
      range_ = r * freq;
    while (range_ < kRcTop) {
      range_ <<= 8;
      shift_low();
    }
  }

  std::vector<uint8_t> finish() {
    for (int i = 0; i < 5; ++i) shift_low();
    return std::move(out_);
  }

  size_t size_bytes() const { return out_.size() + 5; }  // incl. pending flush

 private:
  void shift_low() {
    if (uint32_t(low_ >> 32) != 0 || uint32_t(low_) < 0xFF000000u) {
      uint8_t carry = uint8_t(low_ >> 32);
      if (!first_) out_.push_back(uint8_t(cache_ + carry));
      for (; pending_ > 0; --pending_) out_.push_back(uint8_t(0xFF + carry));
      cache_ = uint8_t(uint32_t(low_) >> 24);
      first_ = false;
    } else {
      ++pending_;
    }
    low_ = uint32_t(uint32_t(low_) << 8);  // top byte consumed above
  }

  uint64_t low_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint8_t cache_ = 0;
  uint64_t pending_ = 0;
  bool first_ = true;
  std::vector<uint8_t> out_;
};

class RangeDecoder {
 public:
  explicit RangeDecoder(const std::vector<uint8_t>& bytes) : bytes_(bytes) {
    for (int i = 0; i < 4; ++i) code_ = (code_ << 8) | next_byte();
  }

  // Returns a value in [0, tot); caller maps it to a symbol via its CDF and
  // then confirms with decode_update.
  uint32_t decode_freq(uint32_t tot) {
    r_ = range_ / tot;
    uint32_t f = uint32_t(code_ / r_);
    return f >= tot ? tot - 1 : f;
  }

  void decode_update(uint32_t cum, uint32_t freq, uint32_t tot) {
    code_ -= uint64_t(r_) * cum;
    if (cum + freq == tot)
      range_ -= r_ * cum;
    else
      range_ = r_ * freq;
    while (range_ < kRcTop) {
      code_ = (code_ << 8) | next_byte();
      range_ <<= 8;
    }
  }

  bool overran() const { return overrun_; }

 private:
  uint8_t next_byte() {
    if (pos_ < bytes_.size()) return bytes_[pos_++];
    overrun_ = true;
    return 0;
  }

  const std::vector<uint8_t>& bytes_;
  size_t pos_ = 0;
  uint64_t code_ = 0;
  uint32_t range_ = 0xFFFFFFFFu;
  uint32_t r_ = 1;
  bool overrun_ = false;
};

// Quantizes a pmf over n bins to integer frequencies summing exactly to
// kFreqTotal with every bin >= 1, deterministically.
inline std::vector<uint32_t> quantize_pmf(const std::vector<double>& pmf) {
  const size_t n = pmf.size();
  LMVC_REQUIRE(n >= 1 && n < kFreqTotal, CoderError, "quantize_pmf: bad bin count");
  const double scale = double(kFreqTotal - n);
  std::vector<uint32_t> freq(n);
  int64_t total = 0;
  for (size_t i = 0; i < n; ++i) {
    double p = pmf[i] < 0.0 ? 0.0 : pmf[i];
    freq[i] = uint32_t(1 + int64_t(p * scale + 0.5));
    total += freq[i];
  }
  int64_t diff = int64_t(kFreqTotal) - total;
  while (diff != 0) {
    // push the remainder onto the largest bin; drain from largest when over
    size_t arg = 0;
    for (size_t i = 1; i < n; ++i)
      if (freq[i] > freq[arg]) arg = i;
    if (diff > 0) {
      freq[arg] += uint32_t(diff);
      diff = 0;
    } else {
      int64_t take = std::min<int64_t>(-diff, int64_t(freq[arg]) - 1);
      LMVC_REQUIRE(take > 0, CoderError, "quantize_pmf: cannot normalize");
      freq[arg] -= uint32_t(take);
      diff += take;
    }
  }
  return freq;
}

// cdf[i] = sum of freq[0..i); cdf[n] = kFreqTotal.
inline std::vector<uint32_t> freq_to_cdf(const std::vector<uint32_t>& freq) {
  std::vector<uint32_t> cdf(freq.size() + 1, 0);
  for (size_t i = 0; i < freq.size(); ++i) cdf[i + 1] = cdf[i] + freq[i];
  return cdf;
}

inline int cdf_find_symbol(const std::vector<uint32_t>& cdf, uint32_t f) {
  // binary search for the interval containing f
  size_t lo = 0, hi = cdf.size() - 1;
  while (hi - lo > 1) {
    size_t mid = (lo + hi) / 2;
    if (cdf[mid] <= f)
      lo = mid;
    else
      hi = mid;
  }
  return int(lo);
}

}  // namespace lmvc
