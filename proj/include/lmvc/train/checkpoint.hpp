// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cstring>
#include <fstream>

#include "lmvc/core/optim.hpp"
#include "lmvc/model/codec.hpp"

namespace lmvc {

// Versioned checkpoint container: named float32 parameter arrays, a config
// hash, and optionally the optimizer moments. Parameters are stored as f32
// regardless of the working scalar type.

namespace ckpt_detail {

inline void put_u32(std::ofstream& os, uint32_t v) {
  os.write(reinterpret_cast<const char*>(&v), 4);
}
inline void put_u64(std::ofstream& os, uint64_t v) {
  os.write(reinterpret_cast<const char*>(&v), 8);
}
inline uint32_t get_u32(std::ifstream& is) {
  uint32_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 4);
  return v;
}
inline uint64_t get_u64(std::ifstream& is) {
  uint64_t v = 0;
  is.read(reinterpret_cast<char*>(&v), 8);
  return v;
}

template <typename S>
void put_tensor(std::ofstream& os, const Tensor<S>& t) {
  os.put(char(t.rank()));
  for (int i = 0; i < t.rank(); ++i) put_u32(os, uint32_t(t.dim(i)));
  for (size_t i = 0; i < t.size(); ++i) {
    float f = float(t[i]);
    os.write(reinterpret_cast<const char*>(&f), 4);
  }
}

template <typename S>
Tensor<S> get_tensor(std::ifstream& is) {
  int rank = is.get();
  std::vector<int> dims;
  for (int i = 0; i < rank; ++i) dims.push_back(int(get_u32(is)));
  Tensor<S> t(dims);
  for (size_t i = 0; i < t.size(); ++i) {
    float f = 0;
    is.read(reinterpret_cast<char*>(&f), 4);
    t[i] = S(f);
  }
  return t;
}

inline void put_name(std::ofstream& os, const std::string& name) {
  put_u32(os, uint32_t(name.size()));
  os.write(name.data(), std::streamsize(name.size()));
}

inline std::string get_name(std::ifstream& is) {
  uint32_t n = get_u32(is);
  std::string s(n, '\0');
  is.read(s.data(), std::streamsize(n));
  return s;
}

}  // namespace ckpt_detail

constexpr char kCkptMagic[8] = {'L', 'M', 'V', 'C', 'C', 'K', 'P', 'T'};

template <typename S>
void save_checkpoint(const std::string& path, const LmvcModel<S>& model,
                     const nn::AdamW<S>* opt = nullptr) {
  using namespace ckpt_detail;
  std::ofstream os(path, std::ios::binary);
  LMVC_REQUIRE(os.good(), UsageError, "save_checkpoint: cannot open " + path);
  os.write(kCkptMagic, 8);
  put_u32(os, 1);  // version
  put_u64(os, model.config().hash());
  auto params = model.named_params();
  put_u32(os, uint32_t(params.size()));
  for (const auto& p : params) {
    put_name(os, p.name);
    put_tensor(os, p.var->val);
  }
  os.put(opt ? char(1) : char(0));
  if (opt) {
    auto* mut = const_cast<nn::AdamW<S>*>(opt);
    put_u64(os, uint64_t(mut->step_count()));
    put_u32(os, uint32_t(mut->params().size()));
    for (const auto& p : mut->params()) {
      put_name(os, p.name);
      put_tensor(os, mut->moment1()[p.name]);
      put_tensor(os, mut->moment2()[p.name]);
    }
  }
}

template <typename S>
struct LoadedCheckpoint {
  bool has_optimizer = false;
  int64_t opt_step = 0;
  std::map<std::string, Tensor<S>> moment1, moment2;
};

template <typename S>
LoadedCheckpoint<S> load_checkpoint(const std::string& path, LmvcModel<S>& model) {
  using namespace ckpt_detail;
  std::ifstream is(path, std::ios::binary);
  LMVC_REQUIRE(is.good(), UsageError, "load_checkpoint: cannot open " + path);
  char magic[8];
  is.read(magic, 8);
  LMVC_REQUIRE(std::memcmp(magic, kCkptMagic, 8) == 0, UsageError,
               "load_checkpoint: bad magic");
  LMVC_REQUIRE(get_u32(is) == 1, UsageError, "load_checkpoint: unsupported version");
  uint64_t hash = get_u64(is);
  LMVC_REQUIRE(hash == model.config().hash(), ConfigError,
               "load_checkpoint: config hash mismatch");
  auto params = model.named_params();
  std::map<std::string, nn::Var<S>> by_name;
  for (auto& p : params) by_name[p.name] = p.var;
  uint32_t n = get_u32(is);
  LMVC_REQUIRE(size_t(n) == params.size(), ConfigError,
               "load_checkpoint: parameter count mismatch");
  for (uint32_t i = 0; i < n; ++i) {
    std::string name = get_name(is);
    auto it = by_name.find(name);
    LMVC_REQUIRE(it != by_name.end(), ConfigError,
                 "load_checkpoint: unknown parameter " + name);
    Tensor<S> t = get_tensor<S>(is);
    LMVC_REQUIRE(t.dims() == it->second->val.dims(), ConfigError,
                 "load_checkpoint: shape mismatch for " + name);
    it->second->val = std::move(t);
  }
  LoadedCheckpoint<S> lc;
  lc.has_optimizer = is.get() == 1;
  if (lc.has_optimizer) {
    lc.opt_step = int64_t(get_u64(is));
    uint32_t m = get_u32(is);
    for (uint32_t i = 0; i < m; ++i) {
      std::string name = get_name(is);
      lc.moment1[name] = get_tensor<S>(is);
      lc.moment2[name] = get_tensor<S>(is);
    }
  }
  return lc;
}

}  // namespace lmvc
