// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace lmvc {

// Invalid or inconsistent user-supplied configuration.
class ConfigError : public std::invalid_argument {
 public:
  explicit ConfigError(const std::string& msg) : std::invalid_argument(msg) {}
};

// API called in a way its contract forbids.
class UsageError : public std::logic_error {
 public:
  explicit UsageError(const std::string& msg) : std::logic_error(msg) {}
};

// Numeric parameter outside its admissible range.
class ParamError : public std::invalid_argument {
 public:
  explicit ParamError(const std::string& msg) : std::invalid_argument(msg) {}
};

// Internal dependency violation while driving the codec.
class PipelineError : public std::runtime_error {
 public:
  explicit PipelineError(const std::string& msg) : std::runtime_error(msg) {}
};

// Entropy-coder level failure (symbol range, substream state).
class CoderError : public std::runtime_error {
 public:
  explicit CoderError(const std::string& msg) : std::runtime_error(msg) {}
};

// Bitstream decode failure; identifies the offending packet.
class DecodeError : public std::runtime_error {
 public:
  DecodeError(const std::string& msg, int view_id, int64_t poc, int kind)
      : std::runtime_error(msg + " (view=" + std::to_string(view_id) +
                           " poc=" + std::to_string(poc) +
                           " kind=" + std::to_string(kind) + ")"),
        view_id(view_id),
        poc(poc),
        kind(kind) {}
  int view_id;
  int64_t poc;
  int kind;
};

#define LMVC_REQUIRE(cond, Exc, msg) \
  do {                               \
    if (!(cond)) throw Exc(msg);     \
  } while (0)

}  // namespace lmvc
