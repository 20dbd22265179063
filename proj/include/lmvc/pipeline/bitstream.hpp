// Copyright (c) the lmvc authors. All rights reserved.
//
// Use of this source code is governed by the Apache-2.0 license
// that can be found in the LICENSE file.

#pragma once

#include <array>
#include <cstring>
#include <map>
#include <tuple>
#include <vector>

#include "lmvc/core/check.hpp"

namespace lmvc {

// Bitstream container. Little endian throughout:
//   magic "LMVC", version u8,
//   width u32, height u32 (pre-padding), views u8, frames u32,
//   intra_period u16, rate_index u8, view_order u8[views],
//   then packets until EOF:
//     view_id u8, poc u32, kind u8, length u32, payload[length]
// A packet payload starts with a crc32 of the coded bytes that follow, so
// corruption is detected instead of silently decoding garbage.

enum class PacketKind : uint8_t {
  iframe = 0,
  motion_hyper = 1,
  motion_main = 2,
  ctx_hyper = 3,
  ctx_main = 4,
};

struct BitstreamPacket {
  int view_id = 0;
  int poc = 0;
  PacketKind kind = PacketKind::iframe;
  std::vector<uint8_t> payload;
};

struct StreamHeader {
  int width = 0, height = 0;  // original dims
  int views = 1;
  int frames = 0;
  int intra_period = 32;
  int rate_index = 0;
  std::vector<int> view_order{0};
};

inline uint32_t crc32(const uint8_t* data, size_t n) {
  static const auto table = [] {
    std::array<uint32_t, 256> t{};
    for (uint32_t i = 0; i < 256; ++i) {
      uint32_t c = i;
      for (int k = 0; k < 8; ++k) c = (c & 1) ? 0xEDB88320u ^ (c >> 1) : c >> 1;
      t[i] = c;
    }
    return t;
  }();
  uint32_t c = 0xFFFFFFFFu;
  for (size_t i = 0; i < n; ++i) c = table[(c ^ data[i]) & 0xFF] ^ (c >> 8);
  return c ^ 0xFFFFFFFFu;
}

namespace wire {

inline void put_u8(std::vector<uint8_t>& out, uint8_t v) { out.push_back(v); }
inline void put_u16(std::vector<uint8_t>& out, uint16_t v) {
  out.push_back(uint8_t(v));
  out.push_back(uint8_t(v >> 8));
}
inline void put_u32(std::vector<uint8_t>& out, uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(uint8_t(v >> (8 * i)));
}

struct Reader {
  const std::vector<uint8_t>& b;
  size_t pos = 0;
  bool at_end() const { return pos >= b.size(); }
  size_t left() const { return b.size() - pos; }
  uint8_t u8() {
    if (left() < 1) throw DecodeError("truncated stream", -1, -1, -1);
    return b[pos++];
  }
  uint16_t u16() { return uint16_t(u8()) | uint16_t(u8()) << 8; }
  uint32_t u32() {
    uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= uint32_t(u8()) << (8 * i);
    return v;
  }
  std::vector<uint8_t> bytes(size_t n) {
    if (left() < n) throw DecodeError("truncated payload", -1, -1, -1);
    std::vector<uint8_t> out(b.begin() + std::ptrdiff_t(pos),
                             b.begin() + std::ptrdiff_t(pos + n));
    pos += n;
    return out;
  }
};

}  // namespace wire

// Wraps coded bytes with their checksum.
inline std::vector<uint8_t> seal_payload(const std::vector<uint8_t>& coded) {
  std::vector<uint8_t> out;
  wire::put_u32(out, crc32(coded.data(), coded.size()));
  out.insert(out.end(), coded.begin(), coded.end());
  return out;
}

inline std::vector<uint8_t> unseal_payload(const std::vector<uint8_t>& payload,
                                           int view, int poc, int kind) {
  if (payload.size() < 4) throw DecodeError("payload shorter than checksum", view, poc, kind);
  uint32_t stored = uint32_t(payload[0]) | uint32_t(payload[1]) << 8 |
                    uint32_t(payload[2]) << 16 | uint32_t(payload[3]) << 24;
  std::vector<uint8_t> coded(payload.begin() + 4, payload.end());
  if (crc32(coded.data(), coded.size()) != stored)
    throw DecodeError("payload checksum mismatch", view, poc, kind);
  return coded;
}

// Two length-prefixed substreams in one buffer (intra packets carry the main
// and hyper substreams together).
inline std::vector<uint8_t> join_substreams(const std::vector<uint8_t>& main,
                                            const std::vector<uint8_t>& hyper) {
  std::vector<uint8_t> out;
  wire::put_u32(out, uint32_t(main.size()));
  out.insert(out.end(), main.begin(), main.end());
  wire::put_u32(out, uint32_t(hyper.size()));
  out.insert(out.end(), hyper.begin(), hyper.end());
  return out;
}

inline std::pair<std::vector<uint8_t>, std::vector<uint8_t>> split_substreams(
    const std::vector<uint8_t>& joined, int view, int poc, int kind) {
  wire::Reader r{joined};
  try {
    auto main = r.bytes(r.u32());
    auto hyper = r.bytes(r.u32());
    return {std::move(main), std::move(hyper)};
  } catch (const DecodeError&) {
    throw DecodeError("bad substream framing", view, poc, kind);
  }
}

inline std::vector<uint8_t> write_stream(const StreamHeader& h,
                                         const std::vector<BitstreamPacket>& packets) {
  std::vector<uint8_t> out{'L', 'M', 'V', 'C'};
  wire::put_u8(out, 1);  // version
  wire::put_u32(out, uint32_t(h.width));
  wire::put_u32(out, uint32_t(h.height));
  wire::put_u8(out, uint8_t(h.views));
  wire::put_u32(out, uint32_t(h.frames));
  wire::put_u16(out, uint16_t(h.intra_period));
  wire::put_u8(out, uint8_t(h.rate_index));
  for (int v : h.view_order) wire::put_u8(out, uint8_t(v));
  for (const auto& p : packets) {
    wire::put_u8(out, uint8_t(p.view_id));
    wire::put_u32(out, uint32_t(p.poc));
    wire::put_u8(out, uint8_t(p.kind));
    wire::put_u32(out, uint32_t(p.payload.size()));
    out.insert(out.end(), p.payload.begin(), p.payload.end());
  }
  return out;
}

struct ParsedStream {
  StreamHeader header;
  std::vector<BitstreamPacket> packets;
};

inline ParsedStream parse_stream(const std::vector<uint8_t>& bytes) {
  wire::Reader r{bytes};
  if (r.left() < 5) throw DecodeError("stream too short", -1, -1, -1);
  if (!(r.u8() == 'L' && r.u8() == 'M' && r.u8() == 'V' && r.u8() == 'C'))
    throw DecodeError("bad magic", -1, -1, -1);
  uint8_t version = r.u8();
  if (version != 1) throw DecodeError("unsupported version", -1, -1, -1);
  ParsedStream s;
  s.header.width = int(r.u32());
  s.header.height = int(r.u32());
  s.header.views = int(r.u8());
  s.header.frames = int(r.u32());
  s.header.intra_period = int(r.u16());
  s.header.rate_index = int(r.u8());
  s.header.view_order.clear();
  for (int v = 0; v < s.header.views; ++v) s.header.view_order.push_back(int(r.u8()));
  while (!r.at_end()) {
    BitstreamPacket p;
    p.view_id = int(r.u8());
    p.poc = int(r.u32());
    p.kind = PacketKind(r.u8());
    uint32_t len = r.u32();
    if (r.left() < len)
      throw DecodeError("truncated payload", p.view_id, p.poc, int(p.kind));
    p.payload = r.bytes(len);
    s.packets.push_back(std::move(p));
  }
  return s;
}

// Filters the stream down to the independent view. The result decodes with a
// single-view decoder to reconstructions bit-identical to view 0 of the full
// decode, and the operation is idempotent.
inline std::vector<uint8_t> extract_base_view(const std::vector<uint8_t>& bytes) {
  ParsedStream s = parse_stream(bytes);
  StreamHeader h = s.header;
  h.views = 1;
  h.view_order = {0};
  std::vector<BitstreamPacket> kept;
  for (auto& p : s.packets)
    if (p.view_id == 0) kept.push_back(std::move(p));
  return write_stream(h, kept);
}

}  // namespace lmvc
