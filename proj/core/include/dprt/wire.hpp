// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace dprt {

using Bytes = std::vector<std::uint8_t>;
using ByteView = std::span<const std::uint8_t>;

enum class MsgKind : std::uint8_t
{
  RayBatch = 1,
  Tile = 2,
  Barrier = 3,
  Control = 4,
  CameraUpdate = 5,
  Frame = 6,
};

bool isKnownMsgKind(std::uint8_t raw);
std::string_view toString(MsgKind kind);

// Every framed message on a byte stream starts with this 9-byte header:
// "DPRT", one msgKind byte, then the payload length as u32 little-endian.
inline constexpr std::array<std::uint8_t, 4> kMagic{'D', 'P', 'R', 'T'};
inline constexpr size_t kFrameHeaderSize = 9;
// Upper bound accepted by decoders; larger lengths are treated as corrupt.
inline constexpr std::uint32_t kMaxPayload = 1u << 30;

struct FrameHeader
{
  MsgKind kind;
  std::uint32_t length;
};

void appendFrameHeader(Bytes &out, MsgKind kind, std::uint32_t length);
Bytes frameMessage(MsgKind kind, ByteView payload);

// Parses a header at data[0..9). `streamOffset` is added to the offset
// reported in a DecodeError so errors locate the byte in the whole stream.
FrameHeader parseFrameHeader(ByteView data, size_t streamOffset = 0);

// Little-endian fixed-width writer.
class ByteWriter
{
 public:
  explicit ByteWriter(Bytes &out) : m_out(out) {}

  void u8(std::uint8_t v)
  {
    m_out.push_back(v);
  }
  void u32(std::uint32_t v);
  void u64(std::uint64_t v);
  void f64(double v);
  void bytes(ByteView v)
  {
    m_out.insert(m_out.end(), v.begin(), v.end());
  }

 private:
  Bytes &m_out;
};

// Little-endian reader; throws DecodeError on overrun.
class ByteReader
{
 public:
  explicit ByteReader(ByteView data, size_t baseOffset = 0)
      : m_data(data), m_base(baseOffset)
  {}

  std::uint8_t u8();
  std::uint32_t u32();
  std::uint64_t u64();
  double f64();
  ByteView bytes(size_t n);

  size_t position() const
  {
    return m_pos;
  }
  size_t remaining() const
  {
    return m_data.size() - m_pos;
  }

 private:
  void need(size_t n) const;

  ByteView m_data;
  size_t m_base;
  size_t m_pos{0};
};

// 64-bit FNV-1a; stable across builds, used for parameter digests.
std::uint64_t fnv1a64(ByteView data, std::uint64_t seed = 0xcbf29ce484222325ull);

inline ByteView asBytes(std::string_view s)
{
  return {reinterpret_cast<const std::uint8_t *>(s.data()), s.size()};
}
inline Bytes toBytes(std::string_view s)
{
  return Bytes(s.begin(), s.end());
}
inline std::string toString(ByteView b)
{
  return std::string(b.begin(), b.end());
}

} // namespace dprt
