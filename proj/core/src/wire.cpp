// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/wire.hpp"

#include <bit>
#include <cstring>

#include "dprt/error.hpp"

namespace dprt {

bool isKnownMsgKind(std::uint8_t raw)
{
  return raw >= static_cast<std::uint8_t>(MsgKind::RayBatch)
      && raw <= static_cast<std::uint8_t>(MsgKind::Frame);
}

std::string_view toString(MsgKind kind)
{
  switch (kind) {
  case MsgKind::RayBatch:
    return "RAY_BATCH";
  case MsgKind::Tile:
    return "TILE";
  case MsgKind::Barrier:
    return "BARRIER";
  case MsgKind::Control:
    return "CONTROL";
  case MsgKind::CameraUpdate:
    return "CAMERA_UPDATE";
  case MsgKind::Frame:
    return "FRAME";
  }
  return "UNKNOWN";
}

void appendFrameHeader(Bytes &out, MsgKind kind, std::uint32_t length)
{
  out.insert(out.end(), kMagic.begin(), kMagic.end());
  ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(kind));
  w.u32(length);
}

Bytes frameMessage(MsgKind kind, ByteView payload)
{
  Bytes out;
  out.reserve(kFrameHeaderSize + payload.size());
  appendFrameHeader(out, kind, static_cast<std::uint32_t>(payload.size()));
  out.insert(out.end(), payload.begin(), payload.end());
  return out;
}

FrameHeader parseFrameHeader(ByteView data, size_t streamOffset)
{
  for (size_t i = 0; i < kMagic.size(); ++i) {
    if (i >= data.size())
      throw DecodeError("truncated header", streamOffset + i);
    if (data[i] != kMagic[i])
      throw DecodeError("bad magic", streamOffset + i);
  }
  if (data.size() < 5)
    throw DecodeError("truncated header", streamOffset + data.size());
  if (!isKnownMsgKind(data[4]))
    throw DecodeError("unknown msgKind " + std::to_string(data[4]), streamOffset + 4);
  if (data.size() < kFrameHeaderSize)
    throw DecodeError("truncated header", streamOffset + data.size());
  ByteReader r(data.subspan(5, 4), streamOffset + 5);
  const std::uint32_t length = r.u32();
  if (length > kMaxPayload)
    throw DecodeError("length " + std::to_string(length) + " exceeds limit",
        streamOffset + 5);
  return {static_cast<MsgKind>(data[4]), length};
}

void ByteWriter::u32(std::uint32_t v)
{
  for (int i = 0; i < 4; ++i)
    m_out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::u64(std::uint64_t v)
{
  for (int i = 0; i < 8; ++i)
    m_out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

void ByteWriter::f64(double v)
{
  u64(std::bit_cast<std::uint64_t>(v));
}

void ByteReader::need(size_t n) const
{
  if (m_data.size() - m_pos < n)
    throw DecodeError("truncated payload", m_base + m_data.size());
}

std::uint8_t ByteReader::u8()
{
  need(1);
  return m_data[m_pos++];
}

std::uint32_t ByteReader::u32()
{
  need(4);
  std::uint32_t v = 0;
  for (int i = 0; i < 4; ++i)
    v |= std::uint32_t(m_data[m_pos + i]) << (8 * i);
  m_pos += 4;
  return v;
}

std::uint64_t ByteReader::u64()
{
  need(8);
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i)
    v |= std::uint64_t(m_data[m_pos + i]) << (8 * i);
  m_pos += 8;
  return v;
}

double ByteReader::f64()
{
  return std::bit_cast<double>(u64());
}

ByteView ByteReader::bytes(size_t n)
{
  need(n);
  ByteView out = m_data.subspan(m_pos, n);
  m_pos += n;
  return out;
}

std::uint64_t fnv1a64(ByteView data, std::uint64_t seed)
{
  std::uint64_t h = seed;
  for (auto b : data) {
    h ^= b;
    h *= 0x100000001b3ull;
  }
  return h;
}

} // namespace dprt
