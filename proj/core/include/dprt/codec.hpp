// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <deque>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "dprt/geom.hpp"
#include "dprt/wire.hpp"

namespace dprt {

// Client-to-server camera request. Payload is a JSON object with keys
// pos, dir, up, fovy, w, h.
struct CameraUpdateMessage
{
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 viewDir{0.0, 0.0, -1.0};
  Vec3 up{0.0, 1.0, 0.0};
  double fovY{60.0}; // degrees
  std::uint32_t requestWidth{256};
  std::uint32_t requestHeight{256};

  static constexpr std::uint32_t kMinSize = 16;
  static constexpr std::uint32_t kMaxSize = 8192;

  // Throws ValidationError.
  void validate() const;
  CameraSpec toCamera() const;

  friend bool operator==(const CameraUpdateMessage &, const CameraUpdateMessage &) = default;
};

enum class PixelFormat : std::uint8_t
{
  Rgb8 = 0
};

// Server-to-client image. Payload: u32 width, u32 height, u8 format,
// u32 sequence, u32 renderMillis (all little-endian), then the pixels.
struct FrameMessage
{
  std::uint32_t width{0};
  std::uint32_t height{0};
  PixelFormat format{PixelFormat::Rgb8};
  std::uint32_t sequence{0};
  std::uint32_t renderMillis{0};
  std::vector<std::uint8_t> pixels; // row-major, top row first

  static constexpr size_t kHeaderSize = 17;

  friend bool operator==(const FrameMessage &, const FrameMessage &) = default;
};

// Out-of-band status. Payload is a JSON object {"status": ..., "message": ...}.
struct ControlMessage
{
  std::string status; // "busy", "error"
  std::string message;

  friend bool operator==(const ControlMessage &, const ControlMessage &) = default;
};

using Message = std::variant<CameraUpdateMessage, FrameMessage, ControlMessage>;

Bytes encodeMessage(const Message &msg);
// Decodes exactly one framed message; trailing bytes are an error.
Message decodeMessage(ByteView data);

// Incremental decoder for a byte stream carrying back-to-back messages.
// Errors carry the offset within the whole stream.
class MessageDecoder
{
 public:
  // Throws DecodeError as soon as the buffered bytes cannot be a valid
  // prefix (bad magic, unknown kind, oversized length).
  void feed(ByteView data);
  std::optional<Message> next();

  // Bytes consumed so far by complete messages.
  size_t offset() const
  {
    return m_offset;
  }
  size_t buffered() const
  {
    return m_buffer.size();
  }
  // Throws DecodeError if the stream ended inside a message.
  void finish() const;

 private:
  void checkPrefix() const;

  Bytes m_buffer;
  size_t m_offset{0};
};

} // namespace dprt
