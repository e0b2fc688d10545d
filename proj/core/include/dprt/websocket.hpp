// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "dprt/wire.hpp"

// Minimal RFC 6455 support: the HTTP upgrade handshake and the frame layer.
// The service carries its DPRT-framed byte stream inside binary messages.
namespace dprt::ws {

enum class Opcode : std::uint8_t
{
  Continuation = 0x0,
  Text = 0x1,
  Binary = 0x2,
  Close = 0x8,
  Ping = 0x9,
  Pong = 0xA
};

// Sec-WebSocket-Accept value for a client key.
std::string acceptKey(std::string_view clientKey);

// Parses a complete request head (through the blank line). Returns the
// Sec-WebSocket-Key, or nullopt if it is not a valid upgrade request.
std::optional<std::string> parseUpgradeRequest(std::string_view head);
std::string upgradeResponse(std::string_view clientKey);
std::string upgradeRequest(std::string_view host, std::string_view path,
    std::string_view clientKey);
// Validates a server response head against the key the client sent.
bool checkUpgradeResponse(std::string_view head, std::string_view clientKey);

struct Frame
{
  bool fin{true};
  Opcode opcode{Opcode::Binary};
  Bytes payload; // unmasked

  friend bool operator==(const Frame &, const Frame &) = default;
};

// Servers send unmasked frames; clients must pass a mask.
Bytes encodeFrame(Opcode opcode, ByteView payload,
    std::optional<std::array<std::uint8_t, 4>> mask = std::nullopt, bool fin = true);

// Incremental frame parser. Throws DecodeError on protocol violations,
// including unmasked frames when requireMask is set.
class FrameParser
{
 public:
  explicit FrameParser(bool requireMask) : m_requireMask(requireMask) {}

  void feed(ByteView data)
  {
    m_buffer.insert(m_buffer.end(), data.begin(), data.end());
  }
  std::optional<Frame> next();

 private:
  bool m_requireMask;
  Bytes m_buffer;
  size_t m_offset{0};
};

} // namespace dprt::ws
