// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/websocket.hpp"

#include <openssl/evp.h>
#include <openssl/sha.h>

#include <algorithm>
#include <cctype>
#include <sstream>

#include "dprt/error.hpp"

namespace dprt::ws {

namespace {

constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";

std::string lower(std::string_view s)
{
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(),
      [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string_view trim(std::string_view s)
{
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t'))
    s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
    s.remove_suffix(1);
  return s;
}

struct Head
{
  std::string startLine;
  std::vector<std::pair<std::string, std::string>> headers; // lowercase names
};

Head parseHead(std::string_view text)
{
  Head h;
  bool first = true;
  while (!text.empty()) {
    const size_t eol = text.find('\n');
    std::string_view line = trim(text.substr(0, eol));
    text = eol == std::string_view::npos ? std::string_view{} : text.substr(eol + 1);
    if (first) {
      h.startLine = std::string(line);
      first = false;
      continue;
    }
    if (line.empty())
      break;
    const size_t colon = line.find(':');
    if (colon == std::string_view::npos)
      continue;
    h.headers.emplace_back(lower(trim(line.substr(0, colon))),
        std::string(trim(line.substr(colon + 1))));
  }
  return h;
}

const std::string *header(const Head &h, std::string_view name)
{
  for (const auto &[k, v] : h.headers) {
    if (k == name)
      return &v;
  }
  return nullptr;
}

bool hasToken(const std::string *value, std::string_view token)
{
  if (!value)
    return false;
  std::stringstream ss(lower(*value));
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (trim(item) == token)
      return true;
  }
  return false;
}

} // namespace

std::string acceptKey(std::string_view clientKey)
{
  std::string input(clientKey);
  input += kGuid;
  unsigned char digest[SHA_DIGEST_LENGTH];
  unsigned int len = 0;
  EVP_Digest(input.data(), input.size(), digest, &len, EVP_sha1(), nullptr);
  unsigned char b64[4 * ((SHA_DIGEST_LENGTH + 2) / 3) + 1];
  const int n = EVP_EncodeBlock(b64, digest, static_cast<int>(len));
  return std::string(reinterpret_cast<const char *>(b64), static_cast<size_t>(n));
}

std::optional<std::string> parseUpgradeRequest(std::string_view text)
{
  const Head h = parseHead(text);
  if (h.startLine.rfind("GET ", 0) != 0)
    return std::nullopt;
  if (!hasToken(header(h, "upgrade"), "websocket")
      || !hasToken(header(h, "connection"), "upgrade"))
    return std::nullopt;
  const std::string *version = header(h, "sec-websocket-version");
  if (!version || *version != "13")
    return std::nullopt;
  const std::string *key = header(h, "sec-websocket-key");
  if (!key || key->empty())
    return std::nullopt;
  return *key;
}

std::string upgradeResponse(std::string_view clientKey)
{
  return "HTTP/1.1 101 Switching Protocols\r\n"
         "Upgrade: websocket\r\n"
         "Connection: Upgrade\r\n"
         "Sec-WebSocket-Accept: "
      + acceptKey(clientKey) + "\r\n\r\n";
}

std::string upgradeRequest(std::string_view host, std::string_view path,
    std::string_view clientKey)
{
  return "GET " + std::string(path) + " HTTP/1.1\r\nHost: " + std::string(host)
      + "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
        "Sec-WebSocket-Version: 13\r\nSec-WebSocket-Key: "
      + std::string(clientKey) + "\r\n\r\n";
}

bool checkUpgradeResponse(std::string_view text, std::string_view clientKey)
{
  const Head h = parseHead(text);
  if (h.startLine.rfind("HTTP/1.1 101", 0) != 0)
    return false;
  const std::string *accept = header(h, "sec-websocket-accept");
  return accept && *accept == acceptKey(clientKey);
}

Bytes encodeFrame(Opcode opcode, ByteView payload,
    std::optional<std::array<std::uint8_t, 4>> mask, bool fin)
{
  Bytes out;
  out.reserve(payload.size() + 14);
  out.push_back(static_cast<std::uint8_t>((fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(opcode)));
  const std::uint8_t maskBit = mask ? 0x80 : 0x00;
  const std::uint64_t n = payload.size();
  if (n < 126) {
    out.push_back(static_cast<std::uint8_t>(maskBit | n));
  } else if (n <= 0xffff) {
    out.push_back(maskBit | 126);
    out.push_back(static_cast<std::uint8_t>(n >> 8));
    out.push_back(static_cast<std::uint8_t>(n));
  } else {
    out.push_back(maskBit | 127);
    for (int i = 7; i >= 0; --i)
      out.push_back(static_cast<std::uint8_t>(n >> (8 * i)));
  }
  if (mask) {
    out.insert(out.end(), mask->begin(), mask->end());
    for (size_t i = 0; i < payload.size(); ++i)
      out.push_back(payload[i] ^ (*mask)[i % 4]);
  } else {
    out.insert(out.end(), payload.begin(), payload.end());
  }
  return out;
}

std::optional<Frame> FrameParser::next()
{
  const Bytes &b = m_buffer;
  if (b.size() < 2)
    return std::nullopt;
  if (b[0] & 0x70)
    throw DecodeError("websocket: reserved bits set", m_offset);
  const auto opcode = static_cast<Opcode>(b[0] & 0x0f);
  switch (opcode) {
  case Opcode::Continuation:
  case Opcode::Text:
  case Opcode::Binary:
  case Opcode::Close:
  case Opcode::Ping:
  case Opcode::Pong:
    break;
  default:
    throw DecodeError("websocket: unknown opcode", m_offset);
  }
  const bool masked = (b[1] & 0x80) != 0;
  if (m_requireMask && !masked)
    throw DecodeError("websocket: unmasked client frame", m_offset + 1);
  std::uint64_t len = b[1] & 0x7f;
  size_t pos = 2;
  if (len == 126) {
    if (b.size() < 4)
      return std::nullopt;
    len = (std::uint64_t(b[2]) << 8) | b[3];
    pos = 4;
  } else if (len == 127) {
    if (b.size() < 10)
      return std::nullopt;
    len = 0;
    for (int i = 0; i < 8; ++i)
      len = (len << 8) | b[2 + i];
    pos = 10;
  }
  if (len > kMaxPayload)
    throw DecodeError("websocket: frame too large", m_offset + 1);
  std::array<std::uint8_t, 4> mask{};
  if (masked) {
    if (b.size() < pos + 4)
      return std::nullopt;
    std::copy_n(b.begin() + static_cast<std::ptrdiff_t>(pos), 4, mask.begin());
    pos += 4;
  }
  if (b.size() < pos + len)
    return std::nullopt;
  Frame f;
  f.fin = (b[0] & 0x80) != 0;
  f.opcode = opcode;
  f.payload.assign(b.begin() + static_cast<std::ptrdiff_t>(pos),
      b.begin() + static_cast<std::ptrdiff_t>(pos + len));
  if (masked) {
    for (size_t i = 0; i < f.payload.size(); ++i)
      f.payload[i] ^= mask[i % 4];
  }
  const size_t total = pos + static_cast<size_t>(len);
  m_buffer.erase(m_buffer.begin(), m_buffer.begin() + static_cast<std::ptrdiff_t>(total));
  m_offset += total;
  return f;
}

} // namespace dprt::ws
