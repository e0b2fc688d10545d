// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/codec.hpp"

#include "json.hpp"

#include "dprt/error.hpp"

namespace dprt {

using nlohmann::json;

namespace {

json vecJson(const Vec3 &v)
{
  return json::array({v.x, v.y, v.z});
}

Vec3 vecFrom(const json &j, const char *key, size_t offset)
{
  auto it = j.find(key);
  if (it == j.end() || !it->is_array() || it->size() != 3)
    throw DecodeError(std::string("camera update: '") + key + "' must be 3 numbers", offset);
  Vec3 v;
  for (int i = 0; i < 3; ++i) {
    if (!(*it)[i].is_number())
      throw DecodeError(std::string("camera update: '") + key + "' must be 3 numbers", offset);
    v[i] = (*it)[i].get<double>();
  }
  return v;
}

std::uint32_t dimFrom(const json &j, const char *key, size_t offset)
{
  auto it = j.find(key);
  if (it == j.end() || !it->is_number_unsigned() || it->get<std::uint64_t>() > UINT32_MAX)
    throw DecodeError(std::string("camera update: '") + key + "' must be an unsigned integer",
        offset);
  return it->get<std::uint32_t>();
}

Bytes payloadOf(const CameraUpdateMessage &m)
{
  json j = {{"pos", vecJson(m.position)}, {"dir", vecJson(m.viewDir)},
      {"up", vecJson(m.up)}, {"fovy", m.fovY}, {"w", m.requestWidth},
      {"h", m.requestHeight}};
  return toBytes(j.dump());
}

Bytes payloadOf(const FrameMessage &m)
{
  if (m.pixels.size() != size_t(m.width) * m.height * 3)
    throw UsageError("frame message: pixel count does not match width*height*3");
  Bytes out;
  out.reserve(FrameMessage::kHeaderSize + m.pixels.size());
  ByteWriter w(out);
  w.u32(m.width);
  w.u32(m.height);
  w.u8(static_cast<std::uint8_t>(m.format));
  w.u32(m.sequence);
  w.u32(m.renderMillis);
  w.bytes(m.pixels);
  return out;
}

Bytes payloadOf(const ControlMessage &m)
{
  json j = {{"status", m.status}, {"message", m.message}};
  return toBytes(j.dump());
}

json parseJsonPayload(ByteView payload, size_t offset, const char *what)
{
  try {
    json j = json::parse(payload.begin(), payload.end());
    if (!j.is_object())
      throw DecodeError(std::string(what) + ": payload is not a JSON object", offset);
    return j;
  } catch (const json::exception &e) {
    throw DecodeError(std::string(what) + ": invalid JSON (" + e.what() + ")", offset);
  }
}

Message decodePayload(MsgKind kind, ByteView payload, size_t offset)
{
  switch (kind) {
  case MsgKind::CameraUpdate: {
    const json j = parseJsonPayload(payload, offset, "camera update");
    CameraUpdateMessage m;
    m.position = vecFrom(j, "pos", offset);
    m.viewDir = vecFrom(j, "dir", offset);
    m.up = vecFrom(j, "up", offset);
    auto f = j.find("fovy");
    if (f == j.end() || !f->is_number())
      throw DecodeError("camera update: 'fovy' must be a number", offset);
    m.fovY = f->get<double>();
    m.requestWidth = dimFrom(j, "w", offset);
    m.requestHeight = dimFrom(j, "h", offset);
    return m;
  }
  case MsgKind::Frame: {
    ByteReader r(payload, offset);
    FrameMessage m;
    m.width = r.u32();
    m.height = r.u32();
    const std::uint8_t format = r.u8();
    if (format != static_cast<std::uint8_t>(PixelFormat::Rgb8))
      throw DecodeError("unknown pixel format " + std::to_string(format), offset + 8);
    m.sequence = r.u32();
    m.renderMillis = r.u32();
    const std::uint64_t expected = std::uint64_t(m.width) * m.height * 3;
    if (r.remaining() != expected)
      throw DecodeError("length mismatch: expected " + std::to_string(expected)
              + " pixel bytes, got " + std::to_string(r.remaining()),
          offset + FrameMessage::kHeaderSize);
    const auto px = r.bytes(r.remaining());
    m.pixels.assign(px.begin(), px.end());
    return m;
  }
  case MsgKind::Control: {
    const json j = parseJsonPayload(payload, offset, "control");
    ControlMessage m;
    auto s = j.find("status");
    if (s == j.end() || !s->is_string())
      throw DecodeError("control: 'status' must be a string", offset);
    m.status = s->get<std::string>();
    auto msg = j.find("message");
    if (msg != j.end() && msg->is_string())
      m.message = msg->get<std::string>();
    return m;
  }
  default:
    break;
  }
  throw DecodeError("unexpected msgKind " + std::string(toString(kind)), offset);
}

bool isServiceKind(MsgKind kind)
{
  return kind == MsgKind::CameraUpdate || kind == MsgKind::Frame || kind == MsgKind::Control;
}

} // namespace

void CameraUpdateMessage::validate() const
{
  if (requestWidth < kMinSize || requestWidth > kMaxSize || requestHeight < kMinSize
      || requestHeight > kMaxSize)
    throw ValidationError("camera update: dimensions must lie in [16, 8192]");
  toCamera().validate();
}

CameraSpec CameraUpdateMessage::toCamera() const
{
  CameraSpec cam;
  cam.position = position;
  cam.viewDir = viewDir;
  cam.up = up;
  cam.fovY = fovY;
  cam.aspect = double(requestWidth) / double(requestHeight);
  return cam;
}

Bytes encodeMessage(const Message &msg)
{
  MsgKind kind = MsgKind::Control;
  Bytes payload = std::visit(
      [&](const auto &m) {
        using T = std::decay_t<decltype(m)>;
        if constexpr (std::is_same_v<T, CameraUpdateMessage>)
          kind = MsgKind::CameraUpdate;
        else if constexpr (std::is_same_v<T, FrameMessage>)
          kind = MsgKind::Frame;
        return payloadOf(m);
      },
      msg);
  return frameMessage(kind, payload);
}

Message decodeMessage(ByteView data)
{
  MessageDecoder d;
  d.feed(data);
  auto m = d.next();
  if (!m)
    d.finish();
  if (d.buffered() != 0)
    throw DecodeError("trailing bytes after message", d.offset());
  return std::move(*m);
}

void MessageDecoder::checkPrefix() const
{
  const size_t n = std::min(m_buffer.size(), kFrameHeaderSize);
  if (n == 0)
    return;
  for (size_t i = 0; i < std::min(n, kMagic.size()); ++i) {
    if (m_buffer[i] != kMagic[i])
      throw DecodeError("bad magic", m_offset + i);
  }
  if (n > 4) {
    if (!isKnownMsgKind(m_buffer[4]))
      throw DecodeError("unknown msgKind " + std::to_string(m_buffer[4]), m_offset + 4);
    if (!isServiceKind(static_cast<MsgKind>(m_buffer[4])))
      throw DecodeError("unexpected msgKind "
              + std::string(toString(static_cast<MsgKind>(m_buffer[4]))),
          m_offset + 4);
  }
  if (n == kFrameHeaderSize)
    parseFrameHeader(ByteView(m_buffer).first(kFrameHeaderSize), m_offset);
}

void MessageDecoder::feed(ByteView data)
{
  m_buffer.insert(m_buffer.end(), data.begin(), data.end());
  checkPrefix();
}

std::optional<Message> MessageDecoder::next()
{
  if (m_buffer.size() < kFrameHeaderSize)
    return std::nullopt;
  const FrameHeader h =
      parseFrameHeader(ByteView(m_buffer).first(kFrameHeaderSize), m_offset);
  const size_t total = kFrameHeaderSize + h.length;
  if (m_buffer.size() < total)
    return std::nullopt;
  Message m = decodePayload(h.kind,
      ByteView(m_buffer).subspan(kFrameHeaderSize, h.length), m_offset + kFrameHeaderSize);
  m_buffer.erase(m_buffer.begin(), m_buffer.begin() + static_cast<std::ptrdiff_t>(total));
  m_offset += total;
  checkPrefix();
  return m;
}

void MessageDecoder::finish() const
{
  if (m_buffer.empty())
    return;
  if (m_buffer.size() < kFrameHeaderSize)
    throw DecodeError("truncated header", m_offset + m_buffer.size());
  throw DecodeError("truncated payload", m_offset + m_buffer.size());
}

} // namespace dprt
