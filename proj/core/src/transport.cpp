// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/transport.hpp"

#include <cstdlib>
#include <string>

#include "dprt/error.hpp"
#include "mailbox.hpp"
#include "socket_transport.hpp"

namespace dprt {

std::chrono::milliseconds TransportConfig::defaultTimeout()
{
  if (const char *env = std::getenv("DPRT_TIMEOUT_SECS")) {
    char *end = nullptr;
    const double secs = std::strtod(env, &end);
    if (end != env && secs > 0.0)
      return std::chrono::milliseconds(static_cast<long long>(secs * 1000.0));
  }
  return std::chrono::seconds(30);
}

Endpoint::Endpoint(std::uint32_t rank, std::uint32_t size,
    TransportConfig config, std::shared_ptr<Mailbox> inbox)
    : m_rank(rank), m_size(size), m_config(config), m_inbox(std::move(inbox))
{}

Endpoint::~Endpoint() = default;

void Endpoint::send(std::uint32_t dest, MsgKind kind, ByteView payload)
{
  if (dest == m_rank) {
    m_inbox->push(m_rank, Envelope{kind, m_step, Bytes(payload.begin(), payload.end())},
        std::nullopt);
  } else {
    deliver(dest, kind, m_step, payload);
  }
  const auto framed = framedSize(payload.size());
  m_msgsSent.fetch_add(1, std::memory_order_relaxed);
  m_bytesSent.fetch_add(framed, std::memory_order_relaxed);
  m_bytesByKind[static_cast<size_t>(kind)].fetch_add(framed, std::memory_order_relaxed);
}

Bytes Endpoint::receive(std::uint32_t src, MsgKind kind, const char *op)
{
  const auto deadline = Mailbox::Clock::now() + m_config.timeout;
  Envelope env;
  const auto status = m_inbox->pop(src, kind, deadline, env);
  const std::string where = std::string(op) + " on rank " + std::to_string(m_rank)
      + " at collective step " + std::to_string(m_step);
  switch (status) {
  case Mailbox::PopStatus::Ok:
    break;
  case Mailbox::PopStatus::Timeout:
    throw TimeoutError(where + ": no " + std::string(toString(kind))
        + " message from rank " + std::to_string(src) + " within "
        + std::to_string(m_config.timeout.count()) + " ms");
  case Mailbox::PopStatus::Disconnected:
    throw TransportError(where + ": rank " + std::to_string(src) + " disconnected");
  case Mailbox::PopStatus::Closed:
    throw TransportError(where + ": endpoint closed");
  }
  if (env.stamp != m_step) {
    throw ProtocolError(where + ": rank " + std::to_string(src)
        + " sent a message stamped for step " + std::to_string(env.stamp)
        + " (mismatched collective participation)");
  }
  m_msgsRecv.fetch_add(1, std::memory_order_relaxed);
  m_bytesRecv.fetch_add(framedSize(env.payload.size()), std::memory_order_relaxed);
  return std::move(env.payload);
}

Bytes Endpoint::ringExchange(ByteView outgoing)
{
  ++m_step;
  send(next(), MsgKind::RayBatch, outgoing);
  return receive(prev(), MsgKind::RayBatch, "ring exchange");
}

std::vector<Bytes> Endpoint::gatherToRoot(ByteView tile)
{
  ++m_step;
  if (!isRoot()) {
    send(0, MsgKind::Tile, tile);
    return {};
  }
  std::vector<Bytes> tiles(m_size);
  tiles[0] = Bytes(tile.begin(), tile.end());
  for (std::uint32_t r = 1; r < m_size; ++r)
    tiles[r] = receive(r, MsgKind::Tile, "gather");
  return tiles;
}

void Endpoint::barrier()
{
  ++m_step;
  if (m_size == 1)
    return;
  if (isRoot()) {
    for (std::uint32_t r = 1; r < m_size; ++r)
      receive(r, MsgKind::Barrier, "barrier");
    for (std::uint32_t r = 1; r < m_size; ++r)
      send(r, MsgKind::Barrier, {});
  } else {
    send(0, MsgKind::Barrier, {});
    receive(0, MsgKind::Barrier, "barrier");
  }
}

Bytes Endpoint::broadcastFromRoot(ByteView payload)
{
  ++m_step;
  if (isRoot()) {
    for (std::uint32_t r = 1; r < m_size; ++r)
      send(r, MsgKind::Control, payload);
    return Bytes(payload.begin(), payload.end());
  }
  return receive(0, MsgKind::Control, "broadcast");
}

std::vector<Bytes> Endpoint::allgather(ByteView mine)
{
  // Gather to root, then broadcast the length-prefixed concatenation. Ray
  // traffic stays the only user of the ring.
  const auto pieces = gatherToRoot(mine);
  Bytes packed;
  if (isRoot()) {
    ByteWriter w(packed);
    for (const auto &p : pieces) {
      w.u32(static_cast<std::uint32_t>(p.size()));
      w.bytes(p);
    }
  }
  packed = broadcastFromRoot(packed);
  std::vector<Bytes> all(m_size);
  ByteReader r(packed);
  for (auto &piece : all) {
    const auto view = r.bytes(r.u32());
    piece.assign(view.begin(), view.end());
  }
  return all;
}

void Endpoint::resetAfterSetup()
{
  m_step = 0;
  m_msgsSent = 0;
  m_bytesSent = 0;
  m_msgsRecv = 0;
  m_bytesRecv = 0;
  for (auto &b : m_bytesByKind)
    b = 0;
}

TrafficStats Endpoint::traffic() const
{
  TrafficStats s;
  s.messagesSent = m_msgsSent.load();
  s.bytesSent = m_bytesSent.load();
  s.messagesReceived = m_msgsRecv.load();
  s.bytesReceived = m_bytesRecv.load();
  for (size_t i = 0; i < s.bytesSentByKind.size(); ++i)
    s.bytesSentByKind[i] = m_bytesByKind[i].load();
  return s;
}

namespace {

struct InprocHub
{
  std::vector<std::shared_ptr<Mailbox>> inboxes;
};

class InprocEndpoint final : public Endpoint
{
 public:
  InprocEndpoint(std::uint32_t rank, std::uint32_t size, TransportConfig config,
      std::shared_ptr<InprocHub> hub)
      : Endpoint(rank, size, config, hub->inboxes[rank]), m_hub(std::move(hub))
  {}

 protected:
  void deliver(std::uint32_t dest, MsgKind kind, std::uint64_t stamp,
      ByteView payload) override
  {
    const auto deadline = Mailbox::Clock::now() + config().timeout;
    if (!m_hub->inboxes[dest]->push(rank(),
            Envelope{kind, stamp, Bytes(payload.begin(), payload.end())}, deadline)) {
      throw TimeoutError("rank " + std::to_string(rank()) + ": queue to rank "
          + std::to_string(dest) + " stayed full past the deadline");
    }
  }

 private:
  std::shared_ptr<InprocHub> m_hub;
};

} // namespace

std::vector<EndpointPtr> initRanks(
    std::uint32_t numRanks, Backend backend, TransportConfig config)
{
  if (numRanks < 1)
    throw UsageError("session needs at least one rank");

  if (backend == Backend::Socket)
    return detail::initSocketRanks(numRanks, config);

  auto hub = std::make_shared<InprocHub>();
  for (std::uint32_t r = 0; r < numRanks; ++r)
    hub->inboxes.push_back(std::make_shared<Mailbox>(numRanks, config.queueCapacity));

  std::vector<EndpointPtr> eps;
  for (std::uint32_t r = 0; r < numRanks; ++r)
    eps.push_back(std::make_unique<InprocEndpoint>(r, numRanks, config, hub));
  return eps;
}

} // namespace dprt
