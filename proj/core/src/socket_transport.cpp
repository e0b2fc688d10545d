// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "socket_transport.hpp"

#include <exception>
#include <limits>
#include <mutex>
#include <thread>

#include "dprt/error.hpp"
#include "mailbox.hpp"
#include "net.hpp"

namespace dprt {

namespace {

constexpr std::uint32_t kHelloTag = 0x4f4c4548; // "HELO"

// Wire body of a transport message: u64 step stamp, then the payload.
Bytes encodeTransportFrame(MsgKind kind, std::uint64_t stamp, ByteView payload)
{
  Bytes out;
  out.reserve(framedSize(payload.size()));
  appendFrameHeader(out, kind, static_cast<std::uint32_t>(8 + payload.size()));
  ByteWriter w(out);
  w.u64(stamp);
  w.bytes(payload);
  return out;
}

class SocketEndpoint final : public Endpoint
{
 public:
  SocketEndpoint(std::uint32_t rank, std::uint32_t size, TransportConfig config,
      net::Socket listener, const std::vector<net::HostPort> &addresses)
      : Endpoint(rank, size, config,
          std::make_shared<Mailbox>(size, std::numeric_limits<size_t>::max())),
        m_peers(size)
  {
    const auto deadline = net::Clock::now() + config.timeout;
    try {
      for (std::uint32_t r = 0; r < rank; ++r) {
        auto &peer = m_peers[r];
        peer = std::make_unique<Peer>();
        peer->sock = net::connectTcpRetry(addresses[r].host, addresses[r].port, deadline);
        Bytes hello;
        ByteWriter w(hello);
        w.u32(kHelloTag);
        w.u32(rank);
        w.u32(size);
        net::writeAll(peer->sock.fd(), encodeTransportFrame(MsgKind::Control, 0, hello));
      }
      acceptHigherRanks(listener, deadline);
      listener.close();

      for (std::uint32_t r = 0; r < size; ++r) {
        if (m_peers[r])
          m_peers[r]->reader = std::thread([this, r] { readLoop(r); });
      }
      barrier();
      resetAfterSetup();
    } catch (...) {
      stop();
      throw;
    }
  }

  ~SocketEndpoint() override
  {
    stop();
  }

 protected:
  void deliver(std::uint32_t dest, MsgKind kind, std::uint64_t stamp,
      ByteView payload) override
  {
    Peer &peer = *m_peers.at(dest);
    const Bytes frame = encodeTransportFrame(kind, stamp, payload);
    std::lock_guard lock(peer.writeMutex);
    try {
      net::writeAll(peer.sock.fd(), frame);
    } catch (const TransportError &e) {
      throw TransportError("rank " + std::to_string(rank()) + " -> rank "
          + std::to_string(dest) + " at collective step "
          + std::to_string(collectiveSteps()) + ": " + e.what());
    }
  }

 private:
  struct Peer
  {
    net::Socket sock;
    std::mutex writeMutex;
    std::thread reader;
  };

  void acceptHigherRanks(const net::Socket &listener, net::Clock::time_point deadline)
  {
    std::uint32_t missing = size() - rank() - 1;
    while (missing > 0) {
      net::Socket s = net::acceptUntil(listener, deadline);
      if (!s.valid()) {
        std::string absent;
        for (std::uint32_t r = rank() + 1; r < size(); ++r) {
          if (!m_peers[r])
            absent += (absent.empty() ? "" : ", ") + std::to_string(r);
        }
        throw TimeoutError("startup: rank " + std::to_string(rank())
            + " timed out waiting for rank(s) " + absent + " to connect");
      }
      std::uint8_t buf[kFrameHeaderSize + 8 + 12];
      if (!net::readExactUntil(s.fd(), buf, sizeof(buf), deadline))
        throw TimeoutError("startup: peer did not complete the handshake");
      const auto header = parseFrameHeader(ByteView(buf, kFrameHeaderSize));
      ByteReader r(ByteView(buf + kFrameHeaderSize, 8 + 12));
      r.u64();
      const auto tag = r.u32();
      const auto peerRank = r.u32();
      const auto peerSize = r.u32();
      if (header.kind != MsgKind::Control || tag != kHelloTag)
        throw ProtocolError("startup: malformed handshake");
      if (peerSize != size())
        throw ProtocolError("startup: peer reports " + std::to_string(peerSize)
            + " ranks, expected " + std::to_string(size()));
      if (peerRank <= rank() || peerRank >= size())
        throw ProtocolError("startup: unexpected rank id " + std::to_string(peerRank));
      if (m_peers[peerRank])
        throw ProtocolError("startup: duplicate rank id " + std::to_string(peerRank));
      m_peers[peerRank] = std::make_unique<Peer>();
      m_peers[peerRank]->sock = std::move(s);
      --missing;
    }
  }

  void readLoop(std::uint32_t src)
  {
    Peer &peer = *m_peers[src];
    std::uint8_t header[kFrameHeaderSize];
    for (;;) {
      if (!net::readExact(peer.sock.fd(), header, sizeof(header)))
        break;
      FrameHeader h;
      try {
        h = parseFrameHeader(ByteView(header, sizeof(header)));
      } catch (const DecodeError &) {
        break;
      }
      if (h.length < 8)
        break;
      Bytes body(h.length);
      if (!net::readExact(peer.sock.fd(), body.data(), body.size()))
        break;
      ByteReader r(body);
      const std::uint64_t stamp = r.u64();
      Bytes payload(body.begin() + 8, body.end());
      if (!inbox().push(src, Envelope{h.kind, stamp, std::move(payload)}, std::nullopt))
        return;
    }
    inbox().markDisconnected(src);
  }

  void stop()
  {
    inbox().close();
    for (auto &peer : m_peers) {
      if (peer)
        peer->sock.shutdown();
    }
    for (auto &peer : m_peers) {
      if (peer && peer->reader.joinable())
        peer->reader.join();
    }
  }

  std::vector<std::unique_ptr<Peer>> m_peers;
};

} // namespace

namespace detail {

std::vector<EndpointPtr> initSocketRanks(
    std::uint32_t numRanks, const TransportConfig &config)
{
  std::vector<net::Socket> listeners;
  std::vector<net::HostPort> addresses;
  for (std::uint32_t r = 0; r < numRanks; ++r) {
    listeners.push_back(net::listenTcp("127.0.0.1", 0));
    addresses.push_back({"127.0.0.1", net::localPort(listeners.back())});
  }

  std::vector<EndpointPtr> eps(numRanks);
  std::vector<std::exception_ptr> errors(numRanks);
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < numRanks; ++r) {
    threads.emplace_back([&, r] {
      try {
        eps[r] = std::make_unique<SocketEndpoint>(
            r, numRanks, config, std::move(listeners[r]), addresses);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto &t : threads)
    t.join();
  for (auto &e : errors) {
    if (e)
      std::rethrow_exception(e);
  }
  return eps;
}

} // namespace detail

EndpointPtr connectSocketRank(std::uint32_t rank,
    const std::vector<std::string> &addresses, TransportConfig config)
{
  const auto size = static_cast<std::uint32_t>(addresses.size());
  if (rank >= size)
    throw UsageError("rank " + std::to_string(rank) + " has no address entry");
  std::vector<net::HostPort> hostPorts;
  for (const auto &a : addresses)
    hostPorts.push_back(net::parseHostPort(a));
  net::Socket listener = net::listenTcp(hostPorts[rank].host, hostPorts[rank].port);
  return std::make_unique<SocketEndpoint>(
      rank, size, config, std::move(listener), hostPorts);
}

} // namespace dprt
