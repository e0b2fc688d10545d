// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "dprt/wire.hpp"

namespace dprt {

class Mailbox;

enum class Backend
{
  InProc,
  Socket
};

struct TransportConfig
{
  // Deadline for any single blocking receive, connect, or accept.
  std::chrono::milliseconds timeout{defaultTimeout()};
  // Messages buffered per (sender, kind) stream before an in-process send
  // blocks.
  size_t queueCapacity{64};

  // 30 s unless DPRT_TIMEOUT_SECS is set.
  static std::chrono::milliseconds defaultTimeout();
};

struct TrafficStats
{
  std::uint64_t messagesSent{0};
  std::uint64_t bytesSent{0};
  std::uint64_t messagesReceived{0};
  std::uint64_t bytesReceived{0};
  // Framed bytes sent, indexed by MsgKind value.
  std::array<std::uint64_t, 8> bytesSentByKind{};
};

// One rank's view of the session. Collectives must be entered by every rank
// in the same order; each one advances a step counter that is stamped on
// every message, so ranks that drift out of step fail with ProtocolError
// instead of exchanging the wrong payloads.
//
// An endpoint is driven by one thread at a time.
class Endpoint
{
 public:
  virtual ~Endpoint();

  Endpoint(const Endpoint &) = delete;
  Endpoint &operator=(const Endpoint &) = delete;

  std::uint32_t rank() const
  {
    return m_rank;
  }
  std::uint32_t size() const
  {
    return m_size;
  }
  bool isRoot() const
  {
    return m_rank == 0;
  }
  std::uint32_t next() const
  {
    return (m_rank + 1) % m_size;
  }
  std::uint32_t prev() const
  {
    return (m_rank + m_size - 1) % m_size;
  }

  // Sends `outgoing` to rank+1 and returns what rank-1 sent.
  Bytes ringExchange(ByteView outgoing);

  // Root gets all tiles ordered by rank; other ranks get an empty list.
  std::vector<Bytes> gatherToRoot(ByteView tile);

  void barrier();

  // Root's payload is returned on every rank; non-root input is ignored.
  Bytes broadcastFromRoot(ByteView payload);

  // Every rank gets every rank's payload, ordered by rank. A gather to root
  // followed by a broadcast, so it takes two collective steps.

  std::vector<Bytes> allgather(ByteView mine);

  TrafficStats traffic() const;
  std::uint64_t collectiveSteps() const
  {
    return m_step;
  }
  std::chrono::milliseconds timeout() const
  {
    return m_config.timeout;
  }

 protected:
  Endpoint(std::uint32_t rank, std::uint32_t size, TransportConfig config,
      std::shared_ptr<Mailbox> inbox);

  // Hands a stamped message to `dest`'s inbox. Self-sends never reach here.
  virtual void deliver(std::uint32_t dest, MsgKind kind, std::uint64_t stamp,
      ByteView payload) = 0;

  Mailbox &inbox()
  {
    return *m_inbox;
  }
  const TransportConfig &config() const
  {
    return m_config;
  }
  // Forgets the session setup traffic so that counters and step numbers start
  // at zero for the caller, as they do for the in-process backend.
  void resetAfterSetup();

 private:
  void send(std::uint32_t dest, MsgKind kind, ByteView payload);
  Bytes receive(std::uint32_t src, MsgKind kind, const char *op);

  std::uint32_t m_rank;
  std::uint32_t m_size;
  TransportConfig m_config;
  std::shared_ptr<Mailbox> m_inbox;
  std::uint64_t m_step{0};

  std::atomic<std::uint64_t> m_msgsSent{0};
  std::atomic<std::uint64_t> m_bytesSent{0};
  std::atomic<std::uint64_t> m_msgsRecv{0};
  std::atomic<std::uint64_t> m_bytesRecv{0};
  std::array<std::atomic<std::uint64_t>, 8> m_bytesByKind{};
};

using EndpointPtr = std::unique_ptr<Endpoint>;

// Creates all R endpoints of a session in this process. The socket backend
// connects them over loopback TCP and confirms readiness with a barrier.
std::vector<EndpointPtr> initRanks(
    std::uint32_t numRanks, Backend backend, TransportConfig config = {});

// Joins a multi-process socket session as `rank`. addresses[r] is
// "host:port" of rank r; this rank listens on its own entry, connects to
// lower ranks, and accepts higher ones.
EndpointPtr connectSocketRank(std::uint32_t rank,
    const std::vector<std::string> &addresses, TransportConfig config = {});

// Framed size of one transport message carrying `payloadSize` bytes.
constexpr std::uint64_t framedSize(std::uint64_t payloadSize)
{
  return kFrameHeaderSize + 8 + payloadSize;
}

} // namespace dprt
