// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>
#include <string>
#include <utility>

#include "dprt/wire.hpp"

namespace dprt::net {

using Clock = std::chrono::steady_clock;

// Owning POSIX socket descriptor.
class Socket
{
 public:
  Socket() = default;
  explicit Socket(int fd) : m_fd(fd) {}
  ~Socket();

  Socket(Socket &&other) noexcept : m_fd(std::exchange(other.m_fd, -1)) {}
  Socket &operator=(Socket &&other) noexcept;

  int fd() const
  {
    return m_fd;
  }
  bool valid() const
  {
    return m_fd >= 0;
  }
  void shutdown();
  void close();

 private:
  int m_fd{-1};
};

struct HostPort
{
  std::string host;
  std::uint16_t port{0};
};

HostPort parseHostPort(const std::string &address);

Socket listenTcp(const std::string &host, std::uint16_t port, int backlog = 16);
std::uint16_t localPort(const Socket &s);

// Single attempt; throws TransportError on failure.
Socket connectTcp(const std::string &host, std::uint16_t port);
// Retries until the deadline; throws TimeoutError.
Socket connectTcpRetry(const std::string &host, std::uint16_t port,
    Clock::time_point deadline);

// False on deadline.
bool waitReadable(int fd, Clock::time_point deadline);
// Accepts one connection; invalid Socket on deadline.
Socket acceptUntil(const Socket &listener, Clock::time_point deadline);

// Throws TransportError on failure.
void writeAll(int fd, ByteView data);
// False on orderly EOF before any byte or on error.
bool readExact(int fd, std::uint8_t *out, size_t n);
// Like readExact but gives up at the deadline (returns false).
bool readExactUntil(int fd, std::uint8_t *out, size_t n, Clock::time_point deadline);

} // namespace dprt::net
