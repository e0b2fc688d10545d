// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "net.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <thread>

#include "dprt/error.hpp"

namespace dprt::net {

namespace {

std::string errnoText()
{
  return std::strerror(errno);
}

sockaddr_in resolve(const std::string &host, std::uint16_t port)
{
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo *res = nullptr;
  const std::string h = host.empty() ? "127.0.0.1" : host;
  if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || !res)
    throw TransportError("cannot resolve host '" + h + "'");
  sockaddr_in addr{};
  std::memcpy(&addr, res->ai_addr, sizeof(addr));
  freeaddrinfo(res);
  addr.sin_port = htons(port);
  return addr;
}

int remainingMillis(Clock::time_point deadline)
{
  // Round up so that a poll never returns before the deadline.
  const auto left = std::chrono::ceil<std::chrono::milliseconds>(deadline - Clock::now());
  return left.count() < 0 ? 0 : static_cast<int>(left.count());
}

} // namespace

Socket::~Socket()
{
  close();
}

Socket &Socket::operator=(Socket &&other) noexcept
{
  if (this != &other) {
    close();
    m_fd = std::exchange(other.m_fd, -1);
  }
  return *this;
}

void Socket::shutdown()
{
  if (m_fd >= 0)
    ::shutdown(m_fd, SHUT_RDWR);
}

void Socket::close()
{
  if (m_fd >= 0) {
    ::close(m_fd);
    m_fd = -1;
  }
}

HostPort parseHostPort(const std::string &address)
{
  const auto colon = address.rfind(':');
  if (colon == std::string::npos)
    throw UsageError("address '" + address + "' is not host:port");
  HostPort hp;
  hp.host = address.substr(0, colon);
  const std::string port = address.substr(colon + 1);
  char *end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (port.empty() || *end != '\0' || p < 0 || p > 65535)
    throw UsageError("address '" + address + "' has an invalid port");
  hp.port = static_cast<std::uint16_t>(p);
  return hp;
}

Socket listenTcp(const std::string &host, std::uint16_t port, int backlog)
{
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid())
    throw TransportError("socket: " + errnoText());
  int one = 1;
  ::setsockopt(s.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr = resolve(host, port);
  if (::bind(s.fd(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0)
    throw TransportError("bind " + host + ":" + std::to_string(port) + ": " + errnoText());
  if (::listen(s.fd(), backlog) != 0)
    throw TransportError("listen: " + errnoText());
  return s;
}

std::uint16_t localPort(const Socket &s)
{
  sockaddr_in addr{};
  socklen_t len = sizeof(addr);
  if (::getsockname(s.fd(), reinterpret_cast<sockaddr *>(&addr), &len) != 0)
    throw TransportError("getsockname: " + errnoText());
  return ntohs(addr.sin_port);
}

Socket connectTcp(const std::string &host, std::uint16_t port)
{
  Socket s(::socket(AF_INET, SOCK_STREAM, 0));
  if (!s.valid())
    throw TransportError("socket: " + errnoText());
  sockaddr_in addr = resolve(host, port);
  if (::connect(s.fd(), reinterpret_cast<sockaddr *>(&addr), sizeof(addr)) != 0)
    throw TransportError("connect " + host + ":" + std::to_string(port) + ": " + errnoText());
  int one = 1;
  ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

Socket connectTcpRetry(const std::string &host, std::uint16_t port,
    Clock::time_point deadline)
{
  for (;;) {
    try {
      return connectTcp(host, port);
    } catch (const TransportError &e) {
      if (Clock::now() >= deadline)
        throw TimeoutError(std::string("startup: ") + e.what() + " (deadline passed)");
    }
    std::this_thread::sleep_for(std::chrono::milliseconds(20));
  }
}

bool waitReadable(int fd, Clock::time_point deadline)
{
  for (;;) {
    pollfd p{fd, POLLIN, 0};
    const int rc = ::poll(&p, 1, remainingMillis(deadline));
    if (rc > 0)
      return true;
    if (rc == 0) {
      if (Clock::now() < deadline)
        continue;
      return false;
    }
    if (errno != EINTR)
      return false;
  }
}

Socket acceptUntil(const Socket &listener, Clock::time_point deadline)
{
  if (!waitReadable(listener.fd(), deadline))
    return Socket();
  Socket s(::accept(listener.fd(), nullptr, nullptr));
  if (s.valid()) {
    int one = 1;
    ::setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  return s;
}

void writeAll(int fd, ByteView data)
{
  size_t sent = 0;
  while (sent < data.size()) {
    const ssize_t n = ::send(fd, data.data() + sent, data.size() - sent, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR)
        continue;
      throw TransportError("send: " + errnoText());
    }
    sent += static_cast<size_t>(n);
  }
}

bool readExact(int fd, std::uint8_t *out, size_t n)
{
  size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0)
      return false;
    if (r < 0) {
      if (errno == EINTR)
        continue;
      return false;
    }
    got += static_cast<size_t>(r);
  }
  return true;
}

bool readExactUntil(int fd, std::uint8_t *out, size_t n, Clock::time_point deadline)
{
  size_t got = 0;
  while (got < n) {
    if (!waitReadable(fd, deadline))
      return false;
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r == 0)
      return false;
    if (r < 0) {
      if (errno == EINTR)
        continue;
      return false;
    }
    got += static_cast<size_t>(r);
  }
  return true;
}

} // namespace dprt::net
