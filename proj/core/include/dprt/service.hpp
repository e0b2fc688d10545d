// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <optional>
#include <ostream>
#include <string>

#include "dprt/codec.hpp"
#include "dprt/engine.hpp"
#include "dprt/transport.hpp"

namespace dprt {

struct ServiceOptions
{
  std::string bindAddress{"127.0.0.1"};
  std::uint16_t port{0}; // 0 picks a free port; see onListening
  bool once{false};      // return after the first session ends
  RenderOptions render;
  // One JSON object per line: frame, round, raysTraced, bytesExchanged, millis.
  std::ostream *statsLog{nullptr};
  // Set from another thread to shut the service down between frames.
  const std::atomic<bool> *stop{nullptr};
  // How long to wait for a client's first bytes when telling a raw DPRT
  // client from a WebSocket upgrade.
  std::chrono::milliseconds detectTimeout{200};

  std::function<void(std::uint16_t port)> onListening;
  // Called on rank 0 after a camera update was taken for frame `sequence`
  // and before that frame is rendered.
  std::function<void(std::uint32_t sequence)> beforeRender;
  // Called on rank 0's receiver thread with the running update count.
  std::function<void(std::uint64_t received)> onCameraUpdate;
};

struct ServiceSummary
{
  std::uint64_t sessions{0};
  std::uint64_t framesSent{0};
  std::uint64_t updatesReceived{0};
  std::uint64_t busyRejections{0};
  double renderSeconds{0.0};

  double framesPerSecond() const
  {
    return renderSeconds > 0.0 ? double(framesSent) / renderSeconds : 0.0;
  }
};

// Collective. Rank 0 listens for thin clients and drives frames; every other
// rank follows its commands. One client at a time: while a session runs,
// further connections get a CONTROL "busy" message and are closed. Camera
// updates that arrive during a render are coalesced, newest wins. Returns on
// every rank once rank 0 stops serving.
ServiceSummary serveSession(Endpoint &ep, const LocalWorld &world,
    const ServiceOptions &options);

// Blocking client for the service protocol, over raw TCP or WebSocket.
class ServiceClient
{
 public:
  static ServiceClient connect(const std::string &host, std::uint16_t port,
      bool websocket = false,
      std::chrono::milliseconds timeout = std::chrono::seconds(10));

  ServiceClient(ServiceClient &&) noexcept;
  ServiceClient &operator=(ServiceClient &&) noexcept;
  ~ServiceClient();

  void send(const Message &msg);
  // Raw DPRT-stream bytes; wrapped in one binary frame over WebSocket.
  void sendRaw(ByteView bytes);
  // nullopt when the server closed the connection or the timeout passed.
  std::optional<Message> receive(std::chrono::milliseconds timeout);
  void close();

 private:
  struct Impl;
  explicit ServiceClient(std::unique_ptr<Impl> impl);
  std::unique_ptr<Impl> m_impl;
};

} // namespace dprt
