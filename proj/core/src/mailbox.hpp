// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "dprt/wire.hpp"

namespace dprt {

struct Envelope
{
  MsgKind kind{MsgKind::Control};
  std::uint64_t stamp{0};
  Bytes payload;
};

// Inbound queues of one rank, one FIFO per (sender, kind) stream.
class Mailbox
{
 public:
  using Clock = std::chrono::steady_clock;

  enum class PopStatus
  {
    Ok,
    Timeout,
    Disconnected,
    Closed
  };

  Mailbox(std::uint32_t numRanks, size_t capacity)
      : m_capacity(capacity), m_queues(numRanks * kKinds),
        m_disconnected(numRanks)
  {}

  // Blocks while the stream is full. Returns false on deadline or close.
  bool push(std::uint32_t src, Envelope env,
      std::optional<Clock::time_point> deadline)
  {
    std::unique_lock lock(m_mutex);
    auto &q = queue(src, env.kind);
    auto ready = [&] { return m_closed || q.size() < m_capacity; };
    if (deadline) {
      if (!m_notFull.wait_until(lock, *deadline, ready))
        return false;
    } else {
      m_notFull.wait(lock, ready);
    }
    if (m_closed)
      return false;
    q.push_back(std::move(env));
    m_notEmpty.notify_all();
    return true;
  }

  PopStatus pop(std::uint32_t src, MsgKind kind, Clock::time_point deadline,
      Envelope &out)
  {
    std::unique_lock lock(m_mutex);
    auto &q = queue(src, kind);
    const bool woke = m_notEmpty.wait_until(lock, deadline,
        [&] { return !q.empty() || m_closed || m_disconnected[src]; });
    if (!q.empty()) {
      out = std::move(q.front());
      q.pop_front();
      m_notFull.notify_all();
      return PopStatus::Ok;
    }
    if (!woke)
      return PopStatus::Timeout;
    return m_closed ? PopStatus::Closed : PopStatus::Disconnected;
  }

  void markDisconnected(std::uint32_t src)
  {
    std::lock_guard lock(m_mutex);
    m_disconnected[src] = true;
    m_notEmpty.notify_all();
  }

  void close()
  {
    std::lock_guard lock(m_mutex);
    m_closed = true;
    m_notEmpty.notify_all();
    m_notFull.notify_all();
  }

 private:
  static constexpr size_t kKinds = 8;

  std::deque<Envelope> &queue(std::uint32_t src, MsgKind kind)
  {
    return m_queues[src * kKinds + static_cast<size_t>(kind)];
  }

  size_t m_capacity;
  std::mutex m_mutex;
  std::condition_variable m_notEmpty;
  std::condition_variable m_notFull;
  std::vector<std::deque<Envelope>> m_queues;
  std::vector<bool> m_disconnected;
  bool m_closed{false};
};

} // namespace dprt
