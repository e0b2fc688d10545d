// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <list>
#include <memory>
#include <mutex>
#include <unordered_map>
#include <vector>

#include "dprt/scene.hpp"

namespace dprt {

struct TimestepCacheStats
{
  std::uint64_t hits{0};
  std::uint64_t misses{0};
  std::uint64_t evictions{0};
};

// LRU cache of time-step scenes with a fixed resident capacity.
class TimestepCache
{
 public:
  using Loader = std::function<SceneDesc(size_t stepIndex)>;

  static constexpr size_t kDefaultCapacity = 2;

  TimestepCache(size_t capacity, size_t numSteps, Loader loader);

  // Loader that parses scene.timeSteps[i] from disk.
  static TimestepCache forScene(const SceneDesc &scene, size_t capacity);

  std::shared_ptr<const SceneDesc> fetch(size_t stepIndex);

  TimestepCacheStats stats() const;
  // Resident steps, most recently used first.
  std::vector<size_t> residents() const;
  // Every eviction in the order it happened.
  std::vector<size_t> evictionLog() const;
  size_t capacity() const
  {
    return m_capacity;
  }

 private:
  using Lru = std::list<std::pair<size_t, std::shared_ptr<const SceneDesc>>>;

  size_t m_capacity;
  size_t m_numSteps;
  Loader m_loader;

  mutable std::mutex m_mutex;
  Lru m_lru;
  std::unordered_map<size_t, Lru::iterator> m_index;
  TimestepCacheStats m_stats;
  std::vector<size_t> m_evicted;
};

} // namespace dprt
