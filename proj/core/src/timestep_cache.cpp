// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/timestep_cache.hpp"

#include <string>

#include "dprt/error.hpp"

namespace dprt {

TimestepCache::TimestepCache(size_t capacity, size_t numSteps, Loader loader)
    : m_capacity(capacity), m_numSteps(numSteps), m_loader(std::move(loader))
{
  if (m_capacity < 1)
    throw UsageError("time-step cache capacity must be at least 1");
  if (!m_loader)
    throw UsageError("time-step cache requires a loader");
}

TimestepCache TimestepCache::forScene(const SceneDesc &scene, size_t capacity)
{
  auto paths = scene.timeSteps;
  const size_t count = paths.size();
  return TimestepCache(capacity, count,
      [paths = std::move(paths)](size_t i) { return loadSceneFile(paths[i]); });
}

std::shared_ptr<const SceneDesc> TimestepCache::fetch(size_t stepIndex)
{
  std::unique_lock lock(m_mutex);
  if (stepIndex >= m_numSteps) {
    throw UsageError("time step " + std::to_string(stepIndex)
        + " out of range (scene has " + std::to_string(m_numSteps) + ")");
  }

  if (auto it = m_index.find(stepIndex); it != m_index.end()) {
    ++m_stats.hits;
    m_lru.splice(m_lru.begin(), m_lru, it->second);
    return it->second->second;
  }

  ++m_stats.misses;
  auto scene = std::make_shared<const SceneDesc>(m_loader(stepIndex));
  m_lru.emplace_front(stepIndex, scene);
  m_index[stepIndex] = m_lru.begin();

  while (m_lru.size() > m_capacity) {
    const size_t victim = m_lru.back().first;
    m_index.erase(victim);
    m_lru.pop_back();
    m_evicted.push_back(victim);
    ++m_stats.evictions;
  }
  return scene;
}

TimestepCacheStats TimestepCache::stats() const
{
  std::lock_guard lock(m_mutex);
  return m_stats;
}

std::vector<size_t> TimestepCache::residents() const
{
  std::lock_guard lock(m_mutex);
  std::vector<size_t> out;
  for (const auto &entry : m_lru)
    out.push_back(entry.first);
  return out;
}

std::vector<size_t> TimestepCache::evictionLog() const
{
  std::lock_guard lock(m_mutex);
  return m_evicted;
}

} // namespace dprt
