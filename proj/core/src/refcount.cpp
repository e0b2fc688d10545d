// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/refcount.hpp"

#include <algorithm>
#include <string>

#include "dprt/error.hpp"

namespace dprt {

RefTable::RefTable(DestroyCallback onDestroy) : m_onDestroy(std::move(onDestroy)) {}

ObjectId RefTable::create()
{
  std::lock_guard lock(m_mutex);
  const ObjectId id = m_next++;
  m_entries.emplace(id, Entry{});
  return id;
}

RefTable::Entry &RefTable::entryLocked(ObjectId id, const char *op)
{
  auto it = m_entries.find(id);
  if (it == m_entries.end())
    throw UsageError(std::string(op) + " on dead object " + std::to_string(id));
  return it->second;
}

std::uint32_t RefTable::retain(ObjectId id)
{
  std::lock_guard lock(m_mutex);
  return ++entryLocked(id, "retain").count;
}

void RefTable::releaseLocked(ObjectId id, std::vector<ObjectId> &destroyed)
{
  // Iterative so deep chains cannot overflow the call stack.
  std::vector<ObjectId> pending{id};
  while (!pending.empty()) {
    const ObjectId cur = pending.back();
    pending.pop_back();
    auto it = m_entries.find(cur);
    if (it == m_entries.end())
      continue;
    if (--it->second.count > 0)
      continue;
    auto children = std::move(it->second.children);
    m_entries.erase(it);
    destroyed.push_back(cur);
    pending.insert(pending.end(), children.begin(), children.end());
  }
}

std::uint32_t RefTable::release(ObjectId id)
{
  std::vector<ObjectId> destroyed;
  std::uint32_t remaining = 0;
  {
    std::lock_guard lock(m_mutex);
    remaining = entryLocked(id, "release").count - 1;
    releaseLocked(id, destroyed);
  }
  if (m_onDestroy) {
    for (auto d : destroyed)
      m_onDestroy(d);
  }
  return remaining;
}

void RefTable::link(ObjectId parent, ObjectId child)
{
  std::lock_guard lock(m_mutex);
  Entry &p = entryLocked(parent, "link");
  Entry &c = entryLocked(child, "link");
  ++c.count;
  p.children.push_back(child);
}

void RefTable::unlink(ObjectId parent, ObjectId child)
{
  std::vector<ObjectId> destroyed;
  {
    std::lock_guard lock(m_mutex);
    Entry &p = entryLocked(parent, "unlink");
    auto it = std::find(p.children.begin(), p.children.end(), child);
    if (it == p.children.end())
      throw UsageError("unlink: object " + std::to_string(child)
          + " is not a child of " + std::to_string(parent));
    p.children.erase(it);
    releaseLocked(child, destroyed);
  }
  if (m_onDestroy) {
    for (auto d : destroyed)
      m_onDestroy(d);
  }
}

bool RefTable::alive(ObjectId id) const
{
  std::lock_guard lock(m_mutex);
  return m_entries.count(id) > 0;
}

std::uint32_t RefTable::count(ObjectId id) const
{
  std::lock_guard lock(m_mutex);
  auto it = m_entries.find(id);
  return it == m_entries.end() ? 0 : it->second.count;
}

size_t RefTable::liveObjects() const
{
  std::lock_guard lock(m_mutex);
  return m_entries.size();
}

} // namespace dprt
