// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <mutex>
#include <unordered_map>
#include <vector>

namespace dprt {

using ObjectId = std::uint64_t;

// Reference counts for render-graph objects. A parent holds one reference per
// child link, so releasing the application's handle to a child keeps it alive
// as long as some parent still links it. When a count reaches zero the object
// is destroyed, its links are dropped, and the destroy callback fires for it
// and for every child that dies as a consequence.
class RefTable
{
 public:
  using DestroyCallback = std::function<void(ObjectId)>;

  explicit RefTable(DestroyCallback onDestroy = {});

  ObjectId create();
  std::uint32_t retain(ObjectId id);
  // Returns the remaining count. Throws UsageError for a dead id.
  std::uint32_t release(ObjectId id);

  void link(ObjectId parent, ObjectId child);
  void unlink(ObjectId parent, ObjectId child);

  bool alive(ObjectId id) const;
  std::uint32_t count(ObjectId id) const;
  size_t liveObjects() const;

 private:
  struct Entry
  {
    std::uint32_t count{1};
    std::vector<ObjectId> children; // one element per link
  };

  void releaseLocked(ObjectId id, std::vector<ObjectId> &destroyed);
  Entry &entryLocked(ObjectId id, const char *op);

  mutable std::mutex m_mutex;
  std::unordered_map<ObjectId, Entry> m_entries;
  ObjectId m_next{1};
  DestroyCallback m_onDestroy;
};

} // namespace dprt
