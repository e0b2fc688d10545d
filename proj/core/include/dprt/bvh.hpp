// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <cstdint>
#include <limits>
#include <span>
#include <vector>

#include "dprt/geom.hpp"

namespace dprt {

// Best-hit key. Ordered by (t, globalId) so the nearest hit is the same no
// matter how primitives are split across ranks or ordered within a rank.
struct HitKey
{
  double t{kInf};
  GlobalId globalId{kMissId};

  bool isMiss() const
  {
    return globalId == kMissId;
  }

  friend bool operator==(const HitKey &, const HitKey &) = default;
  friend bool operator<(const HitKey &a, const HitKey &b)
  {
    if (a.t != b.t)
      return a.t < b.t;
    return a.globalId < b.globalId;
  }
};

inline constexpr HitKey kMissKey{};

struct BvhNode
{
  Aabb bounds;
  std::uint32_t left{0};
  std::uint32_t right{0};
  std::uint32_t firstPrim{0};
  std::uint32_t primCount{0};

  bool isLeaf() const
  {
    return primCount > 0;
  }
};

// Binary BVH over one rank's triangles: median split on the longest centroid
// axis, at most kLeafSize primitives per leaf. Immutable after build; the
// triangle span handed to the queries must be the one it was built over.
class Bvh
{
 public:
  static constexpr std::uint32_t kLeafSize = 4;
  static constexpr int kMaxDepth = 64;

  Bvh() = default;

  static Bvh build(std::span<const Triangle> prims);

  // Smallest (t, globalId) over all primitives hit within [tmin, tmax].
  HitKey intersectNearest(std::span<const Triangle> prims, const Ray &ray) const;

  // True iff some primitive is hit with tmin < t < tmax.
  bool intersectAny(std::span<const Triangle> prims, const Ray &ray) const;

  bool empty() const
  {
    return m_nodes.empty();
  }
  const std::vector<BvhNode> &nodes() const
  {
    return m_nodes;
  }
  const std::vector<std::uint32_t> &primOrder() const
  {
    return m_primOrder;
  }
  static constexpr std::uint32_t root()
  {
    return 0;
  }

 private:
  std::vector<BvhNode> m_nodes;
  std::vector<std::uint32_t> m_primOrder;
};

} // namespace dprt
