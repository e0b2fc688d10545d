// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/bvh.hpp"

#include <algorithm>
#include <array>
#include <cassert>
#include <numeric>
#include <stdexcept>

namespace dprt {

namespace {

struct Builder
{
  std::span<const Triangle> prims;
  std::vector<Vec3> centroids;
  std::vector<BvhNode> &nodes;
  std::vector<std::uint32_t> &order;

  std::uint32_t build(std::uint32_t first, std::uint32_t count, int depth)
  {
    const auto index = static_cast<std::uint32_t>(nodes.size());
    nodes.emplace_back();

    Aabb bounds;
    Aabb centroidBounds;
    for (std::uint32_t i = first; i < first + count; ++i) {
      bounds.extend(prims[order[i]].bounds());
      centroidBounds.extend(centroids[order[i]]);
    }
    nodes[index].bounds = bounds;

    if (count <= Bvh::kLeafSize || depth + 1 >= Bvh::kMaxDepth) {
      nodes[index].firstPrim = first;
      nodes[index].primCount = count;
      return index;
    }

    const int axis = centroidBounds.longestAxis();
    const auto begin = order.begin() + first;
    const auto mid = begin + count / 2;
    std::nth_element(begin, mid, begin + count,
        [&](std::uint32_t a, std::uint32_t b) {
          const double ca = centroids[a][axis];
          const double cb = centroids[b][axis];
          if (ca != cb)
            return ca < cb;
          return prims[a].globalId < prims[b].globalId;
        });

    const std::uint32_t leftCount = count / 2;
    const std::uint32_t left = build(first, leftCount, depth + 1);
    const std::uint32_t right = build(first + leftCount, count - leftCount, depth + 1);
    nodes[index].left = left;
    nodes[index].right = right;
    return index;
  }
};

struct StackEntry
{
  std::uint32_t node;
  double tEnter;
};

} // namespace

Bvh Bvh::build(std::span<const Triangle> prims)
{
  if (prims.size() > std::numeric_limits<std::uint32_t>::max() / 2)
    throw std::length_error("too many primitives for one BVH");

  Bvh bvh;
  if (prims.empty())
    return bvh;

  bvh.m_primOrder.resize(prims.size());
  std::iota(bvh.m_primOrder.begin(), bvh.m_primOrder.end(), 0u);
  bvh.m_nodes.reserve(2 * prims.size() / kLeafSize + 1);

  Builder builder{prims, {}, bvh.m_nodes, bvh.m_primOrder};
  builder.centroids.reserve(prims.size());
  for (const auto &tri : prims)
    builder.centroids.push_back(tri.centroid());
  builder.build(0, static_cast<std::uint32_t>(prims.size()), 0);
  return bvh;
}

HitKey Bvh::intersectNearest(
    std::span<const Triangle> prims, const Ray &ray) const
{
  HitKey best;
  if (m_nodes.empty())
    return best;

  Ray r = ray;
  std::array<StackEntry, kMaxDepth + 1> stack;
  int top = 0;

  double tEnter = 0.0;
  if (!rayHitsAabb(r, m_nodes[root()].bounds, &tEnter))
    return best;
  stack[top++] = {root(), tEnter};

  while (top > 0) {
    const StackEntry entry = stack[--top];
    // Equal t must still be visited: a smaller globalId may tie.
    if (entry.tEnter > best.t)
      continue;

    const BvhNode &node = m_nodes[entry.node];
    if (node.isLeaf()) {
      for (std::uint32_t i = node.firstPrim; i < node.firstPrim + node.primCount; ++i) {
        const Triangle &tri = prims[m_primOrder[i]];
        const auto hit = rayTriangleIntersect(r, tri);
        if (!hit)
          continue;
        const HitKey key{hit->t, tri.globalId};
        if (key < best) {
          best = key;
          r.tmax = best.t;
        }
      }
      continue;
    }

    double tl = 0.0;
    double tr = 0.0;
    const bool hitL = rayHitsAabb(r, m_nodes[node.left].bounds, &tl);
    const bool hitR = rayHitsAabb(r, m_nodes[node.right].bounds, &tr);
    assert(top + 2 <= static_cast<int>(stack.size()));
    if (hitL && hitR) {
      if (tl <= tr) {
        stack[top++] = {node.right, tr};
        stack[top++] = {node.left, tl};
      } else {
        stack[top++] = {node.left, tl};
        stack[top++] = {node.right, tr};
      }
    } else if (hitL) {
      stack[top++] = {node.left, tl};
    } else if (hitR) {
      stack[top++] = {node.right, tr};
    }
  }
  return best;
}

bool Bvh::intersectAny(std::span<const Triangle> prims, const Ray &ray) const
{
  if (m_nodes.empty())
    return false;

  std::array<std::uint32_t, kMaxDepth + 1> stack;
  int top = 0;
  if (!rayHitsAabb(ray, m_nodes[root()].bounds))
    return false;
  stack[top++] = root();

  while (top > 0) {
    const BvhNode &node = m_nodes[stack[--top]];
    if (node.isLeaf()) {
      for (std::uint32_t i = node.firstPrim; i < node.firstPrim + node.primCount; ++i) {
        const auto hit = rayTriangleIntersect(ray, prims[m_primOrder[i]]);
        if (hit && hit->t > ray.tmin && hit->t < ray.tmax)
          return true;
      }
      continue;
    }
    if (rayHitsAabb(ray, m_nodes[node.left].bounds))
      stack[top++] = node.left;
    if (rayHitsAabb(ray, m_nodes[node.right].bounds))
      stack[top++] = node.right;
  }
  return false;
}

} // namespace dprt
