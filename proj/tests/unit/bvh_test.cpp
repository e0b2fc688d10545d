// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <random>

#include "dprt/bvh.hpp"
#include "oracle.hpp"

namespace dprt {
namespace {

Ray rayAlongZ(double tmax = kInf)
{
  Ray r;
  r.origin = {0.2, 0.2, 0.0};
  r.direction = {0, 0, 1};
  r.tmax = tmax;
  return r;
}

Triangle facingZ(double z, GlobalId id)
{
  return {{0, 0, z}, {1, 0, z}, {0, 1, z}, id};
}

TEST(Bvh, EmptySceneMisses)
{
  const std::vector<Triangle> none;
  const Bvh bvh = Bvh::build(none);
  EXPECT_TRUE(bvh.intersectNearest(none, rayAlongZ()).isMiss());
  EXPECT_FALSE(bvh.intersectAny(none, rayAlongZ()));
}

TEST(Bvh, SingletonIsOneLeaf)
{
  const std::vector<Triangle> one{facingZ(1.0, 9)};
  const Bvh bvh = Bvh::build(one);
  ASSERT_EQ(bvh.nodes().size(), 1u);
  EXPECT_TRUE(bvh.nodes()[0].isLeaf());
  EXPECT_EQ(bvh.nodes()[0].bounds.lo, one[0].bounds().lo);
  EXPECT_EQ(bvh.nodes()[0].bounds.hi, one[0].bounds().hi);
}

TEST(Bvh, NearerWins)
{
  const std::vector<Triangle> tris{facingZ(2.0, 1), facingZ(1.0, 2)};
  const HitKey h = Bvh::build(tris).intersectNearest(tris, rayAlongZ());
  EXPECT_DOUBLE_EQ(h.t, 1.0);
  EXPECT_EQ(h.globalId, 2u);
}

TEST(Bvh, CoincidentTieGoesToSmallerId)
{
  const std::vector<Triangle> tris{facingZ(1.0, 7), facingZ(1.0, 3)};
  const HitKey h = Bvh::build(tris).intersectNearest(tris, rayAlongZ());
  EXPECT_EQ(h.globalId, 3u);
}

TEST(Bvh, TieAcrossManyLeaves)
{
  // Far more duplicates than fit in a leaf, so ties span subtrees.
  std::vector<Triangle> tris;
  for (GlobalId id = 100; id > 0; --id)
    tris.push_back(facingZ(1.0, id * 5));
  const HitKey h = Bvh::build(tris).intersectNearest(tris, rayAlongZ());
  EXPECT_EQ(h.globalId, 5u);
}

TEST(Bvh, AnyHitRespectsTmax)
{
  const std::vector<Triangle> far{facingZ(5.0, 1)};
  EXPECT_FALSE(Bvh::build(far).intersectAny(far, rayAlongZ(2.0)));
  const std::vector<Triangle> near{facingZ(1.0, 1)};
  EXPECT_TRUE(Bvh::build(near).intersectAny(near, rayAlongZ(2.0)));
}

TEST(Bvh, AnyHitIntervalIsOpen)
{
  const std::vector<Triangle> tris{facingZ(2.0, 1)};
  EXPECT_FALSE(Bvh::build(tris).intersectAny(tris, rayAlongZ(2.0)));
}

TEST(Bvh, PrimOrderIsAPermutation)
{
  const auto tris = oracle::randomTriangles(3, 777);
  const Bvh bvh = Bvh::build(tris);
  std::vector<std::uint32_t> order = bvh.primOrder();
  std::sort(order.begin(), order.end());
  for (std::uint32_t i = 0; i < order.size(); ++i)
    ASSERT_EQ(order[i], i);
  for (const auto &n : bvh.nodes()) {
    if (n.isLeaf())
      EXPECT_LE(n.primCount, Bvh::kLeafSize);
  }
}

TEST(Bvh, BuildIsDeterministic)
{
  const auto tris = oracle::randomTriangles(5, 1000);
  const Bvh a = Bvh::build(tris);
  const Bvh b = Bvh::build(tris);
  EXPECT_EQ(a.primOrder(), b.primOrder());
  ASSERT_EQ(a.nodes().size(), b.nodes().size());
}

TEST(Bvh, MatchesLinearScanOn1024Triangles)
{
  const auto tris = oracle::randomTriangles(1024, 1024);
  const Bvh bvh = Bvh::build(tris);
  std::mt19937_64 rng(42);
  int hits = 0;
  for (int i = 0; i < 10000; ++i) {
    const Ray r = oracle::randomRay(rng);
    const HitKey expect = oracle::nearest(tris, r);
    const HitKey got = bvh.intersectNearest(tris, r);
    ASSERT_EQ(got, expect) << "ray " << i;
    ASSERT_EQ(bvh.intersectAny(tris, r), oracle::any(tris, r)) << "ray " << i;
    hits += expect.isMiss() ? 0 : 1;
  }
  EXPECT_GT(hits, 1000);
}

TEST(Bvh, MatchesLinearScanOnManySmallScenes)
{
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto tris = oracle::randomTriangles(seed, static_cast<std::uint32_t>(seed * 37));
    const Bvh bvh = Bvh::build(tris);
    std::mt19937_64 rng(seed * 1000);
    for (int i = 0; i < 1000; ++i) {
      const Ray r = oracle::randomRay(rng);
      ASSERT_EQ(bvh.intersectNearest(tris, r), oracle::nearest(tris, r));
      ASSERT_EQ(bvh.intersectAny(tris, r), oracle::any(tris, r));
    }
  }
}

} // namespace
} // namespace dprt
