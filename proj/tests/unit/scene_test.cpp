// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <filesystem>
#include <fstream>
#include <set>

#include "dprt/error.hpp"
#include "dprt/scene.hpp"
#include "oracle.hpp"

namespace dprt {
namespace {

constexpr const char *kMinimal = R"({
  "triangles": [[0,0,0, 1,0,0, 0,1,0]],
  "materials": [{"albedo": [0.5, 0.5, 0.5]}],
  "lights": [{"kind": "directional", "direction": [0, -1, 0]}]
})";

std::string errorOf(const std::string &doc)
{
  try {
    parseScene(doc);
  } catch (const Error &e) {
    return e.what();
  }
  return "";
}

TEST(ParseScene, MinimalDocument)
{
  const SceneDesc s = parseScene(kMinimal);
  EXPECT_EQ(s.triangles.size(), 1u);
  EXPECT_EQ(s.materials.size(), 1u);
  EXPECT_EQ(s.lights.size(), 1u);
  EXPECT_EQ(s.materialOfPrim, std::vector<std::uint32_t>{0});
  EXPECT_EQ(s.triangles[0].globalId, 0u);
  EXPECT_EQ(s.lights[0].kind, LightKind::Directional);
}

TEST(ParseScene, MaterialIndexOutOfRange)
{
  const std::string msg = errorOf(R"({
    "triangles": [[0,0,0, 1,0,0, 0,1,0]],
    "materialOfPrim": [5],
    "materials": [{"albedo": [1,1,1]}, {"albedo": [1,0,0]}]
  })");
  EXPECT_NE(msg.find("material index out of range"), std::string::npos) << msg;
  EXPECT_NE(msg.find("materialOfPrim[0]"), std::string::npos) << msg;
}

TEST(ParseScene, ErrorsNameTheField)
{
  EXPECT_NE(errorOf(R"({"materials": []})").find("triangles"), std::string::npos);
  EXPECT_NE(errorOf(R"({"triangles": [[0,0,0]], "materials": []})").find("triangles[0]"),
      std::string::npos);
  EXPECT_NE(errorOf(R"({"triangles": [], "materials": [{"albedo": [2,0,0]}]})")
                .find("materials[0].albedo"),
      std::string::npos);
  EXPECT_NE(errorOf(R"({"triangles": [], "materials": [],
                        "lights": [{"kind": "spot"}]})")
                .find("lights[0].kind"),
      std::string::npos);
  EXPECT_NE(errorOf("{not json").find("document"), std::string::npos);
  EXPECT_NE(errorOf(R"({"triangles": [[0,0,0,1,0,0,0,1,0]], "materials": [{"albedo":[1,1,1]}],
                        "rankOfPrim": [0, 1]})")
                .find("rankOfPrim"),
      std::string::npos);
}

TEST(ParseScene, DuplicateGlobalIdsRejected)
{
  const std::string msg = errorOf(R"({
    "triangles": [[0,0,0,1,0,0,0,1,0], [0,0,1,1,0,1,0,1,1]],
    "globalIds": [4, 4],
    "materials": [{"albedo": [1,1,1]}]
  })");
  EXPECT_NE(msg.find("globalIds[1]"), std::string::npos) << msg;
}

TEST(ParseScene, DirectionalLightIsNormalized)
{
  const SceneDesc s = parseScene(R"({
    "triangles": [], "materials": [],
    "lights": [{"kind": "directional", "direction": [0, -2, 0], "intensity": [0.5, 0.5, 0.5]}]
  })");
  EXPECT_EQ(s.lights[0].vector, (Vec3{0, -1, 0}));
  EXPECT_EQ(s.lights[0].intensity, (Vec3{0.5, 0.5, 0.5}));
}

TEST(ParseScene, BinaryTriangleBuffer)
{
  const auto dir = std::filesystem::temp_directory_path() / "dprt_scene_test";
  std::filesystem::create_directories(dir);
  const std::vector<double> data{0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0, 2, 1, 0, 2, 0, 1, 2};
  {
    std::ofstream out(dir / "tris.bin", std::ios::binary);
    out.write(reinterpret_cast<const char *>(data.data()),
        static_cast<std::streamsize>(data.size() * sizeof(double)));
  }
  {
    std::ofstream out(dir / "scene.json");
    out << R"({"triangles": {"binary": "tris.bin", "count": 2},
               "materials": [{"albedo": [1,1,1]}]})";
  }
  const SceneDesc s = loadSceneFile(dir / "scene.json");
  ASSERT_EQ(s.triangles.size(), 2u);
  EXPECT_EQ(s.triangles[1].v2, (Vec3{0, 1, 2}));
  EXPECT_EQ(s.triangles[1].globalId, 1u);

  {
    std::ofstream out(dir / "short.json");
    out << R"({"triangles": {"binary": "tris.bin", "count": 3}, "materials": []})";
  }
  EXPECT_THROW(loadSceneFile(dir / "short.json"), ParseError);
}

TEST(ParseScene, SerializeRoundTrips)
{
  SceneDesc s = generateUnevenCloud(3, 200, 3);
  s.rankOfPrim = std::vector<std::uint32_t>(s.triangles.size(), 1);
  s.triangles[0].globalId = 999;
  EXPECT_EQ(parseScene(serializeScene(s)), s);
}

TEST(Partition, RoundRobinIsModular)
{
  SceneDesc s = oracle::sceneOf(oracle::randomTriangles(1, 10));
  for (GlobalId i = 0; i < 10; ++i)
    s.triangles[i].globalId = i;
  const Partition p = partitionScene(s, 2, PartitionStrategy::RoundRobin);
  std::set<GlobalId> rank0;
  for (auto idx : p.localSets[0])
    rank0.insert(s.triangles[idx].globalId);
  EXPECT_EQ(rank0, (std::set<GlobalId>{0, 2, 4, 6, 8}));
}

TEST(Partition, SlabCutsInCoordinateOrder)
{
  std::vector<Triangle> tris;
  for (GlobalId i = 0; i < 9; ++i) {
    const double x = double((i * 4) % 9); // shuffled positions along x
    tris.push_back({{x, 0, 0}, {x + 0.5, 0, 0}, {x, 0.5, 0}, i});
  }
  const SceneDesc s = oracle::sceneOf(tris);
  const Partition p = partitionScene(s, 3, PartitionStrategy::SpatialSlab);
  for (std::uint32_t r = 0; r < 3; ++r) {
    ASSERT_EQ(p.localSets[r].size(), 3u);
    for (auto idx : p.localSets[r]) {
      const double x = s.triangles[idx].v0.x;
      EXPECT_GE(x, 3.0 * r);
      EXPECT_LT(x, 3.0 * (r + 1));
    }
  }
}

TEST(Partition, FromFileHonorsAssignment)
{
  SceneDesc s = oracle::sceneOf(oracle::randomTriangles(2, 3));
  s.rankOfPrim = std::vector<std::uint32_t>{0, 1, 0};
  const Partition p = partitionScene(s, 2, PartitionStrategy::FromFile);
  EXPECT_EQ(p.rankOfPrim, (std::vector<std::uint32_t>{0, 1, 0}));
  EXPECT_EQ(p.localSets[0], (std::vector<std::uint32_t>{0, 2}));
  EXPECT_EQ(p.localSets[1], (std::vector<std::uint32_t>{1}));
}

TEST(Partition, FromFileWithoutAssignmentThrows)
{
  const SceneDesc s = oracle::sceneOf(oracle::randomTriangles(2, 3));
  EXPECT_THROW(partitionScene(s, 2, PartitionStrategy::FromFile), UsageError);
}

TEST(Partition, NeverDropsOrDuplicates)
{
  for (std::uint64_t seed = 1; seed <= 10; ++seed) {
    SceneDesc s = generateUnevenCloud(seed, 500 + 37 * static_cast<std::uint32_t>(seed), 4);
    s.rankOfPrim = std::vector<std::uint32_t>(s.triangles.size());
    for (size_t i = 0; i < s.triangles.size(); ++i)
      (*s.rankOfPrim)[i] = static_cast<std::uint32_t>((i * 7919) % 13);
    for (auto strategy : {PartitionStrategy::RoundRobin, PartitionStrategy::SpatialSlab,
             PartitionStrategy::FromFile}) {
      for (std::uint32_t R : {1u, 2u, 3u, 5u, 8u}) {
        const Partition p = partitionScene(s, R, strategy);
        std::multiset<GlobalId> seen;
        for (std::uint32_t r = 0; r < R; ++r) {
          for (const auto &t : p.localTriangles(s, r))
            seen.insert(t.globalId);
        }
        std::multiset<GlobalId> all;
        for (const auto &t : s.triangles)
          all.insert(t.globalId);
        ASSERT_EQ(seen, all) << toString(strategy) << " R=" << R;
      }
    }
  }
}

TEST(Partition, StrategyNames)
{
  EXPECT_EQ(parsePartitionStrategy("roundrobin"), PartitionStrategy::RoundRobin);
  EXPECT_EQ(parsePartitionStrategy("spatialSlab"), PartitionStrategy::SpatialSlab);
  EXPECT_EQ(parsePartitionStrategy("fromfile"), PartitionStrategy::FromFile);
  EXPECT_FALSE(parsePartitionStrategy("random"));
}

TEST(UnevenCloud, Deterministic)
{
  EXPECT_EQ(serializeScene(generateUnevenCloud(1, 100, 3)),
      serializeScene(generateUnevenCloud(1, 100, 3)));
  EXPECT_NE(serializeScene(generateUnevenCloud(1, 100, 3)),
      serializeScene(generateUnevenCloud(2, 100, 3)));
}

TEST(UnevenCloud, CountAndBounds)
{
  for (std::uint64_t seed : {1, 2, 3}) {
    const SceneDesc s = generateUnevenCloud(seed, 1000, 5);
    ASSERT_EQ(s.triangles.size(), 1000u);
    const double margin = 4.0 * kCloudSigmaMax;
    for (const auto &t : s.triangles) {
      const Vec3 c = t.centroid();
      for (int a = 0; a < 3; ++a) {
        EXPECT_GE(c[a], -margin);
        EXPECT_LE(c[a], 1.0 + margin);
      }
    }
    EXPECT_NO_THROW(s.validate());
  }
}

TEST(UnevenCloud, SlabVolumesAreUneven)
{
  const SceneDesc s = generateUnevenCloud(1, 10000, 4);
  const Partition p = partitionScene(s, 4, PartitionStrategy::SpatialSlab);
  double lo = kInf, hi = 0.0;
  for (std::uint32_t r = 0; r < 4; ++r) {
    Aabb b;
    for (const auto &t : p.localTriangles(s, r))
      b.extend(t.bounds());
    const Vec3 e = b.extent();
    const double v = e.x * e.y * e.z;
    lo = std::min(lo, v);
    hi = std::max(hi, v);
  }
  EXPECT_GT(hi / lo, 1.5);
}

} // namespace
} // namespace dprt
