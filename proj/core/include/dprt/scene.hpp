// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "dprt/geom.hpp"

namespace dprt {

struct Material
{
  Rgb albedo{0.8, 0.8, 0.8};
  Rgb mirror{0.0, 0.0, 0.0}; // zero means purely diffuse

  friend bool operator==(const Material &, const Material &) = default;
};

enum class LightKind : std::uint8_t
{
  Point,
  Directional
};

struct Light
{
  LightKind kind{LightKind::Directional};
  // Point lights: world position. Directional lights: normalized direction
  // the light travels in (the surface-to-light vector is its negation).
  Vec3 vector{0.0, -1.0, 0.0};
  Rgb intensity{1.0, 1.0, 1.0};

  friend bool operator==(const Light &, const Light &) = default;
};

struct SceneDesc
{
  std::vector<Triangle> triangles;
  std::vector<std::uint32_t> materialOfPrim; // one entry per triangle
  std::vector<Material> materials;
  std::vector<Light> lights;
  Rgb background{0.0, 0.0, 0.0};
  // Rank each triangle was assigned to by whoever produced the data.
  std::optional<std::vector<std::uint32_t>> rankOfPrim;
  std::vector<std::string> timeSteps;

  Aabb bounds() const;
  // Throws ValidationError naming the first inconsistent field.
  void validate() const;

  friend bool operator==(const SceneDesc &, const SceneDesc &);
};

// Parses the JSON scene document. Relative binary-buffer paths resolve
// against baseDir. Throws ParseError naming the offending field.
SceneDesc parseScene(std::string_view document,
    const std::filesystem::path &baseDir = {});
SceneDesc loadSceneFile(const std::filesystem::path &path);

// Canonical text form with triangles inlined; parseScene inverts it.
std::string serializeScene(const SceneDesc &scene);

enum class PartitionStrategy
{
  RoundRobin,
  SpatialSlab,
  FromFile
};

std::optional<PartitionStrategy> parsePartitionStrategy(std::string_view name);
std::string_view toString(PartitionStrategy strategy);

struct Partition
{
  std::uint32_t numRanks{1};
  std::vector<std::uint32_t> rankOfPrim; // indexed by triangle position
  std::vector<std::vector<std::uint32_t>> localSets; // triangle positions per rank

  std::vector<Triangle> localTriangles(
      const SceneDesc &scene, std::uint32_t rank) const;
};

// FromFile assignments naming more ranks than numRanks fold by rank mod R.
Partition partitionScene(
    const SceneDesc &scene, std::uint32_t numRanks, PartitionStrategy strategy);

// Standard deviation cap of the blobs drawn by generateUnevenCloud; every
// centroid lies within the unit cube grown by 4 * kCloudSigmaMax.
inline constexpr double kCloudSigmaMax = 0.08;

// Seeded triangle soup drawn from a mixture of Gaussian blobs with unequal
// weights. Identical arguments give bit-identical scenes.
SceneDesc generateUnevenCloud(std::uint64_t seed, std::uint32_t n,
    std::uint32_t clusters);

} // namespace dprt
