// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "dprt/bvh.hpp"
#include "dprt/geom.hpp"
#include "dprt/scene.hpp"
#include "dprt/transport.hpp"

namespace dprt {

enum class RayKind : std::uint8_t
{
  Primary = 0,
  Shadow = 1,
  Reflection = 2
};

// One ray in flight. Only the owner rank creates and shades it; every other
// rank just narrows bestHit (or sets occluded) against its local geometry.
struct RayState
{
  Ray ray;
  std::uint32_t pixel{0}; // flat index, row-major
  std::uint32_t ownerRank{0};
  RayKind kind{RayKind::Primary};
  HitKey bestHit{};
  bool occluded{false};
  // Path weight for radiance rays; the pending direct-light term for shadow
  // rays.
  Rgb throughput{1.0, 1.0, 1.0};
  std::uint32_t lightIndex{0};
  std::uint32_t depth{0};
  // Ranks this ray has been traced on during the current cycle.
  std::uint32_t roundsCompleted{0};

  friend bool operator==(const RayState &, const RayState &) = default;
};

struct RayBatch
{
  RayKind kind{RayKind::Primary};
  std::uint32_t originRank{0};
  std::uint32_t roundsCompleted{0};
  std::vector<RayState> rays;

  friend bool operator==(const RayBatch &, const RayBatch &) = default;
};

// Fixed-width little-endian encoding that preserves ray order bit-exactly.
Bytes serializeBatch(const RayBatch &batch);
RayBatch deserializeBatch(ByteView data);

struct RowRange
{
  std::uint32_t begin{0};
  std::uint32_t end{0}; // exclusive

  std::uint32_t rows() const
  {
    return end - begin;
  }
};

// Rank r owns rows [floor(r*H/R), floor((r+1)*H/R)).
std::vector<RowRange> assignPixels(
    std::uint32_t width, std::uint32_t height, std::uint32_t numRanks);

// Per-primitive data every rank needs to shade hits on geometry it does not
// hold. Replicated in full on every rank.
struct ShadingEntry
{
  GlobalId globalId{0};
  Vec3 normal;
  Material material;
  std::uint32_t rank{0}; // rank holding the geometry

  friend bool operator==(const ShadingEntry &, const ShadingEntry &) = default;
};

class ShadingTable
{
 public:
  ShadingTable() = default;
  // Throws ValidationError on duplicate global ids.
  ShadingTable(std::vector<ShadingEntry> entries, Aabb sceneBounds);

  static ShadingTable fromScene(const SceneDesc &scene, const Partition &partition);

  const ShadingEntry *find(GlobalId id) const;
  const Aabb &sceneBounds() const
  {
    return m_bounds;
  }
  size_t size() const
  {
    return m_entries.size();
  }
  std::span<const ShadingEntry> entries() const
  {
    return m_entries;
  }

  // One rank's share, for exchange between ranks.
  static Bytes encodeFragment(std::span<const ShadingEntry> entries, const Aabb &bounds);
  static ShadingTable merge(std::span<const Bytes> fragments);

 private:
  std::vector<ShadingEntry> m_entries; // sorted by globalId
  Aabb m_bounds;
};

// Everything one rank holds while rendering.
struct LocalWorld
{
  std::vector<Triangle> prims;
  Bvh bvh;
  std::shared_ptr<const ShadingTable> shading;
  std::vector<Light> lights;

  static LocalWorld fromPartition(const SceneDesc &scene, const Partition &partition,
      std::uint32_t rank, std::shared_ptr<const ShadingTable> shading);
};

enum class RenderMode : std::uint8_t
{
  Shaded = 0,
  RankColor = 1
};

struct RenderOptions
{
  std::uint32_t maxDepth{1};
  double ambient{0.1};
  Rgb background{0.0, 0.0, 0.0};
  RenderMode mode{RenderMode::Shaded};
  // Debug: trace each batch on its owner rank only.
  bool disableCycling{false};
  // Keep a record of every shadow ray's outcome in RenderResult.
  bool recordVisibility{false};
};

// Self-intersection offset for spawned rays, relative to the scene diagonal.
inline constexpr double kRayEpsilonScale = 1e-4;

struct RoundStats
{
  std::uint32_t round{0}; // running index within the frame
  RayKind kind{RayKind::Primary};
  std::uint64_t raysTraced{0};
  std::uint64_t bytesExchanged{0};
  double millis{0.0};
};

struct RenderStats
{
  std::vector<RoundStats> rounds;
  std::uint64_t primaryNearestQueries{0};
  std::uint64_t nearestQueries{0};
  std::uint64_t anyQueries{0};
  // True iff every ray of every batch came home with roundsCompleted equal to
  // the number of ranks it was meant to visit.
  bool cyclesComplete{true};
};

struct VisibilityRecord
{
  std::uint32_t pixel{0};
  std::uint32_t depth{0};
  std::uint32_t lightIndex{0};
  GlobalId receiver{kMissId};
  Ray ray;
  bool occluded{false};
};

struct Image
{
  std::uint32_t width{0};
  std::uint32_t height{0};
  std::vector<std::uint8_t> rgb; // row-major, top row first

  friend bool operator==(const Image &, const Image &) = default;
};

struct RenderResult
{
  std::optional<Image> image; // root only
  RenderStats stats;
  std::vector<VisibilityRecord> visibility; // this rank's pixels
};

struct TraceCounters
{
  std::uint64_t nearest{0};
  std::uint64_t any{0};
};

RayBatch genPrimaryBatch(std::uint32_t rank, std::uint32_t numRanks,
    const CameraSpec &cam, std::uint32_t width, std::uint32_t height);

// One rank's share of a cycle: narrows hits / occlusion against local data.
void traceLocalRound(RayBatch &batch, const Bvh &bvh,
    std::span<const Triangle> prims, TraceCounters *counters = nullptr);

// Traces the batch on every rank by passing it around the ring; it returns
// to its origin rank after R rounds.
RayBatch cycleBatch(Endpoint &ep, RayBatch batch, const LocalWorld &world,
    const RenderOptions &options, RenderStats *stats = nullptr);

struct ShadeOutput
{
  std::vector<std::pair<std::uint32_t, Rgb>> contributions; // (pixel, rgb)
  RayBatch shadow;
  RayBatch reflection;
  std::vector<GlobalId> shadowReceivers; // parallel to shadow.rays
};

// Palette color for hits on geometry held by `rank`.
Rgb rankColor(std::uint32_t rank);

ShadeOutput shadeAndSpawn(const RayBatch &batch, const ShadingTable &shading,
    std::span<const Light> lights, const RenderOptions &options);

// clamp to [0,1], then round half up to 8 bits.
std::uint8_t toneMap(double v);

// Content digest of everything that must match across ranks for a render.
std::uint64_t renderDigest(const CameraSpec &cam, std::uint32_t width,
    std::uint32_t height, const RenderOptions &options, std::span<const Light> lights);

// Collective: root broadcasts its digest, every rank compares, and the
// verdict is shared so that all ranks throw ContractError together.
void checkCollectiveDigest(Endpoint &ep, std::uint64_t digest);

// Collective frame render. Output bytes are identical for any rank count and
// any partition of the same scene.
RenderResult renderFrame(Endpoint &ep, const LocalWorld &world, CameraSpec cam,
    std::uint32_t width, std::uint32_t height, const RenderOptions &options);

} // namespace dprt
