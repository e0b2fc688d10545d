// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/engine.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <string>

#include "dprt/error.hpp"

namespace dprt {

namespace {

constexpr size_t kRayStateBytes = 126;
constexpr size_t kBatchHeaderBytes = 13;

using Clock = std::chrono::steady_clock;

double millisSince(Clock::time_point start)
{
  return std::chrono::duration<double, std::milli>(Clock::now() - start).count();
}

void writeVec(ByteWriter &w, const Vec3 &v)
{
  w.f64(v.x);
  w.f64(v.y);
  w.f64(v.z);
}

Vec3 readVec(ByteReader &r)
{
  Vec3 v;
  v.x = r.f64();
  v.y = r.f64();
  v.z = r.f64();
  return v;
}

RayKind readKind(ByteReader &r)
{
  const auto offset = r.position();
  const std::uint8_t k = r.u8();
  if (k > static_cast<std::uint8_t>(RayKind::Reflection))
    throw DecodeError("unknown ray kind " + std::to_string(k), offset);
  return static_cast<RayKind>(k);
}

} // namespace

Bytes serializeBatch(const RayBatch &batch)
{
  Bytes out;
  out.reserve(kBatchHeaderBytes + batch.rays.size() * kRayStateBytes);
  ByteWriter w(out);
  w.u8(static_cast<std::uint8_t>(batch.kind));
  w.u32(batch.originRank);
  w.u32(batch.roundsCompleted);
  w.u32(static_cast<std::uint32_t>(batch.rays.size()));
  for (const auto &rs : batch.rays) {
    writeVec(w, rs.ray.origin);
    writeVec(w, rs.ray.direction);
    w.f64(rs.ray.tmin);
    w.f64(rs.ray.tmax);
    w.u32(rs.pixel);
    w.u32(rs.ownerRank);
    w.u8(static_cast<std::uint8_t>(rs.kind));
    w.f64(rs.bestHit.t);
    w.u64(rs.bestHit.globalId);
    w.u8(rs.occluded ? 1 : 0);
    writeVec(w, rs.throughput);
    w.u32(rs.lightIndex);
    w.u32(rs.depth);
    w.u32(rs.roundsCompleted);
  }
  return out;
}

RayBatch deserializeBatch(ByteView data)
{
  ByteReader r(data);
  RayBatch batch;
  batch.kind = readKind(r);
  batch.originRank = r.u32();
  batch.roundsCompleted = r.u32();
  const std::uint32_t count = r.u32();
  if (r.remaining() != size_t(count) * kRayStateBytes)
    throw DecodeError("ray batch length mismatch for " + std::to_string(count)
            + " rays",
        r.position());
  batch.rays.resize(count);
  for (auto &rs : batch.rays) {
    rs.ray.origin = readVec(r);
    rs.ray.direction = readVec(r);
    rs.ray.tmin = r.f64();
    rs.ray.tmax = r.f64();
    rs.pixel = r.u32();
    rs.ownerRank = r.u32();
    rs.kind = readKind(r);
    rs.bestHit.t = r.f64();
    rs.bestHit.globalId = r.u64();
    rs.occluded = r.u8() != 0;
    rs.throughput = readVec(r);
    rs.lightIndex = r.u32();
    rs.depth = r.u32();
    rs.roundsCompleted = r.u32();
  }
  return batch;
}

std::vector<RowRange> assignPixels(
    std::uint32_t /*width*/, std::uint32_t height, std::uint32_t numRanks)
{
  if (numRanks < 1)
    throw UsageError("pixel assignment needs at least one rank");
  std::vector<RowRange> ranges(numRanks);
  for (std::uint32_t r = 0; r < numRanks; ++r) {
    ranges[r].begin = static_cast<std::uint32_t>(std::uint64_t(r) * height / numRanks);
    ranges[r].end = static_cast<std::uint32_t>(std::uint64_t(r + 1) * height / numRanks);
  }
  return ranges;
}

// ---------------------------------------------------------------------------
// Shading table

ShadingTable::ShadingTable(std::vector<ShadingEntry> entries, Aabb sceneBounds)
    : m_entries(std::move(entries)), m_bounds(sceneBounds)
{
  std::sort(m_entries.begin(), m_entries.end(),
      [](const ShadingEntry &a, const ShadingEntry &b) { return a.globalId < b.globalId; });
  for (size_t i = 1; i < m_entries.size(); ++i) {
    if (m_entries[i].globalId == m_entries[i - 1].globalId)
      throw ValidationError("global id " + std::to_string(m_entries[i].globalId)
          + " appears more than once in the distributed scene");
  }
}

ShadingTable ShadingTable::fromScene(const SceneDesc &scene, const Partition &partition)
{
  std::vector<ShadingEntry> entries;
  entries.reserve(scene.triangles.size());
  for (size_t i = 0; i < scene.triangles.size(); ++i) {
    const Triangle &t = scene.triangles[i];
    entries.push_back({t.globalId, t.geometricNormal(),
        scene.materials.at(scene.materialOfPrim.at(i)), partition.rankOfPrim.at(i)});
  }
  return ShadingTable(std::move(entries), scene.bounds());
}

const ShadingEntry *ShadingTable::find(GlobalId id) const
{
  auto it = std::lower_bound(m_entries.begin(), m_entries.end(), id,
      [](const ShadingEntry &e, GlobalId v) { return e.globalId < v; });
  if (it == m_entries.end() || it->globalId != id)
    return nullptr;
  return &*it;
}

Bytes ShadingTable::encodeFragment(
    std::span<const ShadingEntry> entries, const Aabb &bounds)
{
  Bytes out;
  ByteWriter w(out);
  writeVec(w, bounds.lo);
  writeVec(w, bounds.hi);
  w.u32(static_cast<std::uint32_t>(entries.size()));
  for (const auto &e : entries) {
    w.u64(e.globalId);
    writeVec(w, e.normal);
    writeVec(w, e.material.albedo);
    writeVec(w, e.material.mirror);
    w.u32(e.rank);
  }
  return out;
}

ShadingTable ShadingTable::merge(std::span<const Bytes> fragments)
{
  std::vector<ShadingEntry> entries;
  Aabb bounds;
  for (const auto &frag : fragments) {
    ByteReader r(frag);
    Aabb b;
    b.lo = readVec(r);
    b.hi = readVec(r);
    bounds.extend(b);
    const std::uint32_t count = r.u32();
    for (std::uint32_t i = 0; i < count; ++i) {
      ShadingEntry e;
      e.globalId = r.u64();
      e.normal = readVec(r);
      e.material.albedo = readVec(r);
      e.material.mirror = readVec(r);
      e.rank = r.u32();
      entries.push_back(e);
    }
  }
  return ShadingTable(std::move(entries), bounds);
}

LocalWorld LocalWorld::fromPartition(const SceneDesc &scene, const Partition &partition,
    std::uint32_t rank, std::shared_ptr<const ShadingTable> shading)
{
  LocalWorld world;
  world.prims = partition.localTriangles(scene, rank);
  world.bvh = Bvh::build(world.prims);
  world.shading = std::move(shading);
  world.lights = scene.lights;
  return world;
}

// ---------------------------------------------------------------------------
// Wave stages

RayBatch genPrimaryBatch(std::uint32_t rank, std::uint32_t numRanks,
    const CameraSpec &cam, std::uint32_t width, std::uint32_t height)
{
  const RowRange rows = assignPixels(width, height, numRanks).at(rank);
  RayBatch batch;
  batch.kind = RayKind::Primary;
  batch.originRank = rank;
  batch.rays.reserve(size_t(rows.rows()) * width);
  for (std::uint32_t y = rows.begin; y < rows.end; ++y) {
    for (std::uint32_t x = 0; x < width; ++x) {
      RayState rs;
      rs.ray = cameraPrimaryRay(cam, static_cast<int>(x), static_cast<int>(y),
          static_cast<int>(width), static_cast<int>(height));
      rs.pixel = y * width + x;
      rs.ownerRank = rank;
      rs.kind = RayKind::Primary;
      batch.rays.push_back(rs);
    }
  }
  return batch;
}

void traceLocalRound(RayBatch &batch, const Bvh &bvh,
    std::span<const Triangle> prims, TraceCounters *counters)
{
  std::uint64_t nearest = 0;
  std::uint64_t any = 0;
  for (auto &rs : batch.rays) {
    if (rs.kind == RayKind::Shadow) {
      if (!rs.occluded) {
        rs.occluded = bvh.intersectAny(prims, rs.ray);
        ++any;
      }
    } else {
      // Clipping at the current best keeps equal-t ties reachable.
      Ray r = rs.ray;
      r.tmax = std::min(r.tmax, rs.bestHit.t);
      const HitKey local = bvh.intersectNearest(prims, r);
      ++nearest;
      if (local < rs.bestHit)
        rs.bestHit = local;
    }
    ++rs.roundsCompleted;
  }
  ++batch.roundsCompleted;
  if (counters) {
    counters->nearest += nearest;
    counters->any += any;
  }
}

RayBatch cycleBatch(Endpoint &ep, RayBatch batch, const LocalWorld &world,
    const RenderOptions &options, RenderStats *stats)
{
  const std::uint32_t rounds = options.disableCycling ? 1 : ep.size();
  const RayKind kind = batch.kind;

  for (std::uint32_t k = 0; k < rounds; ++k) {
    const auto start = Clock::now();
    TraceCounters counters;
    const std::uint64_t traced = batch.rays.size();
    traceLocalRound(batch, world.bvh, world.prims, &counters);

    std::uint64_t sent = 0;
    if (rounds > 1) {
      const Bytes out = serializeBatch(batch);
      sent = framedSize(out.size());
      batch = deserializeBatch(ep.ringExchange(out));
    }

    if (stats) {
      stats->nearestQueries += counters.nearest;
      stats->anyQueries += counters.any;
      if (kind == RayKind::Primary)
        stats->primaryNearestQueries += counters.nearest;
      stats->rounds.push_back({static_cast<std::uint32_t>(stats->rounds.size()),
          kind, traced, sent, millisSince(start)});
    }
  }

  if (batch.originRank != ep.rank() || batch.kind != kind)
    throw ProtocolError("rank " + std::to_string(ep.rank())
        + " received a foreign batch at the end of a cycle");
  if (stats) {
    bool complete = batch.roundsCompleted == rounds;
    for (const auto &rs : batch.rays)
      complete = complete && rs.roundsCompleted == rounds;
    stats->cyclesComplete = stats->cyclesComplete && complete;
  }
  return batch;
}

Rgb rankColor(std::uint32_t rank)
{
  static constexpr Rgb kPalette[] = {
      {0.894, 0.102, 0.110},
      {0.216, 0.494, 0.722},
      {0.302, 0.686, 0.290},
      {0.596, 0.306, 0.639},
      {1.000, 0.498, 0.000},
      {1.000, 1.000, 0.200},
      {0.651, 0.337, 0.157},
      {0.969, 0.506, 0.749},
  };
  return kPalette[rank % std::size(kPalette)];
}

ShadeOutput shadeAndSpawn(const RayBatch &batch, const ShadingTable &shading,
    std::span<const Light> lights, const RenderOptions &options)
{
  ShadeOutput out;
  out.shadow.kind = RayKind::Shadow;
  out.shadow.originRank = batch.originRank;
  out.reflection.kind = RayKind::Reflection;
  out.reflection.originRank = batch.originRank;

  const double eps = kRayEpsilonScale * shading.sceneBounds().diagonal();

  for (const auto &rs : batch.rays) {
    if (rs.kind == RayKind::Shadow)
      continue;

    if (rs.bestHit.isMiss()) {
      out.contributions.emplace_back(rs.pixel, rs.throughput * options.background);
      continue;
    }

    const ShadingEntry *entry = shading.find(rs.bestHit.globalId);
    if (!entry)
      throw ValidationError("hit on global id " + std::to_string(rs.bestHit.globalId)
          + " missing from the shading table");

    if (options.mode == RenderMode::RankColor) {
      out.contributions.emplace_back(rs.pixel, rankColor(entry->rank));
      continue;
    }

    const Vec3 &d = rs.ray.direction;
    const Vec3 p = rs.ray.at(rs.bestHit.t);
    Vec3 n = entry->normal;
    if (dot(n, d) > 0.0)
      n = -n;
    const Rgb &albedo = entry->material.albedo;

    out.contributions.emplace_back(
        rs.pixel, rs.throughput * (albedo * options.ambient));

    for (std::uint32_t li = 0; li < lights.size(); ++li) {
      const Light &light = lights[li];
      const Vec3 toLight = light.kind == LightKind::Point
          ? normalize(light.vector - p)
          : -light.vector;
      const double ndl = dot(n, toLight);

      RayState shadow;
      shadow.kind = RayKind::Shadow;
      shadow.pixel = rs.pixel;
      shadow.ownerRank = rs.ownerRank;
      shadow.lightIndex = li;
      shadow.depth = rs.depth;
      shadow.throughput = rs.throughput * albedo * light.intensity * std::max(0.0, ndl);
      shadow.ray.origin = p + (ndl >= 0.0 ? n : -n) * eps;
      shadow.ray.tmin = 0.0;
      if (light.kind == LightKind::Point) {
        const Vec3 span = light.vector - shadow.ray.origin;
        shadow.ray.tmax = length(span);
        shadow.ray.direction = normalize(span);
      } else {
        shadow.ray.tmax = kInf;
        shadow.ray.direction = toLight;
      }
      out.shadow.rays.push_back(shadow);
      out.shadowReceivers.push_back(rs.bestHit.globalId);
    }

    const Rgb &mirror = entry->material.mirror;
    if ((mirror.x > 0.0 || mirror.y > 0.0 || mirror.z > 0.0)
        && rs.depth < options.maxDepth) {
      RayState refl;
      refl.kind = RayKind::Reflection;
      refl.pixel = rs.pixel;
      refl.ownerRank = rs.ownerRank;
      refl.depth = rs.depth + 1;
      refl.throughput = rs.throughput * mirror;
      refl.ray.origin = p + n * eps;
      refl.ray.direction = normalize(d - n * (2.0 * dot(d, n)));
      refl.ray.tmin = 0.0;
      refl.ray.tmax = kInf;
      out.reflection.rays.push_back(refl);
    }
  }
  return out;
}

std::uint8_t toneMap(double v)
{
  const double c = std::clamp(std::isnan(v) ? 0.0 : v, 0.0, 1.0);
  return static_cast<std::uint8_t>(std::floor(c * 255.0 + 0.5));
}

// ---------------------------------------------------------------------------
// Collective frame

std::uint64_t renderDigest(const CameraSpec &cam, std::uint32_t width,
    std::uint32_t height, const RenderOptions &options, std::span<const Light> lights)
{
  Bytes buf;
  ByteWriter w(buf);
  writeVec(w, cam.position);
  writeVec(w, cam.viewDir);
  writeVec(w, cam.up);
  w.f64(cam.fovY);
  w.f64(cam.aspect);
  w.u32(width);
  w.u32(height);
  w.u32(options.maxDepth);
  w.f64(options.ambient);
  writeVec(w, options.background);
  w.u8(static_cast<std::uint8_t>(options.mode));
  w.u8(options.disableCycling ? 1 : 0);
  w.u8(options.recordVisibility ? 1 : 0);
  w.u32(static_cast<std::uint32_t>(lights.size()));
  for (const auto &l : lights) {
    w.u8(static_cast<std::uint8_t>(l.kind));
    writeVec(w, l.vector);
    writeVec(w, l.intensity);
  }
  return fnv1a64(buf);
}

void checkCollectiveDigest(Endpoint &ep, std::uint64_t digest)
{
  Bytes mine;
  ByteWriter(mine).u64(digest);
  const Bytes rootDigest = ep.broadcastFromRoot(mine);
  const std::uint8_t agree = rootDigest == mine ? 1 : 0;

  const auto flags = ep.gatherToRoot(ByteView(&agree, 1));
  Bytes verdict;
  if (ep.isRoot()) {
    for (std::uint32_t r = 0; r < flags.size(); ++r) {
      if (flags[r].size() != 1 || flags[r][0] != 1)
        verdict.push_back(static_cast<std::uint8_t>(std::min<std::uint32_t>(r, 255)));
    }
  }
  verdict = ep.broadcastFromRoot(verdict);
  if (!verdict.empty()) {
    std::string ranks;
    for (auto r : verdict)
      ranks += (ranks.empty() ? "" : ", ") + std::to_string(r);
    throw ContractError("collective contract violated: render parameters on rank(s) "
        + ranks + " differ from rank 0");
  }
}

RenderResult renderFrame(Endpoint &ep, const LocalWorld &world, CameraSpec cam,
    std::uint32_t width, std::uint32_t height, const RenderOptions &options)
{
  if (width == 0 || height == 0)
    throw UsageError("image dimensions must be positive");
  if (!world.shading)
    throw UsageError("render requires a shading table");
  cam.aspect = double(width) / double(height);
  cam.validate();

  checkCollectiveDigest(ep, renderDigest(cam, width, height, options, world.lights));

  RenderResult result;
  const RowRange rows = assignPixels(width, height, ep.size())[ep.rank()];
  const std::uint32_t firstPixel = rows.begin * width;
  std::vector<Rgb> accum(size_t(rows.rows()) * width);
  auto add = [&](std::uint32_t pixel, const Rgb &c) { accum[pixel - firstPixel] += c; };

  RayBatch wave = genPrimaryBatch(ep.rank(), ep.size(), cam, width, height);
  for (std::uint32_t depth = 0; depth <= options.maxDepth; ++depth) {
    wave = cycleBatch(ep, std::move(wave), world, options, &result.stats);
    ShadeOutput shaded = shadeAndSpawn(wave, *world.shading, world.lights, options);
    for (const auto &[pixel, c] : shaded.contributions)
      add(pixel, c);
    if (options.mode == RenderMode::RankColor)
      break;

    RayBatch shadows =
        cycleBatch(ep, std::move(shaded.shadow), world, options, &result.stats);
    for (size_t i = 0; i < shadows.rays.size(); ++i) {
      const RayState &s = shadows.rays[i];
      if (!s.occluded)
        add(s.pixel, s.throughput);
      if (options.recordVisibility) {
        result.visibility.push_back({s.pixel, s.depth, s.lightIndex,
            shaded.shadowReceivers[i], s.ray, s.occluded});
      }
    }
    wave = std::move(shaded.reflection);
  }

  Bytes tile;
  tile.reserve(accum.size() * 3);
  for (const auto &c : accum) {
    tile.push_back(toneMap(c.x));
    tile.push_back(toneMap(c.y));
    tile.push_back(toneMap(c.z));
  }
  auto tiles = ep.gatherToRoot(tile);
  if (ep.isRoot()) {
    Image img;
    img.width = width;
    img.height = height;
    img.rgb.reserve(size_t(width) * height * 3);
    for (const auto &t : tiles)
      img.rgb.insert(img.rgb.end(), t.begin(), t.end());
    if (img.rgb.size() != size_t(width) * height * 3)
      throw ProtocolError("gathered tiles do not cover the image");
    result.image = std::move(img);
  }
  return result;
}

} // namespace dprt
