// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

// Acceptance checks. Prints one PASS/FAIL line per criterion and exits
// non-zero if any criterion fails.

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cstdio>
#include <cstring>
#include <functional>
#include <iostream>
#include <map>
#include <sstream>
#include <string>
#include <thread>
#include <tuple>

#include "dprt/api.hpp"
#include "dprt/error.hpp"
#include "dprt/ppm.hpp"
#include "dprt/timestep_cache.hpp"
#include "oracle.hpp"

namespace dprt::acceptance {
namespace {

using Clock = std::chrono::steady_clock;

// Pinned tolerances and sizes.
constexpr std::uint32_t kEquivWidth = 256;
constexpr std::uint32_t kEquivHeight = 256;
constexpr std::uint32_t kBvhScenes = 200;
constexpr std::uint32_t kBvhMaxTriangles = 2000;
constexpr std::uint32_t kBvhRays = 10000;
constexpr std::uint32_t kShadowSceneTriangles = 2000;
// Wall time may drop by this fraction from R to 2R and still count as
// non-decreasing.
constexpr double kScalingNoise = 0.10;

struct Outcome
{
  bool pass{false};
  std::string detail;
};

std::string str(const std::ostringstream &os)
{
  return os.str();
}

// --- multi-rank equivalence -------------------------------------------------

Outcome multiRankEquivalence()
{
  const SceneDesc scene = generateUnevenCloud(1, 10000, 4);
  const CameraSpec cam = frameBounds(scene.bounds());
  RenderOptions opts;
  opts.maxDepth = 1;
  opts.background = scene.background;
  const Image reference = oracle::renderImage(scene, 1, Backend::InProc,
      PartitionStrategy::RoundRobin, cam, kEquivWidth, kEquivHeight, opts);
  const Bytes refBytes = encodePpm(reference);

  struct Config
  {
    std::uint32_t ranks;
    PartitionStrategy strategy;
    Backend backend;
  };
  std::vector<Config> configs;
  for (std::uint32_t R : {1u, 2u, 3u, 4u, 8u}) {
    for (auto s : {PartitionStrategy::RoundRobin, PartitionStrategy::SpatialSlab})
      configs.push_back({R, s, Backend::InProc});
  }
  for (std::uint32_t R : {2u, 4u}) {
    for (auto s : {PartitionStrategy::RoundRobin, PartitionStrategy::SpatialSlab})
      configs.push_back({R, s, Backend::Socket});
  }

  std::ostringstream os;
  int mismatches = 0;
  for (const auto &c : configs) {
    const Image img = oracle::renderImage(
        scene, c.ranks, c.backend, c.strategy, cam, kEquivWidth, kEquivHeight, opts);
    if (encodePpm(img) != refBytes) {
      ++mismatches;
      os << " mismatch R=" << c.ranks << "/" << toString(c.strategy) << "/"
         << (c.backend == Backend::Socket ? "socket" : "inproc");
    }
  }
  os << configs.size() << " configurations vs R=1, bit-exact";
  return {mismatches == 0, str(os)};
}

// --- receiver on rank 0, occluder on rank 1 ---------------------------------

Outcome occluderOnOtherRank()
{
  SceneDesc scene;
  // Floor quad at y=0 on rank 0, occluder triangle at y=2 on rank 1.
  scene.triangles = {
      {{-6, 0, -6}, {6, 0, -6}, {-6, 0, 6}, 10},
      {{6, 0, -6}, {6, 0, 6}, {-6, 0, 6}, 11},
      {{2.5, 2, -2}, {3.5, 2, -2}, {3, 2, 0}, 20},
  };
  scene.materials = {Material{}};
  scene.materialOfPrim = {0, 0, 0};
  const double s = 1.0 / std::sqrt(2.0);
  scene.lights = {{LightKind::Directional, {-s, -s, 0}, {1, 1, 1}}};
  scene.rankOfPrim = std::vector<std::uint32_t>{0, 0, 1};

  CameraSpec cam;
  cam.position = {0, 10, 0};
  cam.viewDir = {0, -1, 0};
  cam.up = {0, 0, -1};
  cam.fovY = 60.0;
  constexpr std::uint32_t W = 64, H = 64;

  RenderOptions opts;
  opts.recordVisibility = true;
  oracle::ReferenceRenderer ref(scene, opts);
  const Image expected = ref.render(cam, W, H);

  // Shadowed pixels according to the whole-scene oracle, restricted to rows
  // owned by rank 0 (the rank that holds the floor).
  const RowRange rank0 = assignPixels(W, H, 2)[0];
  std::map<std::uint32_t, bool> oracleShadow;
  for (const auto &q : ref.shadows()) {
    if (q.pixel / W >= rank0.begin && q.pixel / W < rank0.end && q.depth == 0)
      oracleShadow[q.pixel] = q.occluded;
  }
  std::vector<std::uint32_t> shadowed;
  for (const auto &[pixel, occ] : oracleShadow) {
    if (occ)
      shadowed.push_back(pixel);
  }
  if (shadowed.empty())
    return {false, "fixture has no shadowed pixel on rank 0"};

  auto visibilityOf = [&](const std::vector<RenderResult> &rr) {
    std::map<std::uint32_t, bool> v;
    for (const auto &vis : rr[0].visibility)
      v[vis.pixel] = vis.occluded;
    return v;
  };

  const auto cycled = oracle::renderDistributed(
      scene, 2, Backend::InProc, PartitionStrategy::FromFile, cam, W, H, opts);
  RenderOptions broken = opts;
  broken.disableCycling = true;
  const auto uncycled = oracle::renderDistributed(
      scene, 2, Backend::InProc, PartitionStrategy::FromFile, cam, W, H, broken);

  // Floor-only reference: what rank 0 sees when rank 1's occluder is ignored.
  SceneDesc floorOnly = scene;
  floorOnly.triangles.pop_back();
  floorOnly.materialOfPrim.pop_back();
  floorOnly.rankOfPrim.reset();
  const Image lit = oracle::ReferenceRenderer(floorOnly, opts).render(cam, W, H);

  const auto visCycled = visibilityOf(cycled);
  const auto visUncycled = visibilityOf(uncycled);
  const std::uint8_t darkValue = toneMap(Material{}.albedo.x * opts.ambient);
  int bad = 0;
  for (auto px : shadowed) {
    const bool okOcclusion = visCycled.at(px) && !visUncycled.at(px);
    const std::uint8_t c = cycled[0].image->rgb[px * 3];
    const std::uint8_t u = uncycled[0].image->rgb[px * 3];
    const bool okValues = c == expected.rgb[px * 3] && c == darkValue
        && u == lit.rgb[px * 3] && u > c;
    bad += !(okOcclusion && okValues);
  }
  const bool imageMatches = *cycled[0].image == expected;
  std::ostringstream os;
  os << shadowed.size() << " shadowed pixels; cycling dark=" << int(darkValue)
     << ", disable-cycling lit=" << int(lit.rgb[shadowed.front() * 3])
     << "; full image matches oracle: " << (imageMatches ? "yes" : "no");
  if (bad)
    os << "; " << bad << " pixels wrong";
  return {bad == 0 && imageMatches, str(os)};
}

// --- BVH against linear scan -----------------------------------------------

Outcome bvhCorrectness()
{
  std::atomic<std::uint32_t> next{0};
  std::atomic<std::uint64_t> nearestBad{0}, anyBad{0}, hits{0};
  auto worker = [&] {
    for (std::uint32_t i = next++; i < kBvhScenes; i = next++) {
      const std::uint32_t n = 1 + (i * 7919u) % kBvhMaxTriangles;
      const auto tris = oracle::randomTriangles(1000 + i, n);
      const Bvh bvh = Bvh::build(tris);
      std::mt19937_64 rng(5000 + i);
      for (std::uint32_t k = 0; k < kBvhRays; ++k) {
        const Ray ray = oracle::randomRay(rng);
        const HitKey want = oracle::nearest(tris, ray);
        if (!(bvh.intersectNearest(tris, ray) == want))
          ++nearestBad;
        if (bvh.intersectAny(tris, ray) != oracle::any(tris, ray))
          ++anyBad;
        hits += !want.isMiss();
      }
    }
  };
  std::vector<std::thread> pool;
  const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
  for (unsigned t = 0; t < threads; ++t)
    pool.emplace_back(worker);
  for (auto &t : pool)
    t.join();
  std::ostringstream os;
  os << kBvhScenes << " scenes x " << kBvhRays << " rays; nearest mismatches " << nearestBad
     << ", any-hit mismatches " << anyBad << " (" << hits << " hits)";
  return {nearestBad == 0 && anyBad == 0 && hits > 0, str(os)};
}

// --- shadow visibility against whole-scene any-hit ---------------------------

Outcome shadowOracle()
{
  std::ostringstream os;
  bool pass = true;
  size_t total = 0, occluded = 0;
  for (std::uint64_t seed : {11, 12, 13}) {
    SceneDesc scene = generateUnevenCloud(seed, kShadowSceneTriangles - 2, 3);
    // A mirror floor so that reflection-wave shadow rays are covered too.
    scene.triangles.push_back({{-1, -0.4, -1}, {2, -0.4, -1}, {-1, -0.4, 2}, 900000});
    scene.triangles.push_back({{2, -0.4, -1}, {2, -0.4, 2}, {-1, -0.4, 2}, 900001});
    scene.materials.push_back({{0.5, 0.5, 0.5}, {0.4, 0.4, 0.4}});
    const auto mirror = static_cast<std::uint32_t>(scene.materials.size() - 1);
    scene.materialOfPrim.push_back(mirror);
    scene.materialOfPrim.push_back(mirror);
    scene.lights.push_back({LightKind::Point, {0.5, 2.5, 0.5}, {0.5, 0.5, 0.5}});

    RenderOptions opts;
    opts.recordVisibility = true;
    opts.maxDepth = 1;
    const CameraSpec cam = frameBounds(scene.bounds());
    const auto results = oracle::renderDistributed(
        scene, 3, Backend::InProc, PartitionStrategy::SpatialSlab, cam, 64, 64, opts);

    oracle::ReferenceRenderer ref(scene, opts);
    ref.render(cam, 64, 64);
    std::map<std::tuple<std::uint32_t, std::uint32_t, std::uint32_t>, bool> expected;
    for (const auto &q : ref.shadows())
      expected[{q.pixel, q.depth, q.lightIndex}] = q.occluded;

    size_t records = 0;
    for (const auto &rr : results) {
      for (const auto &v : rr.visibility) {
        ++records;
        const bool brute = oracle::any(scene.triangles, v.ray);
        auto it = expected.find({v.pixel, v.depth, v.lightIndex});
        if (v.occluded != brute || it == expected.end() || it->second != v.occluded)
          pass = false;
        occluded += v.occluded;
      }
    }
    if (records != expected.size())
      pass = false;
    total += records;
  }
  os << total << " shadow queries over 3 scenes, " << occluded
     << " occluded; all equal to brute-force any-hit: " << (pass ? "yes" : "no");
  return {pass && occluded > 0, str(os)};
}

// --- work accounting ----------------------------------------------------------

Outcome workAccounting()
{
  const SceneDesc scene = generateUnevenCloud(1, 10000, 4);
  const CameraSpec cam = frameBounds(scene.bounds());
  constexpr std::uint32_t W = 96, H = 64;
  std::ostringstream os;
  bool pass = true;
  for (std::uint32_t R : {1u, 2u, 4u}) {
    auto eps = initRanks(R, Backend::InProc);
    const Partition part = partitionScene(scene, R, PartitionStrategy::SpatialSlab);
    auto shading = std::make_shared<const ShadingTable>(ShadingTable::fromScene(scene, part));
    std::atomic<std::uint64_t> primary{0};
    std::atomic<bool> ok{true};
    oracle::runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
      const LocalWorld world = LocalWorld::fromPartition(scene, part, r, shading);
      RenderStats stats;
      CameraSpec c = cam;
      c.aspect = double(W) / H;
      const RayBatch out =
          cycleBatch(ep, genPrimaryBatch(r, R, c, W, H), world, RenderOptions{}, &stats);
      primary += stats.primaryNearestQueries;
      for (const auto &rs : out.rays)
        ok = ok && rs.roundsCompleted == R;
      ok = ok && out.originRank == r && stats.cyclesComplete;
    });
    const std::uint64_t want = std::uint64_t(W) * H * R;
    pass = pass && ok && primary == want;
    os << "R=" << R << ": " << primary << "/" << want << " primary queries"
       << (ok ? ", rounds=R" : ", rounds!=R") << "; ";
  }
  return {pass, str(os)};
}

// --- collective contract -------------------------------------------------------

Outcome collectiveContract()
{
  using namespace api;
  constexpr std::uint32_t R = 3;
  const SceneDesc scene = generateUnevenCloud(3, 300, 2);
  auto eps = initRanks(R, Backend::InProc);
  std::atomic<int> contract{0};
  std::atomic<std::uint64_t> rayBytes{0};
  oracle::runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
    Device dev(ep);
    const Partition part = partitionScene(scene, R, PartitionStrategy::RoundRobin);
    std::vector<double> verts;
    std::vector<GlobalId> ids;
    for (auto idx : part.localSets[r]) {
      const Triangle &t = scene.triangles[idx];
      for (const Vec3 &v : {t.v0, t.v1, t.v2})
        verts.insert(verts.end(), {v.x, v.y, v.z});
      ids.push_back(t.globalId);
    }
    const Handle surf = dev.create(ObjectKind::Surface);
    dev.setParam(surf, "vertices", verts);
    dev.setParam(surf, "globalIds", ids);
    dev.commit(surf);
    const Handle world = dev.create(ObjectKind::World);
    dev.setParam(world, "surfaces", std::vector<Handle>{surf});
    dev.setParam(world, "lights", scene.lights);
    dev.commit(world);
    const CameraSpec c = frameBounds(scene.bounds());
    const Handle cam = dev.create(ObjectKind::Camera);
    dev.setParam(cam, "position", c.position);
    dev.setParam(cam, "direction", c.viewDir);
    dev.setParam(cam, "up", c.up);
    dev.setParam(cam, "fovY", r == 1 ? 50.0 : 45.0);
    dev.commit(cam);
    const Handle rend = dev.create(ObjectKind::Renderer);
    dev.commit(rend);
    const Handle frame = dev.create(ObjectKind::Frame);
    dev.setParam(frame, "world", world);
    dev.setParam(frame, "camera", cam);
    dev.setParam(frame, "renderer", rend);
    dev.setParam(frame, "width", std::int64_t{32});
    dev.setParam(frame, "height", std::int64_t{32});
    dev.commit(frame);
    dev.renderFrame(frame);
    try {
      dev.waitFrame(frame);
    } catch (const ContractError &) {
      ++contract;
    }
    rayBytes += ep.traffic().bytesSentByKind[static_cast<size_t>(MsgKind::RayBatch)];
  });
  std::ostringstream os;
  os << contract << "/" << R << " ranks raised the contract error; ray batch bytes sent "
     << rayBytes;
  return {contract == int(R) && rayBytes == 0, str(os)};
}

// --- transport -------------------------------------------------------------------

std::vector<std::vector<std::string>> scriptedTranscript(Backend backend)
{
  auto eps = initRanks(4, backend);
  std::vector<std::vector<std::string>> log(4);
  oracle::runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
    std::mt19937_64 rng(7);
    for (int step = 0; step < 80; ++step) {
      const std::string payload = std::to_string(step) + "/" + std::to_string(r) + "/"
          + std::string(rng() % 2000, char('a' + step % 26));
      switch (rng() % 4) {
      case 0:
        log[r].push_back(toString(ep.ringExchange(asBytes(payload))));
        break;
      case 1:
        for (const auto &t : ep.gatherToRoot(asBytes(payload)))
          log[r].push_back(toString(t));
        break;
      case 2:
        log[r].push_back(toString(ep.broadcastFromRoot(asBytes(payload))));
        break;
      default:
        for (const auto &t : ep.allgather(asBytes(payload)))
          log[r].push_back(toString(t));
      }
    }
  });
  return log;
}

Outcome transport()
{
  std::ostringstream os;
  bool closure = true;
  for (auto backend : {Backend::InProc, Backend::Socket}) {
    for (std::uint32_t R : {1u, 2u, 3u, 5u, 8u}) {
      auto eps = initRanks(R, backend);
      std::atomic<bool> ok{true};
      oracle::runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
        const std::string mine = "rank-" + std::to_string(r);
        Bytes cur = toBytes(mine);
        for (std::uint32_t k = 0; k < R; ++k) {
          cur = ep.ringExchange(cur);
          if (k + 1 < R && toString(cur) == mine)
            ok = false; // came back early
        }
        ok = ok && toString(cur) == mine;
      });
      closure = closure && ok;
    }
  }

  const bool equivalent = scriptedTranscript(Backend::InProc) == scriptedTranscript(Backend::Socket);

  // FIFO: each rank streams numbered messages of random sizes to its
  // successor; the receiver must see 0,1,2,... with the sender's sizes.
  bool fifo = true;
  for (auto backend : {Backend::InProc, Backend::Socket}) {
    for (std::uint32_t R : {2u, 3u, 4u}) {
      auto eps = initRanks(R, backend);
      std::atomic<bool> ok{true};
      oracle::runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
        std::mt19937_64 mine(100 + r);
        std::mt19937_64 upstream(100 + ep.prev());
        for (std::uint64_t i = 0; i < 200; ++i) {
          Bytes msg(8 + mine() % 5000);
          std::memcpy(msg.data(), &i, 8);
          const Bytes got = ep.ringExchange(msg);
          std::uint64_t idx = 0;
          std::memcpy(&idx, got.data(), 8);
          if (idx != i || got.size() != 8 + upstream() % 5000)
            ok = false;
        }
      });
      fifo = fifo && ok;
    }
  }
  os << "ring closure " << (closure ? "ok" : "FAILED") << "; backend transcripts "
     << (equivalent ? "identical" : "DIFFER") << "; FIFO " << (fifo ? "ok" : "FAILED");
  return {closure && equivalent && fifo, str(os)};
}

// --- time-step cache ---------------------------------------------------------------

Outcome timestepCache()
{
  auto makeCache = [](size_t capacity, size_t steps, std::vector<size_t> &loads) {
    return TimestepCache(capacity, steps, [&loads](size_t i) {
      loads.push_back(i);
      return SceneDesc{};
    });
  };
  auto sorted = [](std::vector<size_t> v) {
    std::sort(v.begin(), v.end());
    return v;
  };
  std::ostringstream os;
  bool pass = true;

  std::vector<size_t> loads;
  auto a = makeCache(2, 3, loads);
  for (size_t i : {0, 1, 2})
    a.fetch(i);
  const bool t1 = a.evictionLog() == std::vector<size_t>{0}
      && sorted(a.residents()) == std::vector<size_t>{1, 2};

  loads.clear();
  auto b = makeCache(2, 3, loads);
  for (size_t i : {0, 1, 0, 2})
    b.fetch(i);
  const bool t2 = b.evictionLog() == std::vector<size_t>{1};

  loads.clear();
  auto c = makeCache(1, 1, loads);
  for (int i = 0; i < 3; ++i)
    c.fetch(0);
  const bool t3 = c.stats().misses == 1 && c.stats().hits == 2 && loads.size() == 1;

  bool evictions = true;
  std::mt19937_64 rng(3);
  for (size_t K : {1u, 2u, 3u, 5u}) {
    loads.clear();
    auto d = makeCache(K, 12, loads);
    for (int i = 0; i < 500; ++i)
      d.fetch(rng() % 12);
    const auto s = d.stats();
    evictions = evictions && s.misses > K && s.evictions == s.misses - K;
  }
  pass = t1 && t2 && t3 && evictions;
  os << "0,1,2 (K=2) " << (t1 ? "ok" : "wrong") << "; 0,1,0,2 (K=2) " << (t2 ? "ok" : "wrong")
     << "; 0,0,0 (K=1) " << (t3 ? "ok" : "wrong") << "; evictions = misses - K "
     << (evictions ? "ok" : "wrong");
  return {pass, str(os)};
}

// --- non-scaling report ---------------------------------------------------------------

Outcome nonScalingReport()
{
  const SceneDesc scene = generateUnevenCloud(1, 10000, 4);
  const CameraSpec cam = frameBounds(scene.bounds());
  std::ostringstream os;
  os << "report only; wall ms per frame (best of 3) at 256x256:";
  std::vector<double> times;
  for (std::uint32_t R : {1u, 2u, 4u, 8u}) {
    double best = 1e300;
    for (int f = 0; f < 3; ++f) {
      const auto t0 = Clock::now();
      oracle::renderImage(scene, R, Backend::InProc, PartitionStrategy::SpatialSlab, cam, 256,
          256, RenderOptions{});
      best = std::min(best,
          std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
    }
    times.push_back(best);
    char buf[64];
    std::snprintf(buf, sizeof buf, " R=%u %.1f", R, best);
    os << buf;
  }
  bool nonDecreasing = true;
  for (size_t i = 1; i < times.size(); ++i)
    nonDecreasing = nonDecreasing && times[i] >= times[i - 1] * (1.0 - kScalingNoise);
  os << "; non-decreasing within " << int(kScalingNoise * 100) << "%: "
     << (nonDecreasing ? "yes" : "no");
  return {true, str(os)};
}

} // namespace
} // namespace dprt::acceptance

int main()
{
  using namespace dprt::acceptance;
  const std::vector<std::pair<const char *, std::function<Outcome()>>> criteria = {
      {"multi-rank equivalence", multiRankEquivalence},
      {"occluder on another rank", occluderOnOtherRank},
      {"bvh correctness", bvhCorrectness},
      {"shadow oracle", shadowOracle},
      {"work accounting", workAccounting},
      {"collective contract", collectiveContract},
      {"transport", transport},
      {"time-step cache", timestepCache},
      {"non-scaling report", nonScalingReport},
  };
  int failures = 0;
  for (const auto &[name, check] : criteria) {
    Outcome o;
    const auto t0 = Clock::now();
    try {
      o = check();
    } catch (const std::exception &e) {
      o = {false, std::string("threw: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(Clock::now() - t0).count();
    failures += !o.pass;
    std::printf("%s %s: %s [%.1fs]\n", o.pass ? "PASS" : "FAIL", name, o.detail.c_str(), secs);
    std::fflush(stdout);
  }
  return failures == 0 ? 0 : 1;
}
