// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

// Brute-force references and multi-rank drivers shared by the unit tests and
// the acceptance binary.

#pragma once

#include <cmath>
#include <exception>
#include <functional>
#include <random>
#include <thread>
#include <vector>

#include "dprt/bvh.hpp"
#include "dprt/engine.hpp"
#include "dprt/scene.hpp"
#include "dprt/transport.hpp"

namespace dprt::oracle {

// Smallest (t, globalId) over every triangle, by linear scan.
inline HitKey nearest(std::span<const Triangle> prims, const Ray &ray)
{
  HitKey best;
  for (const auto &t : prims) {
    if (auto h = rayTriangleIntersect(ray, t)) {
      const HitKey k{h->t, t.globalId};
      if (k < best)
        best = k;
    }
  }
  return best;
}

inline bool any(std::span<const Triangle> prims, const Ray &ray)
{
  for (const auto &t : prims) {
    if (auto h = rayTriangleIntersect(ray, t); h && h->t > ray.tmin && h->t < ray.tmax)
      return true;
  }
  return false;
}

inline double uniform(std::mt19937_64 &rng, double lo = 0.0, double hi = 1.0)
{
  return std::uniform_real_distribution<double>(lo, hi)(rng);
}

inline Vec3 randomVec(std::mt19937_64 &rng, double lo, double hi)
{
  const double x = uniform(rng, lo, hi);
  const double y = uniform(rng, lo, hi);
  const double z = uniform(rng, lo, hi);
  return {x, y, z};
}

// Random triangle soup in the unit cube with the awkward cases mixed in:
// exact duplicates under other ids, degenerate slivers, axis-aligned faces.
inline std::vector<Triangle> randomTriangles(std::uint64_t seed, std::uint32_t n)
{
  std::mt19937_64 rng(seed);
  std::vector<Triangle> tris;
  tris.reserve(n);
  const double size = uniform(rng, 0.02, 0.3);
  for (std::uint32_t i = 0; i < n; ++i) {
    const GlobalId id = static_cast<GlobalId>(n - i) * 3 + seed % 3;
    const std::uint64_t pick = rng() % 20;
    if (pick == 0 && !tris.empty()) {
      Triangle dup = tris[rng() % tris.size()];
      dup.globalId = id;
      tris.push_back(dup);
      continue;
    }
    const Vec3 c = randomVec(rng, 0.0, 1.0);
    Triangle t{c + randomVec(rng, -size, size), c + randomVec(rng, -size, size),
        c + randomVec(rng, -size, size), id};
    if (pick == 1)
      t.v2 = t.v0 + (t.v1 - t.v0) * 0.5; // zero area
    if (pick == 2) {
      t.v1.z = t.v0.z;
      t.v2.z = t.v0.z; // axis-aligned
    }
    tris.push_back(t);
  }
  return tris;
}

inline Ray randomRay(std::mt19937_64 &rng)
{
  Ray r;
  r.origin = randomVec(rng, -0.5, 1.5);
  if (rng() % 4 == 0) {
    // Aim at a point inside the cube so that most rays hit something.
    r.direction = normalize(randomVec(rng, 0.0, 1.0) - r.origin);
  } else {
    r.direction = normalize(randomVec(rng, -1.0, 1.0));
  }
  if (rng() % 8 == 0) {
    const int axis = static_cast<int>(rng() % 3);
    Vec3 d;
    d[axis] = (rng() % 2) ? 1.0 : -1.0;
    r.direction = d;
  }
  r.tmin = 0.0;
  r.tmax = (rng() % 3 == 0) ? uniform(rng, 0.1, 2.0) : kInf;
  return r;
}

// Whole-scene, single-threaded renderer with linear-scan intersection. Same
// shading arithmetic as the engine, applied in the same order per pixel.
class ReferenceRenderer
{
 public:
  ReferenceRenderer(const SceneDesc &scene, const RenderOptions &options)
      : m_scene(scene), m_opt(options), m_eps(kRayEpsilonScale * scene.bounds().diagonal())
  {}

  struct ShadowQuery
  {
    std::uint32_t pixel;
    std::uint32_t depth;
    std::uint32_t lightIndex;
    GlobalId receiver;
    Ray ray;
    bool occluded;
  };

  Image render(CameraSpec cam, std::uint32_t width, std::uint32_t height)
  {
    cam.aspect = double(width) / double(height);
    Image img;
    img.width = width;
    img.height = height;
    for (std::uint32_t y = 0; y < height; ++y) {
      for (std::uint32_t x = 0; x < width; ++x) {
        const Ray r = cameraPrimaryRay(cam, int(x), int(y), int(width), int(height));
        Rgb c;
        trace(y * width + x, r, Rgb{1.0, 1.0, 1.0}, 0, c);
        img.rgb.push_back(toneMap(c.x));
        img.rgb.push_back(toneMap(c.y));
        img.rgb.push_back(toneMap(c.z));
      }
    }
    return img;
  }

  const std::vector<ShadowQuery> &shadows() const
  {
    return m_shadows;
  }

 private:
  size_t indexOf(GlobalId id) const
  {
    for (size_t i = 0; i < m_scene.triangles.size(); ++i) {
      if (m_scene.triangles[i].globalId == id)
        return i;
    }
    return SIZE_MAX;
  }

  void trace(std::uint32_t pixel, const Ray &ray, const Rgb &throughput,
      std::uint32_t depth, Rgb &accum)
  {
    const HitKey hit = nearest(m_scene.triangles, ray);
    if (hit.isMiss()) {
      accum += throughput * m_opt.background;
      return;
    }
    const size_t idx = indexOf(hit.globalId);
    const Triangle &tri = m_scene.triangles[idx];
    const Material &mat = m_scene.materials[m_scene.materialOfPrim[idx]];
    const Vec3 &d = ray.direction;
    const Vec3 p = ray.at(hit.t);
    Vec3 n = tri.geometricNormal();
    if (dot(n, d) > 0.0)
      n = -n;
    accum += throughput * (mat.albedo * m_opt.ambient);

    for (std::uint32_t li = 0; li < m_scene.lights.size(); ++li) {
      const Light &light = m_scene.lights[li];
      const Vec3 toLight =
          light.kind == LightKind::Point ? normalize(light.vector - p) : -light.vector;
      const double ndl = dot(n, toLight);
      Ray s;
      s.origin = p + (ndl >= 0.0 ? n : -n) * m_eps;
      s.tmin = 0.0;
      if (light.kind == LightKind::Point) {
        const Vec3 span = light.vector - s.origin;
        s.tmax = length(span);
        s.direction = normalize(span);
      } else {
        s.tmax = kInf;
        s.direction = toLight;
      }
      const bool occluded = any(m_scene.triangles, s);
      m_shadows.push_back({pixel, depth, li, hit.globalId, s, occluded});
      if (!occluded)
        accum += throughput * mat.albedo * light.intensity * std::max(0.0, ndl);
    }

    const Rgb &m = mat.mirror;
    if ((m.x > 0.0 || m.y > 0.0 || m.z > 0.0) && depth < m_opt.maxDepth) {
      Ray r;
      r.origin = p + n * m_eps;
      r.direction = normalize(d - n * (2.0 * dot(d, n)));
      r.tmin = 0.0;
      r.tmax = kInf;
      trace(pixel, r, throughput * m, depth + 1, accum);
    }
  }

  const SceneDesc &m_scene;
  RenderOptions m_opt;
  double m_eps;
  std::vector<ShadowQuery> m_shadows;
};

// Runs fn(rank, endpoint) on one thread per rank; rethrows the first error.
inline void runRanks(std::vector<EndpointPtr> &eps,
    const std::function<void(std::uint32_t, Endpoint &)> &fn)
{
  std::vector<std::exception_ptr> errors(eps.size());
  std::vector<std::thread> threads;
  for (std::uint32_t r = 0; r < eps.size(); ++r) {
    threads.emplace_back([&, r] {
      try {
        fn(r, *eps[r]);
      } catch (...) {
        errors[r] = std::current_exception();
      }
    });
  }
  for (auto &t : threads)
    t.join();
  for (auto &e : errors) {
    if (e)
      std::rethrow_exception(e);
  }
}

// Partitions, renders on R ranks, and returns each rank's result.
inline std::vector<RenderResult> renderDistributed(const SceneDesc &scene,
    std::uint32_t numRanks, Backend backend, PartitionStrategy strategy,
    const CameraSpec &cam, std::uint32_t width, std::uint32_t height,
    const RenderOptions &options, TransportConfig config = {})
{
  auto eps = initRanks(numRanks, backend, config);
  const Partition part = partitionScene(scene, numRanks, strategy);
  auto shading = std::make_shared<const ShadingTable>(ShadingTable::fromScene(scene, part));
  std::vector<RenderResult> results(numRanks);
  runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
    const LocalWorld world = LocalWorld::fromPartition(scene, part, r, shading);
    results[r] = renderFrame(ep, world, cam, width, height, options);
  });
  return results;
}

inline Image renderImage(const SceneDesc &scene, std::uint32_t numRanks, Backend backend,
    PartitionStrategy strategy, const CameraSpec &cam, std::uint32_t width,
    std::uint32_t height, const RenderOptions &options)
{
  return *renderDistributed(scene, numRanks, backend, strategy, cam, width, height, options)[0]
              .image;
}

// Wraps triangles into a scene with one default material and the given lights.
inline SceneDesc sceneOf(std::vector<Triangle> tris, std::vector<Light> lights = {})
{
  SceneDesc s;
  s.triangles = std::move(tris);
  s.materialOfPrim.assign(s.triangles.size(), 0);
  s.materials = {Material{}};
  s.lights = std::move(lights);
  return s;
}

} // namespace dprt::oracle
