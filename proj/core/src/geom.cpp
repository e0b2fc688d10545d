// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/geom.hpp"

#include <algorithm>
#include <numbers>
#include <string>

#include "dprt/error.hpp"

namespace dprt {

namespace {

// Relative widening of slab intervals, 2 * gamma(3) in the usual
// floating-point error bound notation.
constexpr double kSlabSlack = 2.0 * (3.0 * 0x1p-53) / (1.0 - 3.0 * 0x1p-53);

// Rays closer than this (cosine) to the triangle plane count as parallel.
constexpr double kParallelCosine = 1e-12;

} // namespace

Vec3 normalize(const Vec3 &a)
{
  const double len = length(a);
  return len > 0.0 ? a * (1.0 / len) : Vec3{};
}

int Aabb::longestAxis() const
{
  const Vec3 e = extent();
  if (e.x >= e.y && e.x >= e.z)
    return 0;
  return e.y >= e.z ? 1 : 2;
}

Aabb Triangle::bounds() const
{
  Aabb b;
  b.extend(v0);
  b.extend(v1);
  b.extend(v2);
  return b;
}

Vec3 Triangle::geometricNormal() const
{
  return normalize(cross(v1 - v0, v2 - v0));
}

void CameraSpec::validate() const
{
  if (!(fovY > 0.0 && fovY < 180.0))
    throw ValidationError("camera fovY must lie in (0, 180), got "
        + std::to_string(fovY));
  if (!(aspect > 0.0) || !std::isfinite(aspect))
    throw ValidationError("camera aspect must be positive");
  const Vec3 f = normalize(viewDir);
  const Vec3 u = normalize(up);
  if (length(f) == 0.0 || length(u) == 0.0)
    throw ValidationError("camera viewDir and up must be nonzero");
  if (length(cross(f, u)) < 1e-9)
    throw ValidationError("camera viewDir and up must not be parallel");
}

std::optional<SlabInterval> rayAabbIntersect(const Ray &ray, const Aabb &box)
{
  if (box.empty())
    return std::nullopt;

  double t0 = -kInf;
  double t1 = kInf;
  for (int axis = 0; axis < 3; ++axis) {
    const double o = ray.origin[axis];
    const double d = ray.direction[axis];
    if (d == 0.0) {
      // Infinite slab: the axis constrains nothing unless we start outside.
      if (o < box.lo[axis] || o > box.hi[axis])
        return std::nullopt;
      continue;
    }
    const double inv = 1.0 / d;
    double ta = (box.lo[axis] - o) * inv;
    double tb = (box.hi[axis] - o) * inv;
    if (ta > tb)
      std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  if (t0 > t1)
    return std::nullopt;
  return SlabInterval{t0, t1};
}

bool rayHitsAabb(const Ray &ray, const Aabb &box, double *tEnter)
{
  const auto slab = rayAabbIntersect(ray, box);
  if (!slab)
    return false;
  const double t0 = slab->t0 - std::abs(slab->t0) * kSlabSlack;
  const double t1 = slab->t1 + std::abs(slab->t1) * kSlabSlack;
  if (t1 < std::max(t0, ray.tmin) || t0 > ray.tmax)
    return false;
  if (tEnter)
    *tEnter = t0;
  return true;
}

std::optional<TriangleHit> rayTriangleIntersect(
    const Ray &ray, const Triangle &tri)
{
  const Vec3 e1 = tri.v1 - tri.v0;
  const Vec3 e2 = tri.v2 - tri.v0;
  const double area2 = length(cross(e1, e2));
  if (!(area2 > 0.0))
    return std::nullopt;

  const Vec3 p = cross(ray.direction, e2);
  const double det = dot(e1, p);
  if (std::abs(det) <= kParallelCosine * area2)
    return std::nullopt;

  const double inv = 1.0 / det;
  const Vec3 s = ray.origin - tri.v0;
  const double u = dot(s, p) * inv;
  if (u < 0.0 || u > 1.0)
    return std::nullopt;

  const Vec3 q = cross(s, e1);
  const double v = dot(ray.direction, q) * inv;
  if (v < 0.0 || u + v > 1.0)
    return std::nullopt;

  const double t = dot(e2, q) * inv;
  if (!(t >= ray.tmin && t <= ray.tmax))
    return std::nullopt;
  return TriangleHit{t, u, v};
}

Ray cameraPrimaryRay(const CameraSpec &cam, int px, int py, int width, int height)
{
  if (width <= 0 || height <= 0 || px < 0 || py < 0 || px >= width
      || py >= height) {
    throw UsageError("pixel (" + std::to_string(px) + ", " + std::to_string(py)
        + ") outside " + std::to_string(width) + "x" + std::to_string(height)
        + " film");
  }

  const Vec3 forward = normalize(cam.viewDir);
  const Vec3 right = normalize(cross(forward, cam.up));
  const Vec3 up = cross(right, forward);

  const double halfH = std::tan(cam.fovY * std::numbers::pi / 360.0);
  const double halfW = halfH * cam.aspect;

  const double sx = ((px + 0.5) / width * 2.0 - 1.0) * halfW;
  const double sy = (1.0 - (py + 0.5) / height * 2.0) * halfH;

  Ray ray;
  ray.origin = cam.position;
  ray.direction = normalize(forward + right * sx + up * sy);
  ray.tmin = 0.0;
  ray.tmax = kInf;
  return ray;
}

CameraSpec frameBounds(const Aabb &box, double fovY, double aspect)
{
  CameraSpec cam;
  cam.fovY = fovY;
  cam.aspect = aspect;
  const Vec3 center = (box.lo + box.hi) * 0.5;
  const double radius = std::max(0.5 * box.diagonal(), 1e-6);
  const double halfFov = 0.5 * fovY * std::numbers::pi / 180.0;
  const double dist = 1.1 * radius / std::sin(std::min(halfFov, halfFov * aspect));
  cam.viewDir = normalize(Vec3{-0.3, -0.4, -1.0});
  cam.position = center - cam.viewDir * dist;
  return cam;
}

} // namespace dprt
