// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>

namespace dprt {

struct Vec3
{
  double x{0.0}, y{0.0}, z{0.0};

  constexpr double operator[](int axis) const
  {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }
  constexpr double &operator[](int axis)
  {
    return axis == 0 ? x : (axis == 1 ? y : z);
  }

  friend constexpr bool operator==(const Vec3 &, const Vec3 &) = default;
};

// Colors share the vector type; channels are r=x, g=y, b=z.
using Rgb = Vec3;

constexpr Vec3 operator+(const Vec3 &a, const Vec3 &b)
{
  return {a.x + b.x, a.y + b.y, a.z + b.z};
}
constexpr Vec3 operator-(const Vec3 &a, const Vec3 &b)
{
  return {a.x - b.x, a.y - b.y, a.z - b.z};
}
constexpr Vec3 operator-(const Vec3 &a)
{
  return {-a.x, -a.y, -a.z};
}
constexpr Vec3 operator*(const Vec3 &a, double s)
{
  return {a.x * s, a.y * s, a.z * s};
}
constexpr Vec3 operator*(double s, const Vec3 &a)
{
  return a * s;
}
// Componentwise product, used for color modulation.
constexpr Vec3 operator*(const Vec3 &a, const Vec3 &b)
{
  return {a.x * b.x, a.y * b.y, a.z * b.z};
}
constexpr Vec3 &operator+=(Vec3 &a, const Vec3 &b)
{
  a.x += b.x;
  a.y += b.y;
  a.z += b.z;
  return a;
}

constexpr double dot(const Vec3 &a, const Vec3 &b)
{
  return a.x * b.x + a.y * b.y + a.z * b.z;
}
constexpr Vec3 cross(const Vec3 &a, const Vec3 &b)
{
  return {a.y * b.z - a.z * b.y, a.z * b.x - a.x * b.z, a.x * b.y - a.y * b.x};
}
inline double length(const Vec3 &a)
{
  return std::sqrt(dot(a, a));
}
Vec3 normalize(const Vec3 &a);

constexpr Vec3 min(const Vec3 &a, const Vec3 &b)
{
  return {a.x < b.x ? a.x : b.x, a.y < b.y ? a.y : b.y, a.z < b.z ? a.z : b.z};
}
constexpr Vec3 max(const Vec3 &a, const Vec3 &b)
{
  return {a.x > b.x ? a.x : b.x, a.y > b.y ? a.y : b.y, a.z > b.z ? a.z : b.z};
}

inline constexpr double kInf = std::numeric_limits<double>::infinity();

struct Ray
{
  Vec3 origin;
  Vec3 direction; // normalized
  double tmin{0.0};
  double tmax{kInf};

  Vec3 at(double t) const
  {
    return origin + direction * t;
  }

  friend bool operator==(const Ray &, const Ray &) = default;
};

struct Aabb
{
  Vec3 lo{kInf, kInf, kInf};
  Vec3 hi{-kInf, -kInf, -kInf};

  bool empty() const
  {
    return lo.x > hi.x || lo.y > hi.y || lo.z > hi.z;
  }
  void extend(const Vec3 &p)
  {
    lo = min(lo, p);
    hi = max(hi, p);
  }
  void extend(const Aabb &b)
  {
    lo = min(lo, b.lo);
    hi = max(hi, b.hi);
  }
  bool contains(const Aabb &b) const
  {
    return b.empty()
        || (lo.x <= b.lo.x && lo.y <= b.lo.y && lo.z <= b.lo.z
            && hi.x >= b.hi.x && hi.y >= b.hi.y && hi.z >= b.hi.z);
  }
  Vec3 extent() const
  {
    return empty() ? Vec3{} : hi - lo;
  }
  double diagonal() const
  {
    return length(extent());
  }
  int longestAxis() const;
};

using GlobalId = std::uint64_t;

// Reserved; marks "no hit" and is never a valid primitive id.
inline constexpr GlobalId kMissId = std::numeric_limits<GlobalId>::max();

struct Triangle
{
  Vec3 v0, v1, v2;
  GlobalId globalId{0};

  Aabb bounds() const;
  Vec3 centroid() const
  {
    return (v0 + v1 + v2) * (1.0 / 3.0);
  }
  // Unit normal following the v0,v1,v2 winding; zero for degenerate input.
  Vec3 geometricNormal() const;
};

struct CameraSpec
{
  Vec3 position{0.0, 0.0, 0.0};
  Vec3 viewDir{0.0, 0.0, -1.0};
  Vec3 up{0.0, 1.0, 0.0};
  double fovY{60.0}; // degrees
  double aspect{1.0}; // width / height

  // Throws ValidationError on a parallel view/up pair or fovY outside (0,180).
  void validate() const;
};

struct SlabInterval
{
  double t0;
  double t1;
};

struct TriangleHit
{
  double t;
  double u;
  double v;
};

// Raw slab interval, or nullopt for an empty box / a ray parallel to and
// outside of one slab. The caller decides whether the interval overlaps its
// [tmin, tmax] range.
std::optional<SlabInterval> rayAabbIntersect(const Ray &ray, const Aabb &box);

// Same test, but true only if the interval overlaps [ray.tmin, ray.tmax].
// The far end is widened by a few ulps so a box is never rejected for a ray
// that hits a primitive inside it.
bool rayHitsAabb(const Ray &ray, const Aabb &box, double *tEnter = nullptr);

// Double-sided Moller-Trumbore test. Degenerate triangles never hit.
std::optional<TriangleHit> rayTriangleIntersect(
    const Ray &ray, const Triangle &tri);

// Pinhole camera through the center of pixel (px, py); row 0 is the top row.
Ray cameraPrimaryRay(const CameraSpec &cam, int px, int py, int width, int height);

// A camera that sees all of `box` from above and in front.
CameraSpec frameBounds(const Aabb &box, double fovY = 45.0, double aspect = 1.0);

} // namespace dprt
