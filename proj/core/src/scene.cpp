// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/scene.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>
#include <numeric>
#include <random>
#include <sstream>
#include <unordered_set>

#include "json.hpp"

#include "dprt/error.hpp"

namespace dprt {

using json = nlohmann::json;

namespace {

std::string indexed(std::string_view field, size_t i)
{
  return std::string(field) + "[" + std::to_string(i) + "]";
}

double readNumber(const json &j, const std::string &field)
{
  if (!j.is_number())
    throw ParseError(field + ": expected a number");
  return j.get<double>();
}

Vec3 readVec3(const json &j, const std::string &field)
{
  if (!j.is_array() || j.size() != 3)
    throw ParseError(field + ": expected an array of 3 numbers");
  return {readNumber(j[0], field + "[0]"), readNumber(j[1], field + "[1]"),
      readNumber(j[2], field + "[2]")};
}

Rgb readUnitColor(const json &j, const std::string &field)
{
  const Rgb c = readVec3(j, field);
  for (int i = 0; i < 3; ++i) {
    if (!(c[i] >= 0.0 && c[i] <= 1.0))
      throw ParseError(field + ": components must lie in [0, 1]");
  }
  return c;
}

std::uint64_t readUnsigned(const json &j, const std::string &field)
{
  if (!j.is_number_unsigned())
    throw ParseError(field + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

json vecToJson(const Vec3 &v)
{
  return json::array({v.x, v.y, v.z});
}

std::vector<Triangle> readBinaryTriangles(
    const json &spec, const std::filesystem::path &baseDir)
{
  if (!spec.contains("binary") || !spec["binary"].is_string())
    throw ParseError("triangles.binary: expected a path string");
  if (!spec.contains("count"))
    throw ParseError("triangles.count: missing");
  const std::uint64_t count = readUnsigned(spec["count"], "triangles.count");

  std::filesystem::path path = spec["binary"].get<std::string>();
  if (path.is_relative() && !baseDir.empty())
    path = baseDir / path;

  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("triangles.binary: cannot open '" + path.string() + "'");
  std::vector<char> bytes((std::istreambuf_iterator<char>(in)),
      std::istreambuf_iterator<char>());
  const std::uint64_t expected = count * 9 * sizeof(double);
  if (bytes.size() != expected) {
    throw ParseError("triangles.binary: expected " + std::to_string(expected)
        + " bytes for " + std::to_string(count) + " triangles, found "
        + std::to_string(bytes.size()));
  }

  std::vector<Triangle> tris(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    double v[9];
    for (int k = 0; k < 9; ++k) {
      std::uint64_t bits = 0;
      for (int b = 0; b < 8; ++b) {
        bits |= std::uint64_t(static_cast<unsigned char>(
                    bytes[(i * 9 + k) * 8 + b]))
            << (8 * b);
      }
      v[k] = std::bit_cast<double>(bits);
    }
    tris[i] = {{v[0], v[1], v[2]}, {v[3], v[4], v[5]}, {v[6], v[7], v[8]}, i};
  }
  return tris;
}

// Uniform double in [0, 1) from the top 53 bits; portable across standard
// library implementations unlike std::uniform_real_distribution.
double uniform01(std::mt19937_64 &rng)
{
  return static_cast<double>(rng() >> 11) * 0x1p-53;
}

// Standard normal via Box-Muller, truncated to |z| <= 4 by resampling.
double truncatedNormal(std::mt19937_64 &rng)
{
  for (;;) {
    const double u1 = 1.0 - uniform01(rng); // (0, 1]
    const double u2 = uniform01(rng);
    const double z = std::sqrt(-2.0 * std::log(u1))
        * std::cos(2.0 * std::numbers::pi * u2);
    if (std::abs(z) <= 4.0)
      return z;
  }
}

} // namespace

Aabb SceneDesc::bounds() const
{
  Aabb b;
  for (const auto &t : triangles)
    b.extend(t.bounds());
  return b;
}

void SceneDesc::validate() const
{
  const size_t n = triangles.size();
  if (materialOfPrim.size() != n)
    throw ValidationError("materialOfPrim: expected one entry per triangle");
  for (size_t i = 0; i < n; ++i) {
    if (materialOfPrim[i] >= materials.size())
      throw ValidationError(indexed("materialOfPrim", i)
          + ": material index out of range");
  }
  if (rankOfPrim && rankOfPrim->size() != n)
    throw ValidationError("rankOfPrim: expected one entry per triangle");
  std::unordered_set<GlobalId> ids;
  ids.reserve(n);
  for (size_t i = 0; i < n; ++i) {
    if (triangles[i].globalId == kMissId
        || !ids.insert(triangles[i].globalId).second)
      throw ValidationError(indexed("globalIds", i) + ": duplicate or reserved id");
  }
  for (size_t i = 0; i < lights.size(); ++i) {
    const auto &l = lights[i];
    if (l.intensity.x < 0.0 || l.intensity.y < 0.0 || l.intensity.z < 0.0)
      throw ValidationError(indexed("lights", i) + ".intensity: must be >= 0");
    if (l.kind == LightKind::Directional
        && std::abs(length(l.vector) - 1.0) > 1e-6)
      throw ValidationError(indexed("lights", i) + ".direction: must be normalized");
  }
}

bool operator==(const SceneDesc &a, const SceneDesc &b)
{
  if (a.triangles.size() != b.triangles.size())
    return false;
  for (size_t i = 0; i < a.triangles.size(); ++i) {
    const auto &ta = a.triangles[i];
    const auto &tb = b.triangles[i];
    if (!(ta.v0 == tb.v0 && ta.v1 == tb.v1 && ta.v2 == tb.v2
            && ta.globalId == tb.globalId))
      return false;
  }
  return a.materialOfPrim == b.materialOfPrim && a.materials == b.materials
      && a.lights == b.lights && a.background == b.background
      && a.rankOfPrim == b.rankOfPrim && a.timeSteps == b.timeSteps;
}

SceneDesc parseScene(std::string_view document, const std::filesystem::path &baseDir)
{
  json root;
  try {
    root = json::parse(document.begin(), document.end());
  } catch (const json::parse_error &e) {
    throw ParseError(std::string("document: malformed JSON: ") + e.what());
  }
  if (!root.is_object())
    throw ParseError("document: expected a top-level object");

  SceneDesc scene;

  if (!root.contains("triangles"))
    throw ParseError("triangles: missing");
  const json &tris = root["triangles"];
  if (tris.is_array()) {
    scene.triangles.reserve(tris.size());
    for (size_t i = 0; i < tris.size(); ++i) {
      const json &t = tris[i];
      const std::string field = indexed("triangles", i);
      if (!t.is_array() || t.size() != 9)
        throw ParseError(field + ": expected an array of 9 numbers");
      double v[9];
      for (int k = 0; k < 9; ++k)
        v[k] = readNumber(t[k], field);
      scene.triangles.push_back({{v[0], v[1], v[2]}, {v[3], v[4], v[5]},
          {v[6], v[7], v[8]}, static_cast<GlobalId>(i)});
    }
  } else if (tris.is_object()) {
    scene.triangles = readBinaryTriangles(tris, baseDir);
  } else {
    throw ParseError("triangles: expected an array or a binary buffer reference");
  }
  const size_t n = scene.triangles.size();

  if (root.contains("globalIds")) {
    const json &ids = root["globalIds"];
    if (!ids.is_array() || ids.size() != n)
      throw ParseError("globalIds: expected one entry per triangle");
    std::unordered_set<GlobalId> seen;
    for (size_t i = 0; i < n; ++i) {
      const GlobalId id = readUnsigned(ids[i], indexed("globalIds", i));
      if (id == kMissId || !seen.insert(id).second)
        throw ParseError(indexed("globalIds", i) + ": duplicate or reserved id");
      scene.triangles[i].globalId = id;
    }
  }

  if (!root.contains("materials") || !root["materials"].is_array())
    throw ParseError("materials: expected an array");
  for (size_t i = 0; i < root["materials"].size(); ++i) {
    const json &m = root["materials"][i];
    const std::string field = indexed("materials", i);
    if (!m.is_object())
      throw ParseError(field + ": expected an object");
    Material mat;
    if (!m.contains("albedo"))
      throw ParseError(field + ".albedo: missing");
    mat.albedo = readUnitColor(m["albedo"], field + ".albedo");
    if (m.contains("mirror"))
      mat.mirror = readUnitColor(m["mirror"], field + ".mirror");
    scene.materials.push_back(mat);
  }

  if (root.contains("materialOfPrim")) {
    const json &mp = root["materialOfPrim"];
    if (!mp.is_array() || mp.size() != n)
      throw ParseError("materialOfPrim: expected one entry per triangle");
    scene.materialOfPrim.resize(n);
    for (size_t i = 0; i < n; ++i) {
      const std::string field = indexed("materialOfPrim", i);
      const std::uint64_t m = readUnsigned(mp[i], field);
      if (m >= scene.materials.size())
        throw ParseError(field + ": material index out of range");
      scene.materialOfPrim[i] = static_cast<std::uint32_t>(m);
    }
  } else {
    if (n > 0 && scene.materials.empty())
      throw ParseError("materialOfPrim: material index out of range");
    scene.materialOfPrim.assign(n, 0);
  }

  if (root.contains("lights")) {
    if (!root["lights"].is_array())
      throw ParseError("lights: expected an array");
    for (size_t i = 0; i < root["lights"].size(); ++i) {
      const json &l = root["lights"][i];
      const std::string field = indexed("lights", i);
      if (!l.is_object() || !l.contains("kind") || !l["kind"].is_string())
        throw ParseError(field + ".kind: expected \"point\" or \"directional\"");
      Light light;
      const std::string kind = l["kind"].get<std::string>();
      if (kind == "point") {
        light.kind = LightKind::Point;
        if (!l.contains("position"))
          throw ParseError(field + ".position: missing");
        light.vector = readVec3(l["position"], field + ".position");
      } else if (kind == "directional") {
        light.kind = LightKind::Directional;
        if (!l.contains("direction"))
          throw ParseError(field + ".direction: missing");
        const Vec3 d = readVec3(l["direction"], field + ".direction");
        const double len = length(d);
        if (!(len > 0.0) || !std::isfinite(len))
          throw ParseError(field + ".direction: must be nonzero");
        light.vector = std::abs(len - 1.0) <= 1e-9 ? d : d * (1.0 / len);
      } else {
        throw ParseError(field + ".kind: expected \"point\" or \"directional\"");
      }
      if (l.contains("intensity")) {
        light.intensity = readVec3(l["intensity"], field + ".intensity");
        if (light.intensity.x < 0.0 || light.intensity.y < 0.0
            || light.intensity.z < 0.0)
          throw ParseError(field + ".intensity: must be >= 0");
      }
      scene.lights.push_back(light);
    }
  }

  if (root.contains("background"))
    scene.background = readVec3(root["background"], "background");

  if (root.contains("rankOfPrim")) {
    const json &rp = root["rankOfPrim"];
    if (!rp.is_array() || rp.size() != n)
      throw ParseError("rankOfPrim: expected one entry per triangle");
    std::vector<std::uint32_t> ranks(n);
    for (size_t i = 0; i < n; ++i) {
      const std::uint64_t r = readUnsigned(rp[i], indexed("rankOfPrim", i));
      if (r > std::numeric_limits<std::uint32_t>::max())
        throw ParseError(indexed("rankOfPrim", i) + ": rank out of range");
      ranks[i] = static_cast<std::uint32_t>(r);
    }
    scene.rankOfPrim = std::move(ranks);
  }

  if (root.contains("timeSteps")) {
    const json &ts = root["timeSteps"];
    if (!ts.is_array())
      throw ParseError("timeSteps: expected an array of paths");
    for (size_t i = 0; i < ts.size(); ++i) {
      if (!ts[i].is_string())
        throw ParseError(indexed("timeSteps", i) + ": expected a path string");
      std::filesystem::path p = ts[i].get<std::string>();
      if (p.is_relative() && !baseDir.empty())
        p = baseDir / p;
      scene.timeSteps.push_back(p.string());
    }
  }

  return scene;
}

SceneDesc loadSceneFile(const std::filesystem::path &path)
{
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw ParseError("document: cannot open '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return parseScene(ss.str(), path.parent_path());
}

std::string serializeScene(const SceneDesc &scene)
{
  json root = json::object();

  json tris = json::array();
  bool sequentialIds = true;
  for (size_t i = 0; i < scene.triangles.size(); ++i) {
    const auto &t = scene.triangles[i];
    tris.push_back({t.v0.x, t.v0.y, t.v0.z, t.v1.x, t.v1.y, t.v1.z, t.v2.x,
        t.v2.y, t.v2.z});
    sequentialIds = sequentialIds && t.globalId == i;
  }
  root["triangles"] = std::move(tris);
  if (!sequentialIds) {
    json ids = json::array();
    for (const auto &t : scene.triangles)
      ids.push_back(t.globalId);
    root["globalIds"] = std::move(ids);
  }

  root["materialOfPrim"] = scene.materialOfPrim;

  json mats = json::array();
  for (const auto &m : scene.materials)
    mats.push_back({{"albedo", vecToJson(m.albedo)}, {"mirror", vecToJson(m.mirror)}});
  root["materials"] = std::move(mats);

  json lights = json::array();
  for (const auto &l : scene.lights) {
    if (l.kind == LightKind::Point) {
      lights.push_back({{"kind", "point"}, {"position", vecToJson(l.vector)},
          {"intensity", vecToJson(l.intensity)}});
    } else {
      lights.push_back({{"kind", "directional"}, {"direction", vecToJson(l.vector)},
          {"intensity", vecToJson(l.intensity)}});
    }
  }
  root["lights"] = std::move(lights);
  root["background"] = vecToJson(scene.background);

  if (scene.rankOfPrim)
    root["rankOfPrim"] = *scene.rankOfPrim;
  if (!scene.timeSteps.empty())
    root["timeSteps"] = scene.timeSteps;

  return root.dump();
}

std::optional<PartitionStrategy> parsePartitionStrategy(std::string_view name)
{
  if (name == "roundrobin" || name == "roundRobin")
    return PartitionStrategy::RoundRobin;
  if (name == "slab" || name == "spatialSlab")
    return PartitionStrategy::SpatialSlab;
  if (name == "fromfile" || name == "fromFile")
    return PartitionStrategy::FromFile;
  return std::nullopt;
}

std::string_view toString(PartitionStrategy strategy)
{
  switch (strategy) {
  case PartitionStrategy::RoundRobin:
    return "roundrobin";
  case PartitionStrategy::SpatialSlab:
    return "slab";
  case PartitionStrategy::FromFile:
    return "fromfile";
  }
  return "?";
}

std::vector<Triangle> Partition::localTriangles(
    const SceneDesc &scene, std::uint32_t rank) const
{
  std::vector<Triangle> out;
  out.reserve(localSets.at(rank).size());
  for (auto i : localSets[rank])
    out.push_back(scene.triangles[i]);
  return out;
}

Partition partitionScene(
    const SceneDesc &scene, std::uint32_t numRanks, PartitionStrategy strategy)
{
  if (numRanks < 1)
    throw UsageError("partition requires at least one rank");

  const size_t n = scene.triangles.size();
  Partition part;
  part.numRanks = numRanks;
  part.rankOfPrim.assign(n, 0);

  switch (strategy) {
  case PartitionStrategy::RoundRobin:
    for (size_t i = 0; i < n; ++i)
      part.rankOfPrim[i] =
          static_cast<std::uint32_t>(scene.triangles[i].globalId % numRanks);
    break;

  case PartitionStrategy::SpatialSlab: {
    const int axis = scene.bounds().longestAxis();
    std::vector<std::uint32_t> order(n);
    std::iota(order.begin(), order.end(), 0u);
    std::vector<double> key(n);
    for (size_t i = 0; i < n; ++i)
      key[i] = scene.triangles[i].centroid()[axis];
    std::sort(order.begin(), order.end(), [&](std::uint32_t a, std::uint32_t b) {
      if (key[a] != key[b])
        return key[a] < key[b];
      return scene.triangles[a].globalId < scene.triangles[b].globalId;
    });
    for (std::uint32_t r = 0; r < numRanks; ++r) {
      const size_t begin = n * r / numRanks;
      const size_t end = n * (r + 1) / numRanks;
      for (size_t k = begin; k < end; ++k)
        part.rankOfPrim[order[k]] = r;
    }
    break;
  }

  case PartitionStrategy::FromFile:
    if (!scene.rankOfPrim)
      throw UsageError("fromfile partition requires rankOfPrim in the scene");
    if (scene.rankOfPrim->size() != n)
      throw ValidationError("rankOfPrim: expected one entry per triangle");
    for (size_t i = 0; i < n; ++i)
      part.rankOfPrim[i] = (*scene.rankOfPrim)[i] % numRanks;
    break;
  }

  part.localSets.assign(numRanks, {});
  for (size_t i = 0; i < n; ++i)
    part.localSets[part.rankOfPrim[i]].push_back(static_cast<std::uint32_t>(i));
  return part;
}

SceneDesc generateUnevenCloud(
    std::uint64_t seed, std::uint32_t n, std::uint32_t clusters)
{
  if (clusters < 1 || n < clusters)
    throw UsageError("uneven cloud requires n >= clusters >= 1");

  std::mt19937_64 rng(seed);

  struct Blob
  {
    Vec3 center;
    double sigma;
    double weight;
  };
  std::vector<Blob> blobs(clusters);
  double total = 0.0;
  for (std::uint32_t k = 0; k < clusters; ++k) {
    Blob &b = blobs[k];
    b.center = {uniform01(rng), uniform01(rng), uniform01(rng)};
    b.sigma = 0.02 + (kCloudSigmaMax - 0.02) * uniform01(rng);
    // Halving weights keep the blobs markedly unequal in population.
    b.weight = std::ldexp(0.5 + uniform01(rng), -static_cast<int>(k));
    total += b.weight;
  }

  SceneDesc scene;
  scene.triangles.reserve(n);
  scene.materialOfPrim.reserve(n);

  constexpr double kTriangleSize = 0.01;
  for (std::uint32_t i = 0; i < n; ++i) {
    // First `clusters` triangles seed one per blob so every blob is present.
    std::uint32_t k = i;
    if (i >= clusters) {
      const double pick = uniform01(rng) * total;
      double acc = 0.0;
      k = clusters - 1;
      for (std::uint32_t j = 0; j < clusters; ++j) {
        acc += blobs[j].weight;
        if (pick < acc) {
          k = j;
          break;
        }
      }
    }
    const Blob &b = blobs[k];
    const Vec3 c{b.center.x + b.sigma * truncatedNormal(rng),
        b.center.y + b.sigma * truncatedNormal(rng),
        b.center.z + b.sigma * truncatedNormal(rng)};
    const Vec3 a{uniform01(rng) - 0.5, uniform01(rng) - 0.5, uniform01(rng) - 0.5};
    const Vec3 d{uniform01(rng) - 0.5, uniform01(rng) - 0.5, uniform01(rng) - 0.5};
    const Vec3 ea = a * (2.0 * kTriangleSize);
    const Vec3 eb = d * (2.0 * kTriangleSize);
    scene.triangles.push_back({c + ea, c + eb, c - ea - eb, i});
    scene.materialOfPrim.push_back(k);
  }

  for (std::uint32_t k = 0; k < clusters; ++k) {
    Material m;
    m.albedo = {0.3 + 0.7 * uniform01(rng), 0.3 + 0.7 * uniform01(rng),
        0.3 + 0.7 * uniform01(rng)};
    if (k == 0)
      m.mirror = {0.4, 0.4, 0.4};
    scene.materials.push_back(m);
  }

  scene.lights.push_back({LightKind::Directional,
      normalize(Vec3{-0.4, -1.0, -0.6}), {0.8, 0.8, 0.8}});
  scene.lights.push_back({LightKind::Point, {0.5, 1.8, 1.5}, {0.5, 0.5, 0.5}});
  scene.background = {0.05, 0.05, 0.08};
  return scene;
}

} // namespace dprt
