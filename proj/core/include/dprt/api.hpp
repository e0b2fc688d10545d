// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <future>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <unordered_map>
#include <variant>
#include <vector>

#include "dprt/engine.hpp"
#include "dprt/refcount.hpp"
#include "dprt/scene.hpp"
#include "dprt/transport.hpp"

namespace dprt::api {

enum class ObjectKind
{
  World,
  Surface,
  Group,
  Instance,
  Camera,
  Renderer,
  Frame
};

std::string_view toString(ObjectKind kind);

struct Handle
{
  ObjectId id{0};
  ObjectKind kind{ObjectKind::World};

  explicit operator bool() const
  {
    return id != 0;
  }
  friend bool operator==(const Handle &, const Handle &) = default;
};

using ParamValue = std::variant<bool, std::int64_t, double, Vec3, std::string,
    Handle, std::vector<Handle>, std::vector<double>, std::vector<GlobalId>,
    std::vector<Light>>;

// Pixels of one completed frame, RGB8 row-major, top row first.
struct FrameResult
{
  std::uint32_t width{0};
  std::uint32_t height{0};
  std::uint64_t sequence{0};
  std::vector<std::uint8_t> pixels;
  RenderStats stats;
};

// View of a mapped frame. Stays valid until the next render of the same
// frame completes; afterwards valid() is false and pixels() throws.
class FrameMapping
{
 public:
  explicit FrameMapping(std::weak_ptr<const FrameResult> result);

  bool valid() const
  {
    return !m_result.expired();
  }
  std::uint32_t width() const
  {
    return m_width;
  }
  std::uint32_t height() const
  {
    return m_height;
  }
  std::uint64_t sequence() const
  {
    return m_sequence;
  }
  std::span<const std::uint8_t> pixels() const;

 private:
  std::weak_ptr<const FrameResult> m_result;
  std::uint32_t m_width{0};
  std::uint32_t m_height{0};
  std::uint64_t m_sequence{0};
};

// Per-rank entry point of the collective rendering API.
//
// create/setParam/commit/retain/release are local to the calling rank and
// never touch the transport. World contents may differ per rank: each rank
// commits the share of the scene it holds. renderFrame is collective; all
// ranks must call it in the same order with frames whose committed camera,
// renderer, size, and lights agree, otherwise every rank fails with
// ContractError before tracing starts. The image is only available on rank 0.
//
// Parameters by object kind:
//   World:    surfaces [Surface...], instances [Instance...], lights [Light...]
//   Surface:  vertices [9 doubles per triangle], globalIds [u64...],
//             albedo Vec3, mirror Vec3
//   Group:    surfaces [Surface...]
//   Instance: group Group, translation Vec3
//   Camera:   position Vec3, direction Vec3, up Vec3, fovY double
//   Renderer: ambient double, background Vec3, maxDepth int, mode string
//             ("shaded" | "rankcolor"), disableCycling bool
//   Frame:    world World, camera Camera, renderer Renderer, width int,
//             height int
class Device
{
 public:
  explicit Device(Endpoint &ep);
  ~Device();

  Device(const Device &) = delete;
  Device &operator=(const Device &) = delete;

  Handle create(ObjectKind kind);
  void setParam(Handle obj, std::string_view name, ParamValue value);
  void commit(Handle obj);

  std::uint32_t retain(Handle obj);
  std::uint32_t release(Handle obj);
  bool alive(Handle obj) const;
  std::uint32_t refCount(Handle obj) const;

  // Collective. Starts the render; completion is observed with waitFrame.
  void renderFrame(Handle frame);
  // Blocks until the last render of `frame` finished; rethrows its error.
  void waitFrame(Handle frame);
  // nullopt on every rank but 0. Throws UsageError before the first render.
  std::optional<FrameMapping> mapFrame(Handle frame);

  // Triangles this rank holds in the committed state of `world`.
  size_t localPrimitiveCount(Handle world) const;

  Endpoint &endpoint()
  {
    return m_ep;
  }

 private:
  struct WorldSnapshot;
  struct Object;
  struct FrameState;
  struct ShadingCache;

  Object &object(Handle h, const char *op);
  const Object &object(Handle h, const char *op) const;
  void linkHandles(ObjectId parent, const ParamValue &value);
  void unlinkHandles(ObjectId parent, const ParamValue &value);
  void buildWorld(Object &world);
  std::shared_ptr<const ShadingTable> exchangeShading(const WorldSnapshot &world);

  Endpoint &m_ep;
  RefTable m_refs;
  std::unordered_map<ObjectId, std::unique_ptr<Object>> m_objects;
  std::uint64_t m_worldVersion{0};
  std::unique_ptr<ShadingCache> m_shadingCache;
};

} // namespace dprt::api
