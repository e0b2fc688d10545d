// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "dprt/api.hpp"

#include <algorithm>
#include <array>

#include "dprt/error.hpp"

namespace dprt::api {

namespace {

// Alternative indices of ParamValue.
enum ParamType : size_t
{
  kBool = 0,
  kInt = 1,
  kDouble = 2,
  kVec3 = 3,
  kString = 4,
  kHandle = 5,
  kHandleList = 6,
  kDoubleList = 7,
  kIdList = 8,
  kLightList = 9,
};

struct ParamSpec
{
  std::string_view name;
  ParamType type;
  ObjectKind handleKind{ObjectKind::World}; // for kHandle / kHandleList
};

std::span<const ParamSpec> paramsOf(ObjectKind kind)
{
  static constexpr ParamSpec world[] = {
      {"surfaces", kHandleList, ObjectKind::Surface},
      {"instances", kHandleList, ObjectKind::Instance},
      {"lights", kLightList},
  };
  static constexpr ParamSpec surface[] = {
      {"vertices", kDoubleList},
      {"globalIds", kIdList},
      {"albedo", kVec3},
      {"mirror", kVec3},
  };
  static constexpr ParamSpec group[] = {
      {"surfaces", kHandleList, ObjectKind::Surface},
  };
  static constexpr ParamSpec instance[] = {
      {"group", kHandle, ObjectKind::Group},
      {"translation", kVec3},
  };
  static constexpr ParamSpec camera[] = {
      {"position", kVec3},
      {"direction", kVec3},
      {"up", kVec3},
      {"fovY", kDouble},
  };
  static constexpr ParamSpec renderer[] = {
      {"ambient", kDouble},
      {"background", kVec3},
      {"maxDepth", kInt},
      {"mode", kString},
      {"disableCycling", kBool},
  };
  static constexpr ParamSpec frame[] = {
      {"world", kHandle, ObjectKind::World},
      {"camera", kHandle, ObjectKind::Camera},
      {"renderer", kHandle, ObjectKind::Renderer},
      {"width", kInt},
      {"height", kInt},
  };
  switch (kind) {
  case ObjectKind::World:
    return world;
  case ObjectKind::Surface:
    return surface;
  case ObjectKind::Group:
    return group;
  case ObjectKind::Instance:
    return instance;
  case ObjectKind::Camera:
    return camera;
  case ObjectKind::Renderer:
    return renderer;
  case ObjectKind::Frame:
    return frame;
  }
  return {};
}

using Params = std::map<std::string, ParamValue, std::less<>>;

template <typename T>
T get(const Params &params, std::string_view name, T fallback)
{
  auto it = params.find(name);
  if (it == params.end())
    return fallback;
  return std::get<T>(it->second);
}

} // namespace

std::string_view toString(ObjectKind kind)
{
  switch (kind) {
  case ObjectKind::World:
    return "World";
  case ObjectKind::Surface:
    return "Surface";
  case ObjectKind::Group:
    return "Group";
  case ObjectKind::Instance:
    return "Instance";
  case ObjectKind::Camera:
    return "Camera";
  case ObjectKind::Renderer:
    return "Renderer";
  case ObjectKind::Frame:
    return "Frame";
  }
  return "?";
}

FrameMapping::FrameMapping(std::weak_ptr<const FrameResult> result)
    : m_result(std::move(result))
{
  if (auto r = m_result.lock()) {
    m_width = r->width;
    m_height = r->height;
    m_sequence = r->sequence;
  }
}

std::span<const std::uint8_t> FrameMapping::pixels() const
{
  auto r = m_result.lock();
  if (!r)
    throw UsageError("frame mapping was invalidated by a newer render");
  // The device keeps the buffer alive until the next render completes on the
  // calling thread, so the span outlives this local reference.
  return r->pixels;
}

// ---------------------------------------------------------------------------

struct Device::WorldSnapshot
{
  LocalWorld world; // shading left empty; filled per render
  Bytes fragment;
  std::uint64_t version{0};
};

struct Device::FrameState
{
  std::future<std::shared_ptr<const FrameResult>> pending;
  std::exception_ptr error;
  std::shared_ptr<const FrameResult> result;
  std::uint64_t sequence{0};
};

struct Device::Object
{
  ObjectKind kind;
  Params staged;
  Params committed;
  bool everCommitted{false};
  std::shared_ptr<const WorldSnapshot> world;
  std::unique_ptr<FrameState> frame;
};

struct Device::ShadingCache
{
  std::uint64_t lastSentVersion{0};
  std::vector<std::uint64_t> versions;
  std::vector<Bytes> fragments;
  std::shared_ptr<const ShadingTable> table;
};

Device::Device(Endpoint &ep)
    : m_ep(ep), m_refs([this](ObjectId id) { m_objects.erase(id); }),
      m_shadingCache(std::make_unique<ShadingCache>())
{
  m_shadingCache->versions.assign(ep.size(), 0);
  m_shadingCache->fragments.assign(ep.size(), {});
}

Device::~Device()
{
  for (auto &[id, obj] : m_objects) {
    if (obj->frame && obj->frame->pending.valid())
      obj->frame->pending.wait();
  }
}

Device::Object &Device::object(Handle h, const char *op)
{
  auto it = m_objects.find(h.id);
  if (it == m_objects.end())
    throw UsageError(std::string(op) + ": object " + std::to_string(h.id) + " is not alive");
  if (it->second->kind != h.kind)
    throw UsageError(std::string(op) + ": handle kind does not match object");
  return *it->second;
}

const Device::Object &Device::object(Handle h, const char *op) const
{
  return const_cast<Device *>(this)->object(h, op);
}

Handle Device::create(ObjectKind kind)
{
  const ObjectId id = m_refs.create();
  auto obj = std::make_unique<Object>();
  obj->kind = kind;
  if (kind == ObjectKind::Frame)
    obj->frame = std::make_unique<FrameState>();
  m_objects.emplace(id, std::move(obj));
  return Handle{id, kind};
}

std::uint32_t Device::retain(Handle obj)
{
  object(obj, "retain");
  return m_refs.retain(obj.id);
}

std::uint32_t Device::release(Handle obj)
{
  return m_refs.release(obj.id);
}

bool Device::alive(Handle obj) const
{
  return m_refs.alive(obj.id);
}

std::uint32_t Device::refCount(Handle obj) const
{
  return m_refs.count(obj.id);
}

void Device::linkHandles(ObjectId parent, const ParamValue &value)
{
  if (auto h = std::get_if<Handle>(&value)) {
    m_refs.link(parent, h->id);
  } else if (auto list = std::get_if<std::vector<Handle>>(&value)) {
    for (const auto &c : *list)
      m_refs.link(parent, c.id);
  }
}

void Device::unlinkHandles(ObjectId parent, const ParamValue &value)
{
  if (auto h = std::get_if<Handle>(&value)) {
    m_refs.unlink(parent, h->id);
  } else if (auto list = std::get_if<std::vector<Handle>>(&value)) {
    for (const auto &c : *list)
      m_refs.unlink(parent, c.id);
  }
}

void Device::setParam(Handle h, std::string_view name, ParamValue value)
{
  Object &obj = object(h, "setParam");
  const auto specs = paramsOf(obj.kind);
  auto spec = std::find_if(specs.begin(), specs.end(),
      [&](const ParamSpec &s) { return s.name == name; });
  if (spec == specs.end()) {
    std::string valid;
    for (const auto &s : specs)
      valid += (valid.empty() ? "" : ", ") + std::string(s.name);
    throw UsageError("unknown parameter '" + std::string(name) + "' for "
        + std::string(toString(obj.kind)) + "; valid names: " + valid);
  }

  if (spec->type == kDouble && value.index() == kInt)
    value = static_cast<double>(std::get<std::int64_t>(value));
  if (value.index() != static_cast<size_t>(spec->type))
    throw UsageError("parameter '" + std::string(name) + "' of "
        + std::string(toString(obj.kind)) + " has the wrong type");

  auto checkChild = [&](const Handle &c) {
    if (c.kind != spec->handleKind)
      throw UsageError("parameter '" + std::string(name) + "' expects "
          + std::string(toString(spec->handleKind)) + " handles");
    object(c, "setParam");
  };
  if (auto c = std::get_if<Handle>(&value))
    checkChild(*c);
  if (auto list = std::get_if<std::vector<Handle>>(&value)) {
    for (const auto &c : *list)
      checkChild(c);
  }

  linkHandles(h.id, value);
  auto it = obj.staged.find(name);
  if (it != obj.staged.end()) {
    ParamValue old = std::move(it->second);
    it->second = std::move(value);
    unlinkHandles(h.id, old);
  } else {
    obj.staged.emplace(std::string(name), std::move(value));
  }
}

void Device::commit(Handle h)
{
  Object &obj = object(h, "commit");

  if (obj.kind == ObjectKind::Frame) {
    std::string missing;
    for (const char *required : {"world", "camera", "renderer", "width", "height"}) {
      if (!obj.staged.count(required))
        missing += (missing.empty() ? "" : ", ") + std::string(required);
    }
    if (!missing.empty())
      throw ValidationError("Frame commit is missing: " + missing);
    const auto w = std::get<std::int64_t>(obj.staged.find("width")->second);
    const auto ht = std::get<std::int64_t>(obj.staged.find("height")->second);
    if (w < 1 || ht < 1 || w > 16384 || ht > 16384)
      throw ValidationError("Frame size must lie in [1, 16384]");
  }
  if (obj.kind == ObjectKind::Renderer) {
    const auto mode = get<std::string>(obj.staged, "mode", "shaded");
    if (mode != "shaded" && mode != "rankcolor")
      throw ValidationError("Renderer mode must be \"shaded\" or \"rankcolor\"");
    if (get<std::int64_t>(obj.staged, "maxDepth", 1) < 0)
      throw ValidationError("Renderer maxDepth must be >= 0");
  }

  Params previous = std::move(obj.committed);
  obj.committed = obj.staged;
  for (const auto &[name, value] : obj.committed)
    linkHandles(h.id, value);
  for (const auto &[name, value] : previous)
    unlinkHandles(h.id, value);

  if (obj.kind == ObjectKind::World)
    buildWorld(obj);
  obj.everCommitted = true;
}

void Device::buildWorld(Object &world)
{
  struct Placement
  {
    Handle surface;
    Vec3 translation;
  };
  std::vector<Placement> placements;
  for (const auto &s : get<std::vector<Handle>>(world.committed, "surfaces", {}))
    placements.push_back({s, {}});
  for (const auto &ih : get<std::vector<Handle>>(world.committed, "instances", {})) {
    const Object &inst = object(ih, "commit(World)");
    if (!inst.everCommitted)
      throw ValidationError("World references an uncommitted Instance");
    const Vec3 t = get<Vec3>(inst.committed, "translation", {});
    auto git = inst.committed.find("group");
    if (git == inst.committed.end())
      continue;
    const Object &group = object(std::get<Handle>(git->second), "commit(World)");
    if (!group.everCommitted)
      throw ValidationError("World references an uncommitted Group");
    for (const auto &s : get<std::vector<Handle>>(group.committed, "surfaces", {}))
      placements.push_back({s, t});
  }

  auto snap = std::make_shared<WorldSnapshot>();
  std::vector<ShadingEntry> entries;
  Aabb bounds;
  for (const auto &pl : placements) {
    const Object &surf = object(pl.surface, "commit(World)");
    if (!surf.everCommitted)
      throw ValidationError("World references an uncommitted Surface");
    const auto verts = get<std::vector<double>>(surf.committed, "vertices", {});
    const auto ids = get<std::vector<GlobalId>>(surf.committed, "globalIds", {});
    if (verts.size() % 9 != 0)
      throw ValidationError("Surface vertices must hold 9 values per triangle");
    if (ids.size() != verts.size() / 9)
      throw ValidationError("Surface needs one globalId per triangle");
    Material mat;
    mat.albedo = get<Vec3>(surf.committed, "albedo", mat.albedo);
    mat.mirror = get<Vec3>(surf.committed, "mirror", mat.mirror);
    for (size_t i = 0; i < ids.size(); ++i) {
      if (ids[i] == kMissId)
        throw ValidationError("Surface uses the reserved globalId");
      const double *v = verts.data() + 9 * i;
      Triangle t{Vec3{v[0], v[1], v[2]} + pl.translation,
          Vec3{v[3], v[4], v[5]} + pl.translation,
          Vec3{v[6], v[7], v[8]} + pl.translation, ids[i]};
      bounds.extend(t.bounds());
      entries.push_back({t.globalId, t.geometricNormal(), mat, m_ep.rank()});
      snap->world.prims.push_back(t);
    }
  }
  snap->world.bvh = Bvh::build(snap->world.prims);
  snap->world.lights = get<std::vector<Light>>(world.committed, "lights", {});
  snap->fragment = ShadingTable::encodeFragment(entries, bounds);
  snap->version = ++m_worldVersion;
  world.world = std::move(snap);
}

size_t Device::localPrimitiveCount(Handle world) const
{
  const Object &obj = object(world, "localPrimitiveCount");
  return obj.world ? obj.world->world.prims.size() : 0;
}

std::shared_ptr<const ShadingTable> Device::exchangeShading(const WorldSnapshot &world)
{
  ShadingCache &cache = *m_shadingCache;
  Bytes msg;
  ByteWriter w(msg);
  w.u64(world.version);
  const bool full = cache.lastSentVersion != world.version;
  w.u8(full ? 1 : 0);
  if (full)
    w.bytes(world.fragment);
  cache.lastSentVersion = world.version;

  const auto all = m_ep.allgather(msg);
  bool changed = !cache.table;
  for (std::uint32_t r = 0; r < all.size(); ++r) {
    ByteReader rd(all[r]);
    const std::uint64_t version = rd.u64();
    if (rd.u8() != 0) {
      const auto frag = rd.bytes(rd.remaining());
      cache.fragments[r].assign(frag.begin(), frag.end());
      cache.versions[r] = version;
      changed = true;
    } else if (cache.versions[r] != version) {
      throw ProtocolError("shading table of rank " + std::to_string(r) + " is out of sync");
    }
  }
  if (changed)
    cache.table = std::make_shared<const ShadingTable>(ShadingTable::merge(cache.fragments));
  return cache.table;
}

void Device::renderFrame(Handle h)
{
  Object &frame = object(h, "renderFrame");
  if (!frame.everCommitted)
    throw ValidationError("renderFrame: Frame was never committed");

  // One render in flight per device keeps collectives in order.
  for (auto &[id, obj] : m_objects) {
    if (obj->frame && obj->frame->pending.valid()) {
      FrameState &fs = *obj->frame;
      try {
        fs.result = fs.pending.get();
        fs.sequence = fs.result->sequence;
      } catch (...) {
        fs.error = std::current_exception();
      }
    }
  }

  const Params &fp = frame.committed;
  const Object &world = object(std::get<Handle>(fp.find("world")->second), "renderFrame");
  const Object &camera = object(std::get<Handle>(fp.find("camera")->second), "renderFrame");
  const Object &renderer = object(std::get<Handle>(fp.find("renderer")->second), "renderFrame");
  if (!world.everCommitted || !world.world)
    throw ValidationError("renderFrame: World was never committed");
  if (!camera.everCommitted)
    throw ValidationError("renderFrame: Camera was never committed");
  if (!renderer.everCommitted)
    throw ValidationError("renderFrame: Renderer was never committed");

  const auto width = static_cast<std::uint32_t>(std::get<std::int64_t>(fp.find("width")->second));
  const auto height = static_cast<std::uint32_t>(std::get<std::int64_t>(fp.find("height")->second));

  CameraSpec cam;
  cam.position = get<Vec3>(camera.committed, "position", cam.position);
  cam.viewDir = get<Vec3>(camera.committed, "direction", cam.viewDir);
  cam.up = get<Vec3>(camera.committed, "up", cam.up);
  cam.fovY = get<double>(camera.committed, "fovY", cam.fovY);
  cam.aspect = double(width) / double(height);

  RenderOptions opts;
  opts.ambient = get<double>(renderer.committed, "ambient", opts.ambient);
  opts.background = get<Vec3>(renderer.committed, "background", opts.background);
  opts.maxDepth = static_cast<std::uint32_t>(
      get<std::int64_t>(renderer.committed, "maxDepth", opts.maxDepth));
  opts.mode = get<std::string>(renderer.committed, "mode", "shaded") == "rankcolor"
      ? RenderMode::RankColor
      : RenderMode::Shaded;
  opts.disableCycling = get<bool>(renderer.committed, "disableCycling", false);

  FrameState &fs = *frame.frame;
  fs.error = nullptr;
  const std::uint64_t sequence = fs.sequence + 1;
  fs.pending = std::async(std::launch::async,
      [this, snap = world.world, cam, opts, width, height, sequence]() {
        LocalWorld lw = snap->world;
        lw.shading = exchangeShading(*snap);
        RenderResult rr = dprt::renderFrame(m_ep, lw, cam, width, height, opts);
        auto out = std::make_shared<FrameResult>();
        out->width = width;
        out->height = height;
        out->sequence = sequence;
        if (rr.image)
          out->pixels = std::move(rr.image->rgb);
        out->stats = std::move(rr.stats);
        return std::shared_ptr<const FrameResult>(std::move(out));
      });
}

void Device::waitFrame(Handle h)
{
  FrameState &fs = *object(h, "waitFrame").frame;
  if (fs.pending.valid()) {
    try {
      fs.result = fs.pending.get();
      fs.sequence = fs.result->sequence;
    } catch (...) {
      fs.error = std::current_exception();
    }
  }
  if (fs.error) {
    auto e = std::exchange(fs.error, nullptr);
    std::rethrow_exception(e);
  }
}

std::optional<FrameMapping> Device::mapFrame(Handle h)
{
  waitFrame(h);
  FrameState &fs = *object(h, "mapFrame").frame;
  if (!fs.result)
    throw UsageError("mapFrame: no completed render for this frame");
  if (!m_ep.isRoot())
    return std::nullopt;
  return FrameMapping(fs.result);
}

} // namespace dprt::api
