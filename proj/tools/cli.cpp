// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <chrono>
#include <fstream>
#include <map>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "dprt/error.hpp"
#include "dprt/ppm.hpp"
#include "dprt/service.hpp"
#include "dprt/timestep_cache.hpp"
#include "json.hpp"

namespace dprt::cli {

namespace {

using Clock = std::chrono::steady_clock;
using nlohmann::json;

struct SceneArgs
{
  std::string scenePath;
  std::vector<std::uint64_t> cloud; // seed, n, clusters
  int timestep{-1};
  size_t cacheCapacity{TimestepCache::kDefaultCapacity};
};

struct RenderArgs
{
  std::uint32_t ranks{1};
  std::string backend{"inproc"};
  std::string partition{"roundrobin"};
  std::string mode{"shaded"};
  std::uint32_t width{256};
  std::uint32_t height{256};
  std::uint32_t maxDepth{1};
  double ambient{0.1};
  bool disableCycling{false};
  std::vector<double> camPos, camDir, camUp;
  double fov{45.0};
  std::string statsPath;
};

void addSceneFlags(CLI::App &cmd, SceneArgs &a)
{
  auto *scene = cmd.add_option("--scene", a.scenePath, "Scene JSON file");
  auto *cloud = cmd.add_option("--cloud", a.cloud,
                       "Generate an uneven cloud instead: SEED,N,CLUSTERS")
                    ->expected(3)
                    ->delimiter(',');
  scene->excludes(cloud);
  cmd.add_option("--timestep", a.timestep, "Time step to render (scenes with timeSteps)")
      ->check(CLI::NonNegativeNumber);
  cmd.add_option("--timestep-cache", a.cacheCapacity, "Resident time steps")
      ->check(CLI::PositiveNumber);
}

void addRenderFlags(CLI::App &cmd, RenderArgs &a, bool withMode)
{
  cmd.add_option("--ranks", a.ranks, "Number of ranks")->check(CLI::Range(1, 256));
  cmd.add_option("--backend", a.backend, "inproc | socket")
      ->check(CLI::IsMember({"inproc", "socket"}));
  cmd.add_option("--partition", a.partition, "roundrobin | slab | fromfile");
  if (withMode)
    cmd.add_option("--mode", a.mode, "shaded | rankcolor")
        ->check(CLI::IsMember({"shaded", "rankcolor"}));
  cmd.add_option("--width", a.width, "Image width")->check(CLI::Range(1, 16384));
  cmd.add_option("--height", a.height, "Image height")->check(CLI::Range(1, 16384));
  cmd.add_option("--max-depth", a.maxDepth, "Reflection depth")->check(CLI::Range(0, 64));
  cmd.add_option("--ambient", a.ambient, "Ambient term");
  cmd.add_flag("--disable-cycling", a.disableCycling,
      "Debug: trace rays on their owner rank only");
  cmd.add_option("--cam-pos", a.camPos, "Camera position X,Y,Z")->expected(3)->delimiter(',');
  cmd.add_option("--cam-dir", a.camDir, "View direction X,Y,Z")->expected(3)->delimiter(',');
  cmd.add_option("--cam-up", a.camUp, "Up vector X,Y,Z")->expected(3)->delimiter(',');
  cmd.add_option("--fov", a.fov, "Vertical field of view in degrees");
  cmd.add_option("--stats", a.statsPath, "Append per-round stats (JSON lines); - for stdout");
}

Vec3 toVec(const std::vector<double> &v)
{
  return {v[0], v[1], v[2]};
}

SceneDesc loadScene(const SceneArgs &a, std::ostream &out)
{
  SceneDesc scene;
  if (!a.cloud.empty()) {
    scene = generateUnevenCloud(a.cloud[0], static_cast<std::uint32_t>(a.cloud[1]),
        static_cast<std::uint32_t>(a.cloud[2]));
  } else if (!a.scenePath.empty()) {
    scene = loadSceneFile(a.scenePath);
  } else {
    throw UsageError("one of --scene or --cloud is required");
  }
  if (a.timestep < 0)
    return scene;
  if (scene.timeSteps.empty())
    throw UsageError("--timestep given but the scene has no timeSteps");
  if (size_t(a.timestep) >= scene.timeSteps.size())
    throw UsageError("--timestep " + std::to_string(a.timestep) + " out of range (scene has "
        + std::to_string(scene.timeSteps.size()) + " steps)");
  TimestepCache cache = TimestepCache::forScene(scene, a.cacheCapacity);
  auto step = cache.fetch(size_t(a.timestep));
  const auto s = cache.stats();
  out << "timestep " << a.timestep << ": misses=" << s.misses << " hits=" << s.hits << '\n';
  return *step;
}

CameraSpec cameraFor(const RenderArgs &a, const SceneDesc &scene)
{
  const double aspect = double(a.width) / double(a.height);
  CameraSpec cam = frameBounds(scene.bounds(), a.fov, aspect);
  if (!a.camPos.empty())
    cam.position = toVec(a.camPos);
  if (!a.camDir.empty())
    cam.viewDir = toVec(a.camDir);
  else if (!a.camPos.empty())
    cam.viewDir = normalize((scene.bounds().lo + scene.bounds().hi) * 0.5 - cam.position);
  if (!a.camUp.empty())
    cam.up = toVec(a.camUp);
  cam.validate();
  return cam;
}

RenderOptions optionsFor(const RenderArgs &a, const SceneDesc &scene)
{
  RenderOptions o;
  o.maxDepth = a.maxDepth;
  o.ambient = a.ambient;
  o.background = scene.background;
  o.mode = a.mode == "rankcolor" ? RenderMode::RankColor : RenderMode::Shaded;
  o.disableCycling = a.disableCycling;
  return o;
}

PartitionStrategy strategyFor(const RenderArgs &a)
{
  auto s = parsePartitionStrategy(a.partition);
  if (!s)
    throw UsageError("--partition must be roundrobin, slab, or fromfile");
  return *s;
}

Backend backendFor(const RenderArgs &a)
{
  return a.backend == "socket" ? Backend::Socket : Backend::InProc;
}

class StatsSink
{
 public:
  StatsSink(const std::string &path, std::ostream &out)
  {
    if (path == "-")
      m_os = &out;
    else if (!path.empty()) {
      m_file.open(path, std::ios::app);
      if (!m_file)
        throw UsageError("cannot open stats file " + path);
      m_os = &m_file;
    }
  }
  std::ostream *stream()
  {
    return m_os;
  }
  void write(std::uint64_t frame, const RenderStats &stats)
  {
    if (!m_os)
      return;
    for (const auto &r : stats.rounds) {
      json j = {{"frame", frame}, {"round", r.round}, {"raysTraced", r.raysTraced},
          {"bytesExchanged", r.bytesExchanged}, {"millis", r.millis}};
      *m_os << j.dump() << '\n';
    }
    m_os->flush();
  }

 private:
  std::ofstream m_file;
  std::ostream *m_os{nullptr};
};

template <typename Fn>
void runRanks(std::vector<EndpointPtr> &eps, Fn &&fn)
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

struct PeerArgs
{
  int rank{-1};
  std::vector<std::string> peers;
};

int doRender(const SceneArgs &sa, const RenderArgs &ra, const PeerArgs &pa,
    const std::string &outPath, std::ostream &out)
{
  SceneDesc scene = loadScene(sa, out);
  const CameraSpec cam = cameraFor(ra, scene);
  const RenderOptions opts = optionsFor(ra, scene);
  const PartitionStrategy strategy = strategyFor(ra);
  StatsSink stats(ra.statsPath, out);

  if (pa.rank >= 0) {
    // One process per rank over the socket backend.
    if (pa.peers.empty())
      throw UsageError("--rank requires --peers");
    const auto numRanks = static_cast<std::uint32_t>(pa.peers.size());
    auto ep = connectSocketRank(static_cast<std::uint32_t>(pa.rank), pa.peers);
    const Partition part = partitionScene(scene, numRanks, strategy);
    auto shading = std::make_shared<const ShadingTable>(ShadingTable::fromScene(scene, part));
    LocalWorld world = LocalWorld::fromPartition(scene, part, ep->rank(), shading);
    RenderResult rr = renderFrame(*ep, world, cam, ra.width, ra.height, opts);
    stats.write(1, rr.stats);
    if (rr.image) {
      writePpm(outPath, *rr.image);
      out << "wrote " << outPath << " (" << ra.width << "x" << ra.height << ", " << numRanks
          << " ranks)\n";
    }
    return kExitOk;
  }

  RankedRender r = renderOnRanks(
      scene, ra.ranks, backendFor(ra), strategy, cam, ra.width, ra.height, opts);
  stats.write(1, r.statsPerRank[0]);
  writePpm(outPath, r.image);
  out << "wrote " << outPath << " (" << ra.width << "x" << ra.height << ", " << ra.ranks
      << " ranks, " << static_cast<long>(r.wallMillis) << " ms)\n";
  return kExitOk;
}

std::vector<std::uint32_t> parseRankList(const std::string &s)
{
  std::vector<std::uint32_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      const long v = std::stol(item);
      if (v < 1 || v > 256)
        throw UsageError("rank counts must lie in [1, 256]");
      out.push_back(static_cast<std::uint32_t>(v));
    } catch (const std::logic_error &) {
      throw UsageError("--ranks-list expects comma separated integers");
    }
  }
  if (out.empty())
    throw UsageError("--ranks-list is empty");
  return out;
}

int doBench(const SceneArgs &sa, const RenderArgs &ra, const std::string &rankList,
    std::uint32_t frames, std::ostream &out, std::ostream &err)
{
  SceneDesc scene = loadScene(sa, out);
  const CameraSpec cam = cameraFor(ra, scene);
  const RenderOptions opts = optionsFor(ra, scene);
  const PartitionStrategy strategy = strategyFor(ra);
  const std::uint64_t pixels = std::uint64_t(ra.width) * ra.height;
  StatsSink stats(ra.statsPath, out);

  bool ok = true;
  std::optional<std::uint64_t> raysPerRank;
  for (std::uint32_t numRanks : parseRankList(rankList)) {
    for (std::uint32_t f = 1; f <= frames; ++f) {
      RankedRender r = renderOnRanks(
          scene, numRanks, backendFor(ra), strategy, cam, ra.width, ra.height, opts);
      std::uint64_t primary = 0, rays = 0, bytes = 0;
      bool cycles = true;
      for (const auto &s : r.statsPerRank) {
        primary += s.primaryNearestQueries;
        cycles = cycles && s.cyclesComplete;
        for (const auto &round : s.rounds) {
          rays += round.raysTraced;
          bytes += round.bytesExchanged;
        }
      }
      stats.write(f, r.statsPerRank[0]);

      // Every ray is traced once per rank.
      const bool workOk = primary == pixels * numRanks && cycles && rays % numRanks == 0;
      if (!raysPerRank)
        raysPerRank = rays / numRanks;
      const bool raysOk = rays == *raysPerRank * numRanks;
      json rec = {{"ranks", numRanks}, {"frame", f}, {"wallMillis", r.wallMillis},
          {"primaryQueries", primary}, {"raysTraced", rays},
          {"raysPerRank", rays / numRanks}, {"bytesExchanged", bytes},
          {"cyclesComplete", cycles}, {"workAccountingOk", workOk && raysOk}};
      out << rec.dump() << '\n';
      if (!workOk || !raysOk) {
        err << "work accounting violated at R=" << numRanks << " frame " << f
            << ": primary queries " << primary << " expected " << pixels * numRanks << '\n';
        ok = false;
      }
    }
  }
  return ok ? kExitOk : kExitFailure;
}

int doServe(const SceneArgs &sa, const RenderArgs &ra, const std::string &bind,
    std::uint16_t port, bool once, std::ostream &out)
{
  SceneDesc scene = loadScene(sa, out);
  const RenderOptions opts = optionsFor(ra, scene);
  const PartitionStrategy strategy = strategyFor(ra);
  StatsSink stats(ra.statsPath, out);

  auto eps = initRanks(ra.ranks, backendFor(ra));
  const Partition part = partitionScene(scene, ra.ranks, strategy);
  auto shading = std::make_shared<const ShadingTable>(ShadingTable::fromScene(scene, part));

  ServiceOptions so;
  so.bindAddress = bind;
  so.port = port;
  so.once = once;
  so.render = opts;
  so.statsLog = stats.stream();
  so.onListening = [&](std::uint16_t p) {
    out << "listening on " << bind << ":" << p << std::endl;
  };
  ServiceSummary summary;
  runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
    LocalWorld world = LocalWorld::fromPartition(scene, part, r, shading);
    ServiceSummary s = serveSession(ep, world, so);
    if (r == 0)
      summary = s;
  });
  out << "served " << summary.framesSent << " frames in " << summary.sessions
      << " session(s), " << summary.framesPerSecond() << " fps\n";
  return kExitOk;
}

} // namespace

RankedRender renderOnRanks(const SceneDesc &scene, std::uint32_t numRanks, Backend backend,
    PartitionStrategy strategy, const CameraSpec &cam, std::uint32_t width,
    std::uint32_t height, const RenderOptions &options)
{
  auto eps = initRanks(numRanks, backend);
  const Partition part = partitionScene(scene, numRanks, strategy);
  auto shading = std::make_shared<const ShadingTable>(ShadingTable::fromScene(scene, part));

  RankedRender out;
  out.statsPerRank.resize(numRanks);
  out.traffic.resize(numRanks);
  runRanks(eps, [&](std::uint32_t r, Endpoint &ep) {
    LocalWorld world = LocalWorld::fromPartition(scene, part, r, shading);
    ep.barrier();
    const TrafficStats before = ep.traffic();
    const auto t0 = Clock::now();
    RenderResult rr = renderFrame(ep, world, cam, width, height, options);
    const auto t1 = Clock::now();
    TrafficStats after = ep.traffic();
    after.messagesSent -= before.messagesSent;
    after.bytesSent -= before.bytesSent;
    after.messagesReceived -= before.messagesReceived;
    after.bytesReceived -= before.bytesReceived;
    for (size_t k = 0; k < after.bytesSentByKind.size(); ++k)
      after.bytesSentByKind[k] -= before.bytesSentByKind[k];
    out.traffic[r] = after;
    out.statsPerRank[r] = std::move(rr.stats);
    if (r == 0) {
      out.image = std::move(*rr.image);
      out.wallMillis = std::chrono::duration<double, std::milli>(t1 - t0).count();
    }
  });
  return out;
}

int runCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err)
{
  CLI::App app{"Data-parallel distributed ray tracer", "dprt"};
  app.require_subcommand(1);

  SceneArgs sa;
  RenderArgs ra;
  PeerArgs pa;
  std::string outPath;
  std::string rankList = "1,2,4";
  std::uint32_t frames = 3;
  std::string bind = "127.0.0.1";
  std::uint16_t port = 0;
  bool once = false;

  auto *render = app.add_subcommand("render", "Render one frame to a PPM file");
  addSceneFlags(*render, sa);
  addRenderFlags(*render, ra, true);
  render->add_option("--out", outPath, "Output PPM path")->required();
  render->add_option("--rank", pa.rank, "This process's rank (multi-process mode)");
  render->add_option("--peers", pa.peers, "host:port of every rank, in rank order")
      ->delimiter(',');

  auto *rankviz = app.add_subcommand("rankviz", "Render colored by owning rank");
  addSceneFlags(*rankviz, sa);
  addRenderFlags(*rankviz, ra, false);
  rankviz->add_option("--out", outPath, "Output PPM path")->required();

  auto *bench = app.add_subcommand("bench", "Per-round statistics for several rank counts");
  addSceneFlags(*bench, sa);
  addRenderFlags(*bench, ra, true);
  bench->add_option("--ranks-list", rankList, "Comma separated rank counts");
  bench->add_option("--frames", frames, "Frames per rank count")->check(CLI::Range(1, 1000));

  auto *serve = app.add_subcommand("serve", "Stream frames to a thin client");
  addSceneFlags(*serve, sa);
  addRenderFlags(*serve, ra, true);
  serve->add_option("--port", port, "TCP port (0 picks one)");
  serve->add_option("--bind", bind, "Listen address");
  serve->add_flag("--once", once, "Exit after the first client disconnects");

  std::vector<const char *> argv;
  for (const auto &a : args)
    argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError &e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*render)
      return doRender(sa, ra, pa, outPath, out);
    if (*rankviz) {
      ra.mode = "rankcolor";
      return doRender(sa, ra, pa, outPath, out);
    }
    if (*bench)
      return doBench(sa, ra, rankList, frames, out, err);
    if (*serve)
      return doServe(sa, ra, bind, port, once, out);
  } catch (const UsageError &e) {
    err << "error: " << e.what() << "\n" << app.help();
    return kExitUsage;
  } catch (const std::exception &e) {
    err << "error: " << e.what() << '\n';
    return kExitFailure;
  }
  return kExitUsage;
}

} // namespace dprt::cli
