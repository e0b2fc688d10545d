// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <ostream>
#include <string>
#include <vector>

#include "dprt/engine.hpp"
#include "dprt/scene.hpp"
#include "dprt/transport.hpp"

namespace dprt::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

// args[0] is the program name. Never calls exit().
int runCli(const std::vector<std::string> &args, std::ostream &out, std::ostream &err);

struct RankedRender
{
  Image image;
  std::vector<RenderStats> statsPerRank;
  double wallMillis{0.0};
  std::vector<TrafficStats> traffic;
};

// Renders one frame on `numRanks` in-process ranks, one thread each.
RankedRender renderOnRanks(const SceneDesc &scene, std::uint32_t numRanks, Backend backend,
    PartitionStrategy strategy, const CameraSpec &cam, std::uint32_t width,
    std::uint32_t height, const RenderOptions &options);

} // namespace dprt::cli
