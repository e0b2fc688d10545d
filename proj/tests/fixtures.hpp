// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

// Messages behind the golden files in fixtures/.

#pragma once

#include <string>
#include <utility>
#include <vector>

#include "dprt/codec.hpp"

namespace dprt::fixtures {

inline FrameMessage redGreenFrame()
{
  FrameMessage m;
  m.width = 2;
  m.height = 1;
  m.sequence = 7;
  m.renderMillis = 12;
  m.pixels = {255, 0, 0, 0, 255, 0};
  return m;
}

inline CameraUpdateMessage cameraUpdate()
{
  CameraUpdateMessage m;
  m.position = {0.5, 2.0, 3.0};
  m.viewDir = {0.0, -0.5, -1.0};
  m.up = {0.0, 1.0, 0.0};
  m.fovY = 50.0;
  m.requestWidth = 320;
  m.requestHeight = 240;
  return m;
}

inline ControlMessage busy()
{
  return {"busy", "another client is connected"};
}

inline std::vector<std::pair<std::string, Message>> all()
{
  return {{"frame_2x1.bin", redGreenFrame()}, {"camera_update.bin", cameraUpdate()},
      {"control_busy.bin", busy()}};
}

} // namespace dprt::fixtures
