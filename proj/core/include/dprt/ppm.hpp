// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "dprt/engine.hpp"
#include "dprt/wire.hpp"

namespace dprt {

// Binary PPM: "P6\n<w> <h>\n255\n" followed by the raw RGB rows.
Bytes encodePpm(const Image &image);
Image decodePpm(ByteView data);

void writePpm(const std::filesystem::path &path, const Image &image);
Image readPpm(const std::filesystem::path &path);

} // namespace dprt
