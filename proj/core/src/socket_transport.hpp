// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "dprt/transport.hpp"

namespace dprt::detail {

std::vector<EndpointPtr> initSocketRanks(
    std::uint32_t numRanks, const TransportConfig &config);

} // namespace dprt::detail
