// Copyright 2026 The dprt Authors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>

#include "cli.hpp"

int main(int argc, char **argv)
{
  std::vector<std::string> args(argv, argv + argc);
  return dprt::cli::runCli(args, std::cout, std::cerr);
}
