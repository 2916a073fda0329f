// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#include <iostream>
#include <string>
#include <vector>

#include "cli.hpp"

int main(int argc, char** argv)
{
  const std::vector<std::string> args(argv, argv + argc);
  return gsavatar::cli::run(args, std::cout, std::cerr);
}
