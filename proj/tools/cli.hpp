// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <exception>
#include <iosfwd>
#include <string>
#include <vector>

namespace gsavatar::cli {

/// Process exit codes. Stable; scripts may depend on them.
enum ExitCode : int {
  kOk = 0,
  kFailure = 1,       ///< any other library error
  kMissingFile = 2,   ///< input path does not exist or cannot be read
  kFormatError = 3,   ///< malformed PLY, rig, clip or bundle
  kUsageError = 4,    ///< bad flags or argument values
  kIncompatible = 5,  ///< bundle and rig do not belong together
  kFilterError = 10,  ///< subject isolation or normalization failed
  kFitError = 11,     ///< orientation ambiguous or template fit rejected
  kBindError = 12,    ///< splats bound to singular vertex frames
};

/// Maps a thrown exception to its exit code.
int exit_code_for(const std::exception& error);

/// Runs one command line (args[0] is the program name). Never throws.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace gsavatar::cli
