// SPDX-FileCopyrightText: Copyright (c) 2026 gsavatar contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace gsavatar {

/// Throws FileError ("no such file: ...") when the path cannot be opened.
std::vector<std::uint8_t> read_file_bytes(const std::string& path);
std::string read_file_text(const std::string& path);

/// Writes to `path + ".tmp-<pid>"` and renames over `path`. On failure the
/// temporary is removed and `path` is left untouched.
void write_file_atomic(const std::string& path, std::span<const std::uint8_t> bytes);
void write_file_atomic(const std::string& path, const std::string& text);

}  // namespace gsavatar
