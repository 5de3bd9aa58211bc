#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cvner {

std::string read_file(const std::filesystem::path& path);

/// Writes `content` to a temp file next to `path`, then renames it into place,
/// so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

/// Lower-case hex SHA-256.
std::string sha256_hex(std::string_view data);

}  // namespace cvner
