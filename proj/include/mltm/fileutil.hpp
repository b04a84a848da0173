#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace mltm {

// Reads a whole file; throws Error if it cannot be opened.
std::string read_file(const std::filesystem::path& path);

// Writes `contents` to a sibling temporary file and renames it over `path`,
// so readers never observe a partially written artifact.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

}  // namespace mltm
