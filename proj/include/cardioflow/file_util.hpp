#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace cardioflow {

/// Writes to a temporary file next to the target and renames it into place,
/// so readers never see a partially written file. Throws IoError.
void atomic_write(const std::filesystem::path& path, std::string_view content);

/// Whole-file read. Throws IoError if the file cannot be opened.
std::string read_file(const std::filesystem::path& path);

}  // namespace cardioflow
