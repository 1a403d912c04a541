#pragma once

#include <filesystem>
#include <string>
#include <string_view>

namespace beacon {

std::string read_file(const std::filesystem::path& path);

// Writes to a sibling temporary file and renames it into place, so concurrent
// readers observe either the old content or the complete new content.
void write_file_atomic(const std::filesystem::path& path, std::string_view content);

}  // namespace beacon
