#pragma once

#include <filesystem>
#include <string>

namespace pjfit {

// Writes through a temporary sibling and renames, so readers never observe
// a partially written file.
void write_file_atomic(const std::filesystem::path& path, const std::string& content);
std::string read_file(const std::filesystem::path& path);

}  // namespace pjfit
