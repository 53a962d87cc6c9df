#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <string_view>

namespace affex::fsutil {

// Writes to a sibling temporary file, then renames it over `path`. IoError
// on failure; the destination is never left half-written.
void write_atomic(const std::filesystem::path& path, std::string_view contents);
void write_atomic(const std::filesystem::path& path, std::span<const std::uint8_t> contents);

std::string read_text(const std::filesystem::path& path);

}  // namespace affex::fsutil
