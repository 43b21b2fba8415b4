#pragma once

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace pivotmt::io {

std::string read_file(const std::filesystem::path& path);

/// Reads a text file as lines. A trailing newline does not produce an empty
/// final line; carriage returns before the newline are dropped.
std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes `contents` to a sibling temporary file and renames it over `path`,
/// so readers never observe a partially written file.
void write_file_atomic(const std::filesystem::path& path, std::string_view contents);

/// Joins lines with '\n' (one terminator per line) and writes atomically.
void write_lines_atomic(const std::filesystem::path& path, const std::vector<std::string>& lines);

}  // namespace pivotmt::io
