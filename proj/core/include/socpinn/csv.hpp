#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace socpinn::csv {

/// Splits one CSV line on commas, honouring double-quoted fields. Surrounding
/// whitespace and a trailing '\r' are stripped.
std::vector<std::string> split_line(std::string_view line);

/// Strict decimal parse of the whole field; nullopt when it is not a number.
std::optional<double> parse_number(std::string_view field);

/// Seconds from a plain number or an "[h:]mm:ss[.f]" clock string.
std::optional<double> parse_seconds(std::string_view field);

/// Shortest round-trip decimal representation.
std::string format_number(double value);

std::vector<std::string> read_lines(const std::filesystem::path& path);

/// Writes `text` to `path` through a temporary file and rename.
void write_file_atomic(const std::filesystem::path& path, std::string_view text);

}  // namespace socpinn::csv
