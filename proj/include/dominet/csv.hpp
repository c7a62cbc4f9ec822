#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dominet {

inline constexpr int kSchemaVersion = 1;

/// A parsed CSV: header plus data rows. `line_numbers[i]` is the 1-based
/// source line of `rows[i]`. Lines starting with '#' are skipped.
struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
  std::vector<std::size_t> line_numbers;
};

CsvTable parse_csv(std::string_view text, std::string_view source_name);
CsvTable read_csv(const std::filesystem::path& path);

/// Parses a numeric cell. Empty (after trimming) yields nullopt; anything
/// else that is not a finite decimal number yields a parse error.
std::optional<double> parse_cell(std::string_view cell, std::string_view where);

std::string csv_escape(std::string_view field);

/// Shortest round-trip decimal representation.
std::string format_double(double value);

/// Writes to `<path>.tmp` and renames over `path`.
void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content);

std::string read_file(const std::filesystem::path& path);

}  // namespace dominet
