#include "dominet/csv.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "dominet/error.hpp"

namespace dominet {
namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

std::string location(std::string_view source, std::size_t line) {
  std::ostringstream os;
  os << source << ":" << line;
  return os.str();
}

// Splits one logical record starting at `pos`; handles RFC 4180 quoting.
std::vector<std::string> split_record(std::string_view text, std::size_t& pos,
                                      std::size_t& line,
                                      std::string_view source) {
  std::vector<std::string> fields;
  std::string field;
  bool in_quotes = false;
  bool was_quoted = false;
  const std::size_t start_line = line;
  while (pos < text.size()) {
    const char ch = text[pos];
    if (in_quotes) {
      if (ch == '"') {
        if (pos + 1 < text.size() && text[pos + 1] == '"') {
          field.push_back('"');
          pos += 2;
          continue;
        }
        in_quotes = false;
        ++pos;
        continue;
      }
      if (ch == '\n') ++line;
      field.push_back(ch);
      ++pos;
      continue;
    }
    if (ch == '"') {
      if (!was_quoted && trim(field).empty()) {
        field.clear();
        in_quotes = true;
        was_quoted = true;
        ++pos;
        continue;
      }
      throw Error(ErrorCode::Parse,
                  "unexpected quote at " + location(source, line) +
                      " column " + std::to_string(fields.size() + 1));
    }
    if (ch == ',') {
      fields.push_back(was_quoted ? field : std::string(trim(field)));
      field.clear();
      was_quoted = false;
      ++pos;
      continue;
    }
    if (ch == '\n') {
      ++pos;
      ++line;
      break;
    }
    field.push_back(ch);
    ++pos;
  }
  if (in_quotes) {
    throw Error(ErrorCode::Parse,
                "unterminated quoted field starting at " +
                    location(source, start_line));
  }
  fields.push_back(was_quoted ? field : std::string(trim(field)));
  return fields;
}

}  // namespace

CsvTable parse_csv(std::string_view text, std::string_view source_name) {
  if (text.size() >= 3 && static_cast<unsigned char>(text[0]) == 0xEF &&
      static_cast<unsigned char>(text[1]) == 0xBB &&
      static_cast<unsigned char>(text[2]) == 0xBF) {
    text.remove_prefix(3);
  }
  CsvTable table;
  std::size_t pos = 0;
  std::size_t line = 1;
  bool have_header = false;
  while (pos < text.size()) {
    const std::size_t eol = text.find('\n', pos);
    const std::string_view raw =
        text.substr(pos, eol == std::string_view::npos ? text.size() - pos
                                                        : eol - pos);
    const std::string_view stripped = trim(raw);
    if (stripped.empty() || stripped.front() == '#') {
      pos = eol == std::string_view::npos ? text.size() : eol + 1;
      ++line;
      continue;
    }
    const std::size_t record_line = line;
    auto fields = split_record(text, pos, line, source_name);
    if (!have_header) {
      table.header = std::move(fields);
      have_header = true;
      continue;
    }
    if (fields.size() != table.header.size()) {
      throw Error(ErrorCode::Parse,
                  "expected " + std::to_string(table.header.size()) +
                      " fields but found " + std::to_string(fields.size()) +
                      " at " + location(source_name, record_line));
    }
    table.rows.push_back(std::move(fields));
    table.line_numbers.push_back(record_line);
  }
  if (!have_header) {
    throw Error(ErrorCode::Parse, std::string(source_name) + ": empty file");
  }
  return table;
}

CsvTable read_csv(const std::filesystem::path& path) {
  return parse_csv(read_file(path), path.string());
}

std::optional<double> parse_cell(std::string_view cell, std::string_view where) {
  const std::string_view s = trim(cell);
  if (s.empty()) return std::nullopt;
  std::string_view digits = s;
  if (digits.front() == '+') digits.remove_prefix(1);
  double value = 0.0;
  const auto [ptr, ec] =
      std::from_chars(digits.data(), digits.data() + digits.size(), value);
  if (ec != std::errc() || ptr != digits.data() + digits.size() ||
      !std::isfinite(value)) {
    throw Error(ErrorCode::Parse, "not a finite number '" + std::string(s) +
                                      "' at " + std::string(where));
  }
  return value;
}

std::string csv_escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  std::array<char, 64> buf{};
  const auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), value);
  (void)ec;
  return std::string(buf.data(), ptr);
}

void write_file_atomic(const std::filesystem::path& path,
                       std::string_view content) {
  if (path.has_parent_path()) {
    std::filesystem::create_directories(path.parent_path());
  }
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw Error(ErrorCode::Io, "cannot open " + tmp.string() + " for writing");
    }
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw Error(ErrorCode::Io, "write failed for " + tmp.string());
  }
  std::filesystem::rename(tmp, path);
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  std::ostringstream os;
  os << in.rdbuf();
  return os.str();
}

}  // namespace dominet
