#pragma once

#include <filesystem>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rydsense::csv {

/// Shortest round-trip decimal form; "inf"/"-inf"/"nan" for non-finite values.
std::string format(double value);

std::optional<double> parse_double(std::string_view text);

std::string_view trim(std::string_view text);
std::vector<std::string_view> split(std::string_view line, char sep = ',');

/// A CSV document with '#' comment lines; `key=value` comments become metadata.
struct Document {
  std::map<std::string, std::string> metadata;
  std::vector<std::string> header;
  struct Row {
    std::size_t line = 0;
    std::vector<std::string> fields;
  };
  std::vector<Row> rows;
};

Document read(std::istream& in);

/// Writes `contents` to a sibling temporary and renames it over `path`.
void write_atomically(const std::filesystem::path& path, std::string_view contents);

}  // namespace rydsense::csv
