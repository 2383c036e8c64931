#pragma once

#include <cstddef>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cwopt::csv {

// Minimal comma-separated tables: no quoting, no embedded commas. Every file
// this project reads or writes is numeric apart from timestamps and labels.
struct Row {
  std::size_t line = 0;  // 1-based line number in the source file
  std::vector<std::string> fields;
};

struct Table {
  std::vector<std::string> header;
  std::vector<Row> rows;

  /// Index of a header column, if present.
  std::optional<std::size_t> column(std::string_view name) const;
};

Table read(const std::filesystem::path& path);
Table parse(std::istream& in, const std::string& source_name);

std::vector<std::string> split(std::string_view line);
std::string join_header(const std::vector<std::string>& header);

/// Strict full-field number parse.
std::optional<double> to_double(std::string_view field);
std::optional<long long> to_int(std::string_view field);

/// Shortest text that round-trips the value exactly.
std::string format_double(double value);

}  // namespace cwopt::csv
