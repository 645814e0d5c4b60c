#pragma once

// Minimal CSV tables for the report exporters. Lines starting with '#' are
// comments (metadata such as disclaimers and header lines of traces). Fields
// never contain commas, so no quoting is needed.

#include <string>
#include <string_view>
#include <vector>

namespace dmaccel {

struct CsvTable {
  std::vector<std::string> comments;  // without the leading "# "
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::size_t column(std::string_view name) const;  // throws if absent
  const std::string& at(std::size_t row, std::string_view name) const;
};

std::string to_csv(const CsvTable& table);
std::string to_text(const CsvTable& table);  // aligned columns for humans
CsvTable parse_csv(std::string_view text);

/// Shortest decimal that reads back to the same double.
std::string format_number(double value);

}  // namespace dmaccel
