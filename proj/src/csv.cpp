#include "dmaccel/csv.hpp"

#include <algorithm>
#include <stdexcept>

#include <fmt/format.h>

#include "dmaccel/netir.hpp"

namespace dmaccel {

namespace {

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(',', start);
    out.emplace_back(line.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

std::size_t CsvTable::column(std::string_view name) const {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw Error("csv: no column '" + std::string(name) + "'");
  return static_cast<std::size_t>(it - header.begin());
}

const std::string& CsvTable::at(std::size_t row, std::string_view name) const {
  return rows.at(row).at(column(name));
}

std::string to_csv(const CsvTable& table) {
  std::string out;
  for (const auto& c : table.comments) out += "# " + c + "\n";
  out += fmt::format("{}\n", fmt::join(table.header, ","));
  for (const auto& r : table.rows) out += fmt::format("{}\n", fmt::join(r, ","));
  return out;
}

std::string to_text(const CsvTable& table) {
  std::vector<std::size_t> width(table.header.size(), 0);
  auto grow = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i)
      width[i] = std::max(width[i], r[i].size());
  };
  grow(table.header);
  for (const auto& r : table.rows) grow(r);
  auto line = [&](const std::vector<std::string>& r) {
    std::string s;
    for (std::size_t i = 0; i < r.size(); ++i)
      s += fmt::format("{:>{}}{}", r[i], i < width.size() ? width[i] : 0,
                       i + 1 < r.size() ? "  " : "\n");
    return s;
  };
  std::string out;
  for (const auto& c : table.comments) out += c + "\n";
  out += line(table.header);
  for (const auto& r : table.rows) out += line(r);
  return out;
}

CsvTable parse_csv(std::string_view text) {
  CsvTable t;
  std::size_t pos = 0;
  std::size_t lineno = 0;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.empty()) continue;
    if (line.front() == '#') {
      line.remove_prefix(1);
      if (!line.empty() && line.front() == ' ') line.remove_prefix(1);
      t.comments.emplace_back(line);
      continue;
    }
    auto fields = split(line);
    if (t.header.empty()) {
      t.header = std::move(fields);
    } else {
      if (fields.size() != t.header.size())
        throw ParseError(fmt::format("csv line {}: expected {} fields, got {}", lineno,
                                     t.header.size(), fields.size()),
                         lineno, 1);
      t.rows.push_back(std::move(fields));
    }
  }
  return t;
}

std::string format_number(double value) { return fmt::format("{}", value); }

}  // namespace dmaccel
