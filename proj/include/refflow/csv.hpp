#pragma once

// Minimal RFC 4180 reader/writer. Fields may be quoted; quoted fields may
// contain commas, doubled quotes and newlines. Lines starting with '#' before
// the header are treated as metadata comments and skipped.

#include <cstddef>
#include <filesystem>
#include <fstream>
#include <istream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "refflow/error.hpp"

namespace refflow::csv {

using Row = std::vector<std::string>;

class Table {
 public:
  Table() = default;
  Table(Row header, std::vector<Row> rows) : header_(std::move(header)), rows_(std::move(rows)) {
    for (std::size_t i = 0; i < header_.size(); ++i) index_.emplace(header_[i], i);
  }

  const Row& header() const noexcept { return header_; }
  const std::vector<Row>& rows() const noexcept { return rows_; }
  std::size_t size() const noexcept { return rows_.size(); }

  std::optional<std::size_t> column(std::string_view name) const {
    auto it = index_.find(std::string(name));
    if (it == index_.end()) return std::nullopt;
    return it->second;
  }

  std::size_t require_column(std::string_view name, std::string_view context) const {
    if (auto c = column(name)) return *c;
    throw DataError(std::string(context) + ": missing column '" + std::string(name) + "'");
  }

 private:
  Row header_;
  std::vector<Row> rows_;
  std::map<std::string, std::size_t> index_;
};

// Reads one logical record. Returns false at end of input.
inline bool read_record(std::istream& in, Row& out) {
  out.clear();
  std::string field;
  bool in_quotes = false;
  bool any = false;
  char c;
  while (in.get(c)) {
    any = true;
    if (in_quotes) {
      if (c == '"') {
        if (in.peek() == '"') {
          in.get(c);
          field += '"';
        } else {
          in_quotes = false;
        }
      } else {
        field += c;
      }
      continue;
    }
    if (c == '"') {
      in_quotes = true;
    } else if (c == ',') {
      out.push_back(std::move(field));
      field.clear();
    } else if (c == '\n') {
      out.push_back(std::move(field));
      return true;
    } else if (c != '\r') {
      field += c;
    }
  }
  if (in_quotes) throw DataError("csv: unterminated quoted field");
  if (!any) return false;
  out.push_back(std::move(field));
  return true;
}

inline Table parse(std::istream& in, std::string_view context) {
  Row header;
  for (;;) {
    if (!read_record(in, header)) throw DataError(std::string(context) + ": missing header row");
    if (header.empty() || header.front().rfind('#', 0) != 0) break;
  }
  if (!header.empty() && header.front().rfind("\xEF\xBB\xBF", 0) == 0) header.front().erase(0, 3);
  std::vector<Row> rows;
  Row row;
  std::size_t line = 1;
  while (read_record(in, row)) {
    ++line;
    if (row.size() == 1 && row.front().empty()) continue;
    if (row.size() != header.size()) {
      throw DataError(std::string(context) + ": record " + std::to_string(line) + " has " +
                      std::to_string(row.size()) + " fields, expected " + std::to_string(header.size()));
    }
    rows.push_back(row);
  }
  return Table(std::move(header), std::move(rows));
}

inline Table read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  return parse(in, path.string());
}

inline std::string escape(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) return std::string(field);
  std::string out = "\"";
  for (char c : field) {
    if (c == '"') out += '"';
    out += c;
  }
  out += '"';
  return out;
}

inline void write_row(std::ostream& os, const Row& row) {
  for (std::size_t i = 0; i < row.size(); ++i) {
    if (i) os << ',';
    os << escape(row[i]);
  }
  os << '\n';
}

}  // namespace refflow::csv
