#pragma once

// Reader for the dense subset of ARFF used by ASlib scenarios:
// @relation, @attribute <name> <numeric|real|integer|string|{a,b,...}>, and
// comma-separated @data rows with '?' marking missing values.

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "survsel/errors.hpp"
#include "survsel/features.hpp"

namespace survsel::arff {

enum class AttributeType { Numeric, String, Nominal };

struct Attribute {
  std::string name;
  AttributeType type = AttributeType::Numeric;
  std::vector<std::string> nominal_values;
};

struct Table {
  std::string relation;
  std::vector<Attribute> attributes;
  std::vector<std::vector<std::string>> rows;

  /// Column index of the named attribute, or -1.
  int column(std::string_view name) const {
    for (std::size_t k = 0; k < attributes.size(); ++k)
      if (attributes[k].name == name) return static_cast<int>(k);
    return -1;
  }
};

namespace detail {

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}

inline std::string lower(std::string_view s) {
  std::string out(s);
  std::transform(out.begin(), out.end(), out.begin(), [](unsigned char c) { return std::tolower(c); });
  return out;
}

inline std::string unquote(std::string_view s) {
  s = trim(s);
  if (s.size() >= 2 && (s.front() == '\'' || s.front() == '"') && s.back() == s.front())
    return std::string(s.substr(1, s.size() - 2));
  return std::string(s);
}

/// Splits on commas outside single or double quotes; strips quotes.
inline std::vector<std::string> split_row(std::string_view line) {
  std::vector<std::string> cells;
  std::string cur;
  char quote = 0;
  for (char ch : line) {
    if (quote) {
      if (ch == quote) quote = 0;
      else cur.push_back(ch);
    } else if (ch == '\'' || ch == '"') {
      quote = ch;
    } else if (ch == ',') {
      cells.emplace_back(trim(cur));
      cur.clear();
    } else {
      cur.push_back(ch);
    }
  }
  cells.emplace_back(trim(cur));
  return cells;
}

/// Reads the next whitespace-delimited (possibly quoted) token from s.
inline std::string next_token(std::string_view& s) {
  s = trim(s);
  if (s.empty()) return {};
  std::size_t end = 0;
  if (s.front() == '\'' || s.front() == '"') {
    end = s.find(s.front(), 1);
    if (end == std::string_view::npos) throw FormatError("unterminated quote in ARFF header");
    std::string tok(s.substr(1, end - 1));
    s.remove_prefix(end + 1);
    return tok;
  }
  while (end < s.size() && !std::isspace(static_cast<unsigned char>(s[end]))) ++end;
  std::string tok(s.substr(0, end));
  s.remove_prefix(end);
  return tok;
}

}  // namespace detail

inline Table parse(std::istream& in, const std::string& source) {
  Table table;
  std::string line;
  bool in_data = false;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view = detail::trim(line);
    if (view.empty() || view.front() == '%') continue;
    if (!in_data && view.front() == '@') {
      std::string_view rest = view;
      const std::string keyword = detail::lower(detail::next_token(rest));
      if (keyword == "@relation") {
        table.relation = detail::unquote(rest);
      } else if (keyword == "@attribute") {
        Attribute attr;
        attr.name = detail::next_token(rest);
        const std::string_view type = detail::trim(rest);
        if (!type.empty() && type.front() == '{') {
          const auto close = type.find('}');
          if (close == std::string_view::npos) throw FormatError(source + ":" + std::to_string(line_no) + ": unterminated nominal set");
          attr.type = AttributeType::Nominal;
          attr.nominal_values = detail::split_row(type.substr(1, close - 1));
        } else {
          const std::string t = detail::lower(type);
          if (t == "numeric" || t == "real" || t == "integer") attr.type = AttributeType::Numeric;
          else if (t == "string") attr.type = AttributeType::String;
          else throw FormatError(source + ":" + std::to_string(line_no) + ": unsupported attribute type '" + std::string(type) + "'");
        }
        table.attributes.push_back(std::move(attr));
      } else if (keyword == "@data") {
        in_data = true;
      } else {
        throw FormatError(source + ":" + std::to_string(line_no) + ": unsupported header '" + keyword + "'");
      }
      continue;
    }
    if (!in_data) throw FormatError(source + ":" + std::to_string(line_no) + ": data before @data");
    if (view.front() == '{') throw FormatError(source + ":" + std::to_string(line_no) + ": sparse ARFF rows are not supported");
    auto cells = detail::split_row(view);
    if (cells.size() != table.attributes.size())
      throw FormatError(source + ":" + std::to_string(line_no) + ": expected " + std::to_string(table.attributes.size()) +
                        " values, found " + std::to_string(cells.size()));
    table.rows.push_back(std::move(cells));
  }
  if (!in_data) throw FormatError(source + ": missing @data section");
  return table;
}

inline Table read_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path);
  return parse(in, path);
}

/// Numeric value of a cell; '?' and empty cells are missing (NaN).
inline double to_number(std::string_view cell, const std::string& context) {
  cell = detail::trim(cell);
  if (cell.empty() || cell == "?") return kMissing;
  double v = 0.0;
  const char* first = cell.data();
  if (*first == '+') ++first;
  auto res = std::from_chars(first, cell.data() + cell.size(), v);
  if (res.ec != std::errc{} || res.ptr != cell.data() + cell.size())
    throw FormatError(context + ": cannot parse number '" + std::string(cell) + "'");
  return v;
}

}  // namespace survsel::arff
