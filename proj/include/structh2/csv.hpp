#pragma once

// Matrix files: one row per line, comma separated, '.' decimal point, no
// header. Ragged rows are rejected.

#include <charconv>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "structh2/errors.hpp"
#include "structh2/linalg.hpp"

namespace structh2::csv {

namespace detail {

inline std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

inline double parse_number(std::string_view tok, const std::string& where) {
  tok = trim(tok);
  if (!tok.empty() && tok.front() == '+') tok.remove_prefix(1);
  double value = 0.0;
  const auto* begin = tok.data();
  const auto* end = tok.data() + tok.size();
  auto [ptr, ec] = std::from_chars(begin, end, value);
  if (tok.empty() || ec != std::errc() || ptr != end) {
    throw ParseError(where + ": cannot parse '" + std::string(tok) +
                     "' as a number");
  }
  return value;
}

inline std::vector<double> parse_row(std::string_view line,
                                     const std::string& where) {
  std::vector<double> row;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    const auto tok = line.substr(start, comma == std::string_view::npos
                                            ? std::string_view::npos
                                            : comma - start);
    row.push_back(parse_number(tok, where));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return row;
}

inline Matrix rows_to_matrix(const std::vector<std::vector<double>>& rows) {
  if (rows.empty()) return Matrix(0, 0);
  Matrix m(static_cast<Index>(rows.size()),
           static_cast<Index>(rows.front().size()));
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (std::size_t j = 0; j < rows[i].size(); ++j) {
      m(static_cast<Index>(i), static_cast<Index>(j)) = rows[i][j];
    }
  }
  return m;
}

}  // namespace detail

/// Parses a sequence of matrices separated by blank lines. A single block is
/// the ordinary matrix format.
inline std::vector<Matrix> parse_blocks(std::istream& in,
                                        const std::string& name) {
  std::vector<Matrix> blocks;
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  auto flush = [&] {
    if (!rows.empty()) blocks.push_back(detail::rows_to_matrix(rows));
    rows.clear();
  };
  while (std::getline(in, line)) {
    ++lineno;
    const auto t = detail::trim(line);
    if (t.empty()) {
      flush();
      continue;
    }
    const std::string where = name + ":" + std::to_string(lineno);
    auto row = detail::parse_row(t, where);
    if (!rows.empty() && row.size() != rows.front().size()) {
      throw ParseError(where + ": ragged row (" + std::to_string(row.size()) +
                       " entries, expected " +
                       std::to_string(rows.front().size()) + ")");
    }
    rows.push_back(std::move(row));
  }
  flush();
  return blocks;
}

inline Matrix parse_matrix(std::istream& in, const std::string& name) {
  auto blocks = parse_blocks(in, name);
  if (blocks.empty()) return Matrix(0, 0);
  if (blocks.size() > 1) {
    throw ParseError(name + ": blank line inside a matrix file");
  }
  require_finite(blocks.front(), name.c_str());
  return blocks.front();
}

inline Matrix read_matrix(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_matrix(in, path.string());
}

inline std::vector<Matrix> read_blocks(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open " + path.string());
  return parse_blocks(in, path.string());
}

/// Shortest decimal representation that round-trips exactly.
inline std::string format_number(double v) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  (void)ec;
  return std::string(buf, ptr);
}

inline void write_matrix(std::ostream& out, const Matrix& m) {
  for (Index i = 0; i < m.rows(); ++i) {
    for (Index j = 0; j < m.cols(); ++j) {
      if (j > 0) out << ',';
      out << format_number(m(i, j));
    }
    out << '\n';
  }
}

inline void write_matrix(const std::filesystem::path& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path.string());
  write_matrix(out, m);
}

}  // namespace structh2::csv
