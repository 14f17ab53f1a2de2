#pragma once

#include "blockea/common.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

namespace blockea {

/// Shortest decimal form that round-trips a double (17 significant digits).
inline std::string format_double(double x) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

namespace detail {

inline std::vector<double> parse_csv_line(const std::string& line) {
  std::vector<double> out;
  std::string cell;
  std::stringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (cell.find_first_not_of(" \t\r") == std::string::npos) continue;
    out.push_back(std::stod(cell));
  }
  return out;
}

}  // namespace detail

/// Reads a headerless CSV of numbers; rows are observations. Lines starting
/// with '#' are skipped.
inline Matrix read_matrix_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  std::vector<std::vector<double>> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') continue;
    auto vals = detail::parse_csv_line(line);
    if (vals.empty()) continue;
    if (!rows.empty() && vals.size() != rows.front().size())
      throw std::runtime_error("ragged CSV in " + path);
    rows.push_back(std::move(vals));
  }
  if (rows.empty()) throw std::runtime_error("empty CSV " + path);
  Matrix m(static_cast<int>(rows.size()), static_cast<int>(rows[0].size()));
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) m(i, j) = rows[i][j];
  return m;
}

inline Vector read_vector_csv(const std::string& path) {
  Matrix m = read_matrix_csv(path);
  if (m.cols() == 1) return m.col(0);
  if (m.rows() == 1) return m.row(0).transpose();
  throw std::runtime_error(path + " is not a vector");
}

inline void write_matrix_csv(const std::string& path, const Matrix& m) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path);
  for (int i = 0; i < m.rows(); ++i) {
    for (int j = 0; j < m.cols(); ++j) {
      if (j) out << ',';
      out << format_double(m(i, j));
    }
    out << '\n';
  }
}

inline void write_vector_csv(const std::string& path, const Vector& v) {
  write_matrix_csv(path, v);
}

/// One section of a key = value config file.
struct ConfigSection {
  std::string name;
  std::map<std::string, std::string> values;

  bool has(const std::string& key) const { return values.count(key) > 0; }
  std::string get(const std::string& key) const {
    auto it = values.find(key);
    if (it == values.end())
      throw std::runtime_error("config: missing key '" + key + "' in [" +
                               name + "]");
    return it->second;
  }
  std::string get_or(const std::string& key, const std::string& dflt) const {
    auto it = values.find(key);
    return it == values.end() ? dflt : it->second;
  }
  double get_double(const std::string& key) const { return std::stod(get(key)); }
  int get_int(const std::string& key) const { return std::stoi(get(key)); }
};

/// Flat structured-text config: [section] headers followed by key = value
/// lines; '#' starts a comment. Repeated section names are preserved in
/// order (used for mixture components).
inline std::vector<ConfigSection> parse_config(std::istream& in) {
  std::vector<ConfigSection> sections;
  sections.push_back({"", {}});
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    auto trim = [](std::string s) {
      auto b = s.find_first_not_of(" \t\r");
      auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[' && line.back() == ']') {
      sections.push_back({trim(line.substr(1, line.size() - 2)), {}});
      continue;
    }
    auto eq = line.find('=');
    if (eq == std::string::npos)
      throw std::runtime_error("config: expected key = value at line " +
                               std::to_string(lineno));
    sections.back().values[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  if (sections.front().values.empty() && sections.size() > 1)
    sections.erase(sections.begin());
  return sections;
}

inline std::vector<ConfigSection> parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path);
  return parse_config(in);
}

}  // namespace blockea
