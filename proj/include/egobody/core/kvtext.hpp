#pragma once

// Line-oriented key/value text used for skeleton sidecars, frame metadata
// and parameter files.
//
//   # comment
//   format_version: 1
//   kind: skeleton
//   parents: -1 0 0 0 1
//   rest_joints [24 3]:
//   0 0.95 0
//   ...
//
// A scalar/list entry is `key: tok tok ...`. A matrix entry is
// `key [rows cols]:` followed by exactly `rows` lines of `cols` numbers.
// Keys are unique. Numbers are written with 17 significant digits so a
// write/read cycle reproduces doubles exactly.

#include <Eigen/Core>

#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "egobody/core/error.hpp"

namespace egobody::kv {

struct Entry {
  std::vector<std::string> tokens;  // list entry
  bool is_matrix = false;
  int rows = 0;
  int cols = 0;
  std::vector<double> values;  // matrix entry, row-major
  int line = 0;
};

inline std::string format_number(double v) {
  if (v == 0.0) return "0";
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline double parse_number(const std::string& tok, const std::string& file, int line) {
  double v = 0.0;
  const char* b = tok.data();
  const char* e = b + tok.size();
  auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) throw ParseError(file, line, "expected a number, got '" + tok + "'");
  return v;
}

inline Entry token_entry(std::string value) {
  Entry e;
  e.tokens.push_back(std::move(value));
  return e;
}

class Document {
 public:
  Document() = default;

  // --- writing -------------------------------------------------------------
  void set(const std::string& key, const std::string& value) { put(key, token_entry(value)); }
  void set(const std::string& key, const char* value) { set(key, std::string(value)); }
  void set(const std::string& key, double value) { put(key, token_entry(format_number(value))); }
  void set(const std::string& key, int value) { put(key, token_entry(std::to_string(value))); }
  void set(const std::string& key, long long value) { put(key, token_entry(std::to_string(value))); }

  template <class Range>
  void set_list(const std::string& key, const Range& values) {
    Entry e;
    for (const auto& v : values) e.tokens.push_back(format_number(static_cast<double>(v)));
    put(key, std::move(e));
  }

  void set_matrix(const std::string& key, int rows, int cols, std::vector<double> values) {
    require(static_cast<int>(values.size()) == rows * cols, "kv matrix size mismatch for " + key);
    Entry e;
    e.is_matrix = true;
    e.rows = rows;
    e.cols = cols;
    e.values = std::move(values);
    put(key, std::move(e));
  }

  void set_matrix(const std::string& key, const Eigen::MatrixXd& m) {
    std::vector<double> v(static_cast<std::size_t>(m.size()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) v[static_cast<std::size_t>(r * m.cols() + c)] = m(r, c);
    set_matrix(key, static_cast<int>(m.rows()), static_cast<int>(m.cols()), std::move(v));
  }

  std::string to_string() const {
    std::string out;
    for (const auto& key : order_) {
      const Entry& e = entries_.at(key);
      if (e.is_matrix) {
        out += key + " [" + std::to_string(e.rows) + " " + std::to_string(e.cols) + "]:\n";
        for (int r = 0; r < e.rows; ++r) {
          for (int c = 0; c < e.cols; ++c) {
            if (c) out += ' ';
            out += format_number(e.values[static_cast<std::size_t>(r) * e.cols + c]);
          }
          out += '\n';
        }
      } else {
        out += key + ":";
        for (const auto& t : e.tokens) out += " " + t;
        out += '\n';
      }
    }
    return out;
  }

  void save(const std::filesystem::path& path) const {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << to_string();
    if (!f) throw std::runtime_error("write failed: " + path.string());
  }

  // --- reading -------------------------------------------------------------
  static Document parse(const std::string& text, const std::string& file = "<memory>") {
    Document doc;
    doc.file_ = file;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      if (!line.empty() && line.back() == '\r') line.pop_back();
      const auto first = line.find_first_not_of(" \t");
      if (first == std::string::npos || line[first] == '#') continue;
      const auto colon = line.find(':');
      if (colon == std::string::npos) throw ParseError(file, lineno, "expected 'key: value'");
      std::string head = trim(line.substr(0, colon));
      const std::string rest = line.substr(colon + 1);
      Entry e;
      e.line = lineno;
      const auto bracket = head.find('[');
      if (bracket != std::string::npos) {
        const auto close = head.find(']', bracket);
        if (close == std::string::npos) throw ParseError(file, lineno, "unterminated matrix shape");
        std::istringstream shape(head.substr(bracket + 1, close - bracket - 1));
        if (!(shape >> e.rows >> e.cols) || e.rows < 0 || e.cols < 0)
          throw ParseError(file, lineno, "bad matrix shape");
        head = trim(head.substr(0, bracket));
        if (!trim(rest).empty()) throw ParseError(file, lineno, "matrix header must end the line");
        e.is_matrix = true;
        e.values.reserve(static_cast<std::size_t>(e.rows) * e.cols);
        for (int r = 0; r < e.rows; ++r) {
          if (!std::getline(in, line)) throw ParseError(file, lineno + 1, "unexpected end of file in matrix '" + head + "'");
          ++lineno;
          const auto toks = split(line);
          if (static_cast<int>(toks.size()) != e.cols)
            throw ParseError(file, lineno,
                             "matrix '" + head + "' row has " + std::to_string(toks.size()) + " values, expected " +
                                 std::to_string(e.cols));
          for (const auto& t : toks) e.values.push_back(parse_number(t, file, lineno));
        }
      } else {
        e.tokens = split(rest);
      }
      if (head.empty()) throw ParseError(file, e.line, "empty key");
      if (doc.entries_.count(head)) throw ParseError(file, e.line, "duplicate key '" + head + "'");
      doc.put(head, std::move(e));
    }
    return doc;
  }

  static Document load(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::stringstream ss;
    ss << f.rdbuf();
    return parse(ss.str(), path.string());
  }

  bool has(const std::string& key) const { return entries_.count(key) > 0; }

  const Entry& entry(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) throw ParseError(file_, 0, "missing key '" + key + "'");
    return it->second;
  }

  std::string get_string(const std::string& key) const {
    const Entry& e = entry(key);
    if (e.is_matrix || e.tokens.size() != 1) throw ParseError(file_, e.line, "'" + key + "' must be a single value");
    return e.tokens[0];
  }

  double get_number(const std::string& key) const { return parse_number(get_string(key), file_, entry(key).line); }

  int get_int(const std::string& key) const {
    const double v = get_number(key);
    if (v != std::floor(v)) throw ParseError(file_, entry(key).line, "'" + key + "' must be an integer");
    return static_cast<int>(v);
  }

  std::vector<double> get_list(const std::string& key) const {
    const Entry& e = entry(key);
    if (e.is_matrix) throw ParseError(file_, e.line, "'" + key + "' must be a list");
    std::vector<double> out;
    for (const auto& t : e.tokens) out.push_back(parse_number(t, file_, e.line));
    return out;
  }

  /// Matrix with an optional shape check (-1 = any).
  const Entry& get_matrix(const std::string& key, int rows = -1, int cols = -1) const {
    const Entry& e = entry(key);
    if (!e.is_matrix) throw ParseError(file_, e.line, "'" + key + "' must be a matrix");
    if ((rows >= 0 && e.rows != rows) || (cols >= 0 && e.cols != cols))
      throw ParseError(file_, e.line,
                       "'" + key + "' has shape [" + std::to_string(e.rows) + " " + std::to_string(e.cols) +
                           "], expected [" + std::to_string(rows) + " " + std::to_string(cols) + "]");
    return e;
  }

  Eigen::MatrixXd get_eigen(const std::string& key, int rows = -1, int cols = -1) const {
    const Entry& e = get_matrix(key, rows, cols);
    Eigen::MatrixXd m(e.rows, e.cols);
    for (int r = 0; r < e.rows; ++r)
      for (int c = 0; c < e.cols; ++c) m(r, c) = e.values[static_cast<std::size_t>(r) * e.cols + c];
    return m;
  }

  const std::string& file() const { return file_; }
  const std::vector<std::string>& keys() const { return order_; }

 private:
  static std::string trim(const std::string& s) {
    const auto a = s.find_first_not_of(" \t");
    if (a == std::string::npos) return {};
    const auto b = s.find_last_not_of(" \t");
    return s.substr(a, b - a + 1);
  }
  static std::vector<std::string> split(const std::string& s) {
    std::vector<std::string> out;
    std::istringstream in(s);
    std::string t;
    while (in >> t) out.push_back(t);
    return out;
  }
  void put(const std::string& key, Entry e) {
    if (!entries_.count(key)) order_.push_back(key);
    entries_[key] = std::move(e);
  }

  std::string file_ = "<memory>";
  std::vector<std::string> order_;
  std::map<std::string, Entry> entries_;
};

}  // namespace egobody::kv
