#pragma once

// Text checkpoint records, one per parameter:
//
//   param <name> <rows> <cols>
//   <row 0 values>
//   ...
//
// Values are C99 hexadecimal floats, so a write/read cycle is bit-exact.

#include <cstdio>
#include <cstdlib>
#include <istream>
#include <ostream>
#include <span>
#include <sstream>
#include <string>

#include "treelstm/autodiff.hpp"
#include "treelstm/error.hpp"

namespace treelstm {

inline std::string hex_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%a", v);
  return buf;
}

inline double parse_hex_double(const std::string& text) {
  char* end = nullptr;
  const double v = std::strtod(text.c_str(), &end);
  if (end == text.c_str() || *end != '\0') throw Error(Errc::bad_format, "not a number: '" + text + "'");
  return v;
}

inline void write_parameter(std::ostream& out, const Parameter& p) {
  out << "param " << p.name << ' ' << p.value.rows() << ' ' << p.value.cols() << '\n';
  for (std::size_t r = 0; r < p.value.rows(); ++r) {
    for (std::size_t c = 0; c < p.value.cols(); ++c) {
      if (c) out << ' ';
      out << hex_double(p.value(r, c));
    }
    out << '\n';
  }
}

inline void write_parameters(std::ostream& out, std::span<const Parameter* const> params) {
  for (const Parameter* p : params) write_parameter(out, *p);
}

/// Reads records into `params`, which must match by order, name and shape.
inline void read_parameters(std::istream& in, std::span<Parameter* const> params) {
  for (Parameter* p : params) {
    std::string line;
    if (!std::getline(in, line))
      throw Error(Errc::checkpoint_mismatch, "missing record for parameter " + p->name);
    std::istringstream head(line);
    std::string tag, name;
    std::size_t rows = 0, cols = 0;
    if (!(head >> tag >> name >> rows >> cols) || tag != "param")
      throw Error(Errc::bad_format, "expected a parameter header, got '" + line + "'");
    if (name != p->name || rows != p->value.rows() || cols != p->value.cols())
      throw Error(Errc::checkpoint_mismatch, "expected " + p->name + " " + p->value.shape_string() + ", found " +
                                                 name + " (" + std::to_string(rows) + ", " + std::to_string(cols) +
                                                 ")");
    std::vector<double> values;
    values.reserve(rows * cols);
    for (std::size_t r = 0; r < rows; ++r) {
      if (!std::getline(in, line)) throw Error(Errc::bad_format, "truncated values for " + name);
      std::istringstream row(line);
      std::string tok;
      std::size_t count = 0;
      while (row >> tok) {
        values.push_back(parse_hex_double(tok));
        ++count;
      }
      if (count != cols) throw Error(Errc::bad_format, "row " + std::to_string(r) + " of " + name + " has " +
                                                           std::to_string(count) + " values");
    }
    p->value = Tensor(rows, cols, std::move(values));
    p->grad = Tensor(rows, cols);
  }
}

}  // namespace treelstm
