#include "stratostab/matrix_io.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

namespace stratostab {

namespace {

double parse_number(const std::string& token, const std::string& origin) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(token, &pos);
  } catch (const std::exception&) {
    throw ConfigError(origin + ": non-numeric token '" + token + "'");
  }
  if (pos != token.size())
    throw ConfigError(origin + ": non-numeric token '" + token + "'");
  return v;
}

std::string format_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

}  // namespace

Matrix read_matrix(std::istream& in, const std::string& origin) {
  long rows = 0, cols = 0;
  std::string kind;
  if (!(in >> rows >> cols >> kind) || rows <= 0 || cols <= 0 ||
      (kind != "real" && kind != "complex"))
    throw ConfigError(origin + ": malformed matrix header (want 'rows cols real|complex')");

  const bool complex_entries = (kind == "complex");
  const long expected = rows * cols * (complex_entries ? 2 : 1);
  Matrix a(rows, cols);
  std::string token;
  long count = 0;
  std::vector<double> values;
  values.reserve(expected);
  while (count < expected && (in >> token)) {
    values.push_back(parse_number(token, origin));
    ++count;
  }
  if (count < expected) {
    std::ostringstream msg;
    msg << origin << ": entry count mismatch (expected " << expected << " numbers, found "
        << count << ")";
    throw ConfigError(msg.str());
  }
  if (in >> token) {
    std::ostringstream msg;
    msg << origin << ": entry count mismatch (expected " << expected
        << " numbers, found extra token '" << token << "')";
    throw ConfigError(msg.str());
  }

  long v = 0;
  for (long i = 0; i < rows; ++i)
    for (long j = 0; j < cols; ++j) {
      if (complex_entries) {
        a(i, j) = Complex(values[v], values[v + 1]);
        v += 2;
      } else {
        a(i, j) = Complex(values[v], 0.0);
        v += 1;
      }
    }
  return a;
}

Matrix read_matrix_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open matrix file '" + path + "'");
  return read_matrix(in, path);
}

void write_matrix(std::ostream& out, const Matrix& a) {
  const bool complex_entries = !is_real_matrix(a);
  out << a.rows() << ' ' << a.cols() << ' ' << (complex_entries ? "complex" : "real") << '\n';
  for (Index i = 0; i < a.rows(); ++i) {
    for (Index j = 0; j < a.cols(); ++j) {
      if (j) out << ' ';
      out << format_double(a(i, j).real());
      if (complex_entries) out << ' ' << format_double(a(i, j).imag());
    }
    out << '\n';
  }
}

void write_matrix_file(const std::string& path, const Matrix& a) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open '" + path + "' for writing");
  write_matrix(out, a);
  if (!out) throw ConfigError("failed while writing '" + path + "'");
}

}  // namespace stratostab
