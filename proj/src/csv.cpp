#include "covmode/csv.hpp"

#include <cerrno>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <limits>
#include <sstream>

#include "covmode/errors.hpp"

namespace covmode {

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

bool is_blank(const std::string& s) {
  for (char c : s)
    if (c != ' ' && c != '\t') return false;
  return true;
}

}  // namespace

std::string format_double(double v) {
  // std::to_chars with no precision argument emits the shortest decimal
  // string that parses back to exactly the same double.
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

CsvTable read_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open for reading: " + path);

  std::string line;
  if (!std::getline(in, line)) throw IoError("empty file: " + path);
  CsvTable t;
  t.header = split_line(line);
  const std::size_t p = t.header.size();
  if (p == 0) throw IoError("no columns in header: " + path);

  std::vector<double> data;
  std::vector<std::uint8_t> obs;
  std::size_t n = 0;
  while (std::getline(in, line)) {
    if (line.empty() && in.eof()) break;  // tolerate trailing newline
    auto fields = split_line(line);
    if (fields.size() != p) {
      std::ostringstream msg;
      msg << path << " line " << (n + 2) << ": expected " << p << " fields, got " << fields.size();
      throw IoError(msg.str());
    }
    for (const auto& f : fields) {
      if (is_blank(f)) {
        data.push_back(std::numeric_limits<double>::quiet_NaN());
        obs.push_back(0);
        continue;
      }
      errno = 0;
      char* end = nullptr;
      double v = std::strtod(f.c_str(), &end);
      if (end == f.c_str() || errno == ERANGE) {
        std::ostringstream msg;
        msg << path << " line " << (n + 2) << ": cannot parse field '" << f << "'";
        throw IoError(msg.str());
      }
      data.push_back(v);
      obs.push_back(1);
    }
    ++n;
  }

  t.values = Matrix(n, p);
  t.values.data = std::move(data);
  t.observed = std::move(obs);
  return t;
}

void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
               const std::vector<std::uint8_t>* observed) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  for (std::size_t j = 0; j < header.size(); ++j) {
    if (j) out << ',';
    out << header[j];
  }
  out << '\n';
  for (std::size_t i = 0; i < values.n_rows; ++i) {
    for (std::size_t j = 0; j < values.n_cols; ++j) {
      if (j) out << ',';
      const bool present = observed == nullptr || (*observed)[i * values.n_cols + j] != 0;
      if (present && !std::isnan(values(i, j))) out << format_double(values(i, j));
    }
    out << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace covmode
