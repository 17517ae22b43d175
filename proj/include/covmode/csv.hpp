#pragma once
#include <string>
#include <vector>

#include "covmode/matrix.hpp"

namespace covmode {

// CSV is the one interchange format: header row, one record per line,
// empty field = missing value. Numbers are written with enough digits to
// round-trip exactly, which is what makes byte-comparing outputs meaningful.
struct CsvTable {
  std::vector<std::string> header;
  Matrix values;                 // missing cells hold NaN
  std::vector<std::uint8_t> observed;  // 1 = value present, row-major

  bool is_observed(std::size_t i, std::size_t j) const { return observed[i * values.n_cols + j] != 0; }
};

CsvTable read_csv(const std::string& path);
void write_csv(const std::string& path, const std::vector<std::string>& header, const Matrix& values,
               const std::vector<std::uint8_t>* observed = nullptr);

std::string format_double(double v);  // shortest round-trip decimal form

}  // namespace covmode
