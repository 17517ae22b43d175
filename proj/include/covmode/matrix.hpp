#pragma once
#include <cstddef>
#include <vector>

namespace covmode {

// Dense row-major matrix. Everything in this codebase is small (p up to a
// few hundred), so one contiguous buffer with plain indexing is all we need.
struct Matrix {
  std::size_t n_rows = 0;
  std::size_t n_cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0) : n_rows(r), n_cols(c), data(r * c, fill) {}

  double& operator()(std::size_t i, std::size_t j) { return data[i * n_cols + j]; }
  double operator()(std::size_t i, std::size_t j) const { return data[i * n_cols + j]; }
  double* row(std::size_t i) { return data.data() + i * n_cols; }
  const double* row(std::size_t i) const { return data.data() + i * n_cols; }

  bool same_shape(const Matrix& o) const { return n_rows == o.n_rows && n_cols == o.n_cols; }

  static Matrix identity(std::size_t p) {
    Matrix m(p, p);
    for (std::size_t i = 0; i < p; ++i) m(i, i) = 1.0;
    return m;
  }
  static Matrix diagonal(const std::vector<double>& d) {
    Matrix m(d.size(), d.size());
    for (std::size_t i = 0; i < d.size(); ++i) m(i, i) = d[i];
    return m;
  }
};

// A symmetric positive-definite matrix is an ordinary Matrix whose contract
// (symmetry, successful Cholesky) is enforced by the functions that build it.
using SpdMatrix = Matrix;

using Vector = std::vector<double>;

}  // namespace covmode
