#include "covmode/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include "covmode/errors.hpp"
#include "covmode/simd.hpp"

namespace covmode {

Matrix transpose(const Matrix& a) {
  Matrix t(a.n_cols, a.n_rows);
  for (std::size_t i = 0; i < a.n_rows; ++i)
    for (std::size_t j = 0; j < a.n_cols; ++j) t(j, i) = a(i, j);
  return t;
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.n_cols != b.n_rows) throw ValidationError("matmul: inner dimensions disagree");
  // Row-major inner products want B transposed once up front.
  Matrix bt = transpose(b);
  Matrix c(a.n_rows, b.n_cols);
  for (std::size_t i = 0; i < a.n_rows; ++i) {
    const double* ai = a.row(i);
    double* ci = c.row(i);
    for (std::size_t j = 0; j < b.n_cols; ++j) ci[j] = simd::dot(ai, bt.row(j), a.n_cols);
  }
  return c;
}

Matrix crossprod(const Matrix& a) {
  Matrix at = transpose(a);
  Matrix c(a.n_cols, a.n_cols);
  for (std::size_t i = 0; i < a.n_cols; ++i) {
    for (std::size_t j = i; j < a.n_cols; ++j) {
      double v = simd::dot(at.row(i), at.row(j), a.n_rows);
      c(i, j) = v;
      c(j, i) = v;
    }
  }
  return c;
}

Matrix matmul_tn(const Matrix& a, const Matrix& b) {
  if (a.n_rows != b.n_rows) throw ValidationError("matmul_tn: row counts disagree");
  Matrix at = transpose(a);
  Matrix bt = transpose(b);
  Matrix c(a.n_cols, b.n_cols);
  for (std::size_t i = 0; i < a.n_cols; ++i)
    for (std::size_t j = 0; j < b.n_cols; ++j) c(i, j) = simd::dot(at.row(i), bt.row(j), a.n_rows);
  return c;
}

void add_inplace(Matrix& a, const Matrix& b, double w) {
  simd::axpy(w, b.data.data(), a.data.data(), a.data.size());
}

void scale_inplace(Matrix& a, double s) {
  for (double& v : a.data) v *= s;
}

void symmetrize(Matrix& a) {
  for (std::size_t i = 0; i < a.n_rows; ++i)
    for (std::size_t j = i + 1; j < a.n_cols; ++j) {
      double v = 0.5 * (a(i, j) + a(j, i));
      a(i, j) = v;
      a(j, i) = v;
    }
}

double trace(const Matrix& a) {
  double t = 0.0;
  for (std::size_t i = 0; i < a.n_rows; ++i) t += a(i, i);
  return t;
}

double frobenius_norm(const Matrix& a) {
  double s = simd::dot(a.data.data(), a.data.data(), a.data.size());
  return std::sqrt(s);
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i) m = std::max(m, std::fabs(a.data[i] - b.data[i]));
  return m;
}

CholeskyFactor cholesky(const Matrix& a) {
  if (a.n_rows != a.n_cols) throw ValidationError("cholesky: matrix not square");
  const std::size_t p = a.n_rows;
  Matrix l(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    double d = a(j, j) - simd::dot(l.row(j), l.row(j), j);
    if (!(d > 0.0)) throw NotPositiveDefinite(static_cast<int>(j), d);
    double lj = std::sqrt(d);
    l(j, j) = lj;
    for (std::size_t i = j + 1; i < p; ++i)
      l(i, j) = (a(i, j) - simd::dot(l.row(i), l.row(j), j)) / lj;
  }
  return CholeskyFactor{std::move(l)};
}

Vector solve_lower(const Matrix& l, const Vector& b) {
  const std::size_t p = l.n_rows;
  Vector y(b);
  for (std::size_t i = 0; i < p; ++i) {
    double v = y[i] - simd::dot(l.row(i), y.data(), i);
    y[i] = v / l(i, i);
  }
  return y;
}

Vector solve_lower_transposed(const Matrix& l, const Vector& b) {
  const std::size_t p = l.n_rows;
  Vector y(b);
  for (std::size_t i = p; i-- > 0;) {
    double v = y[i];
    for (std::size_t kk = i + 1; kk < p; ++kk) v -= l(kk, i) * y[kk];
    y[i] = v / l(i, i);
  }
  return y;
}

Matrix solve_lower_mat(const Matrix& l, const Matrix& b) {
  Matrix y(b);
  const std::size_t p = l.n_rows, m = b.n_cols;
  for (std::size_t i = 0; i < p; ++i) {
    const double* li = l.row(i);
    double* yi = y.row(i);
    for (std::size_t kk = 0; kk < i; ++kk) simd::axpy(-li[kk], y.row(kk), yi, m);
    double inv = 1.0 / l(i, i);
    for (std::size_t j = 0; j < m; ++j) yi[j] *= inv;
  }
  return y;
}

Matrix chol_solve(const CholeskyFactor& f, const Matrix& b) {
  // A Y = B with A = LLᵀ: forward then backward sweep, matrix right-hand side.
  Matrix y = solve_lower_mat(f.lower, b);
  const Matrix& l = f.lower;
  const std::size_t p = l.n_rows, m = b.n_cols;
  for (std::size_t i = p; i-- > 0;) {
    double* yi = y.row(i);
    for (std::size_t kk = i + 1; kk < p; ++kk) simd::axpy(-l(kk, i), y.row(kk), yi, m);
    double inv = 1.0 / l(i, i);
    for (std::size_t j = 0; j < m; ++j) yi[j] *= inv;
  }
  return y;
}

Vector chol_solve_vec(const CholeskyFactor& f, const Vector& b) {
  return solve_lower_transposed(f.lower, solve_lower(f.lower, b));
}

double chol_logdet(const CholeskyFactor& f) {
  double s = 0.0;
  for (std::size_t i = 0; i < f.lower.n_rows; ++i) s += std::log(f.lower(i, i));
  return 2.0 * s;
}

Matrix spd_inverse(const Matrix& a) {
  CholeskyFactor f = cholesky(a);
  Matrix m = solve_lower_mat(f.lower, Matrix::identity(a.n_rows));  // M = L⁻¹
  Matrix inv = matmul_tn(m, m);                                     // MᵀM = A⁻¹
  symmetrize(inv);
  return inv;
}

EigenSym jacobi_eigh(const Matrix& a) {
  if (a.n_rows != a.n_cols) throw ValidationError("jacobi_eigh: matrix not square");
  const std::size_t p = a.n_rows;
  Matrix d(a);
  Matrix v = Matrix::identity(p);
  // Cyclic-by-row Jacobi. Quadratic convergence kicks in after the first
  // couple of sweeps; 60 sweeps is far beyond what p ≤ a few hundred needs.
  for (int sweep = 0; sweep < 60; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < p; ++i)
      for (std::size_t j = i + 1; j < p; ++j) off += d(i, j) * d(i, j);
    if (off < 1e-26 * (1.0 + frobenius_norm(d))) break;
    for (std::size_t i = 0; i + 1 < p; ++i) {
      for (std::size_t j = i + 1; j < p; ++j) {
        double apq = d(i, j);
        if (apq == 0.0) continue;
        double app = d(i, i), aqq = d(j, j);
        double theta = 0.5 * (aqq - app) / apq;
        double t = (theta >= 0.0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(1.0 + theta * theta));
        double c = 1.0 / std::sqrt(1.0 + t * t);
        double s = t * c;
        for (std::size_t kk = 0; kk < p; ++kk) {
          double dik = d(i, kk), djk = d(j, kk);
          d(i, kk) = c * dik - s * djk;
          d(j, kk) = s * dik + c * djk;
        }
        for (std::size_t kk = 0; kk < p; ++kk) {
          double dki = d(kk, i), dkj = d(kk, j);
          d(kk, i) = c * dki - s * dkj;
          d(kk, j) = s * dki + c * dkj;
        }
        for (std::size_t kk = 0; kk < p; ++kk) {
          double vki = v(kk, i), vkj = v(kk, j);
          v(kk, i) = c * vki - s * vkj;
          v(kk, j) = s * vki + c * vkj;
        }
      }
    }
  }
  EigenSym out;
  out.values.resize(p);
  for (std::size_t i = 0; i < p; ++i) out.values[i] = d(i, i);
  // sort ascending, carrying eigenvector columns along
  std::vector<std::size_t> order(p);
  for (std::size_t i = 0; i < p; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return out.values[x] < out.values[y]; });
  EigenSym sorted;
  sorted.values.resize(p);
  sorted.vectors = Matrix(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    sorted.values[j] = out.values[order[j]];
    for (std::size_t i = 0; i < p; ++i) sorted.vectors(i, j) = v(i, order[j]);
  }
  return sorted;
}

Matrix jitter(const Matrix& a, double eps) {
  double t = trace(a);
  if (!(t > 0.0)) throw ValidationError("jitter: non-positive trace");
  double delta = eps * t / static_cast<double>(a.n_rows);
  Matrix out(a);
  for (std::size_t i = 0; i < a.n_rows; ++i) out(i, i) += delta;
  return out;
}

Matrix shrink_covariance(const Matrix& s, double gamma) {
  if (!(gamma >= 0.0 && gamma <= 1.0)) throw ValidationError("shrink_covariance: gamma outside [0,1]");
  double target = gamma * trace(s) / static_cast<double>(s.n_rows);
  Matrix out(s);
  scale_inplace(out, 1.0 - gamma);
  for (std::size_t i = 0; i < s.n_rows; ++i) out(i, i) += target;
  return out;
}

Matrix ridge_covariance(const Matrix& s, double tau) {
  if (!(tau > 0.0)) throw ValidationError("ridge_covariance: tau must be positive");
  Matrix out(s);
  for (std::size_t i = 0; i < s.n_rows; ++i) out(i, i) += tau;
  return out;
}

Matrix nearest_spd(const Matrix& a, bool* projected) {
  EigenSym eig = jacobi_eigh(a);
  const std::size_t p = a.n_rows;
  double lmax = eig.values.empty() ? 0.0 : eig.values.back();
  double floor_val = std::max(1e-8, 1e-8 * lmax);
  bool changed = false;
  for (double& lv : eig.values) {
    if (lv < floor_val) {
      lv = floor_val;
      changed = true;
    }
  }
  if (projected) *projected = changed;
  if (!changed) return a;
  // V diag(λ) Vᵀ
  Matrix vl(p, p);
  for (std::size_t i = 0; i < p; ++i)
    for (std::size_t j = 0; j < p; ++j) vl(i, j) = eig.vectors(i, j) * eig.values[j];
  Matrix out = matmul(vl, transpose(eig.vectors));
  symmetrize(out);
  return out;
}

Matrix ridge_fit(const Matrix& x, const Matrix& y, double alpha) {
  Matrix xtx = crossprod(x);
  for (std::size_t i = 0; i < xtx.n_rows; ++i) xtx(i, i) += alpha;
  CholeskyFactor f = cholesky(xtx);
  return chol_solve(f, matmul_tn(x, y));
}

}  // namespace covmode
