#pragma once
#include <utility>

#include "covmode/matrix.hpp"

namespace covmode {

// ---- plain dense algebra -------------------------------------------------

Matrix transpose(const Matrix& a);
Matrix matmul(const Matrix& a, const Matrix& b);
Matrix crossprod(const Matrix& a);                     // aᵀa, exactly symmetric
Matrix matmul_tn(const Matrix& a, const Matrix& b);    // aᵀb
void add_inplace(Matrix& a, const Matrix& b, double w = 1.0);
void scale_inplace(Matrix& a, double s);
void symmetrize(Matrix& a);                            // a ← (a + aᵀ)/2
double trace(const Matrix& a);
double frobenius_norm(const Matrix& a);
double max_abs_diff(const Matrix& a, const Matrix& b);

// ---- factorization and solves ---------------------------------------------

struct CholeskyFactor {
  Matrix lower;  // L with L·Lᵀ = source
};

// Throws NotPositiveDefinite on a non-positive pivot; callers decide whether
// to jitter, project, or escalate (repairs are never silent).
CholeskyFactor cholesky(const Matrix& a);

Vector solve_lower(const Matrix& l, const Vector& b);         // L y = b
Vector solve_lower_transposed(const Matrix& l, const Vector& b);  // Lᵀ y = b
Matrix solve_lower_mat(const Matrix& l, const Matrix& b);     // L Y = B
Matrix chol_solve(const CholeskyFactor& f, const Matrix& b);  // A Y = B
Vector chol_solve_vec(const CholeskyFactor& f, const Vector& b);
double chol_logdet(const CholeskyFactor& f);

// Inverse of an SPD matrix computed through its Cholesky factor (solve
// L M = I, return MᵀM). This is the one sanctioned route to a precision
// matrix; no general-purpose inversion exists in this codebase.
Matrix spd_inverse(const Matrix& a);

// ---- symmetric eigensolver --------------------------------------------------

struct EigenSym {
  Vector values;   // ascending
  Matrix vectors;  // column j pairs with values[j]
};
EigenSym jacobi_eigh(const Matrix& a);  // cyclic Jacobi; a must be symmetric

// ---- stabilization operators ------------------------------------------------

// a + (eps·tr(a)/p)·I. Throws NonPositiveTrace (as ValidationError) when
// tr(a) ≤ 0.
Matrix jitter(const Matrix& a, double eps);

// (1−γ)·S + γ·(tr S/p)·I, γ ∈ [0,1]. Eigenvalues land in
// [γ·tr S/p, (1−γ)λ_max + γ·tr S/p].
Matrix shrink_covariance(const Matrix& s, double gamma);

// S + τ·I, τ > 0.
Matrix ridge_covariance(const Matrix& s, double tau);

// Eigenvalue clamping at floor max(1e−8, 1e−8·λ_max); `projected`, when
// non-null, reports whether any eigenvalue actually moved.
Matrix nearest_spd(const Matrix& a, bool* projected = nullptr);

// ---- regression helper --------------------------------------------------------

// (XᵀX + αI)⁻¹ XᵀY via Cholesky solves.
Matrix ridge_fit(const Matrix& x, const Matrix& y, double alpha);

}  // namespace covmode
