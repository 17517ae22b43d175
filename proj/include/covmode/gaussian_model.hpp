#pragma once
#include <cstdint>
#include <utility>
#include <vector>

#include "covmode/matrix.hpp"
#include "covmode/rng.hpp"

namespace covmode {

// Conjugate matrix-normal / inverse-Wishart working model for one continuous
// data block. Conventions throughout: Y is n x p with an explicit observation
// mask (1 = observed), X is n x k and fully observed, coefficients B are
// k x p. The coefficient prior is stored as a precision matrix V0_inv since
// every posterior formula consumes the precision, never V0 itself.

struct PriorSpec {
  double nu0 = 0.0;  // inverse-Wishart degrees of freedom; must exceed p+1
  Matrix S0;         // p x p scale
  Matrix B0;         // k x p coefficient prior mean
  Matrix V0_inv;     // k x k coefficient prior precision

  // nu0 = p+2, S0 = s0_scale * I, B0 = 0, V0_inv = alpha * I. Pass an
  // explicit nu0 > p+1 to override the default degrees of freedom.
  static PriorSpec ridge_default(std::size_t k, std::size_t p, double alpha,
                                 double s0_scale = 0.01, double nu0 = 0.0);

  void validate(std::size_t k, std::size_t p) const;
};

struct PosteriorSummary {
  Matrix Vn;  // k x k
  Matrix Bn;  // k x p
  Matrix Sn;  // p x p
  double nun = 0.0;
};

struct MaskedBlock {
  Matrix Y;                     // n x p; unobserved cells may hold NaN
  std::vector<std::uint8_t> R;  // n x p row-major, 1 = observed
  Matrix X;                     // n x k design

  bool observed(std::size_t i, std::size_t j) const { return R[i * Y.n_cols + j] != 0; }
  std::size_t n_missing() const;
  // shape agreement, every column has >= 1 observed cell, X full column rank
  void validate() const;
};

// Counters for the numerical first-aid applied while a chain runs: extra
// ridge added to make a conditional factorization go through, and covariance
// outputs that had to be pushed back onto the SPD cone.
struct StabilizationLog {
  std::size_t jitter_retries = 0;
  std::size_t spd_projections = 0;
};

PosteriorSummary complete_data_posterior(const Matrix& Y_complete, const Matrix& X,
                                         const PriorSpec& prior);

// Conditional law of the mis_idx coordinates given y_obs on obs_idx, for one
// row with mean mu_row and covariance Sigma. Throws IllConditioned when the
// observed-block factorization fails; jitter policy belongs to the caller.
void conditional_gaussian(const Vector& mu_row, const Matrix& Sigma, const Vector& y_obs,
                          const std::vector<std::size_t>& obs_idx,
                          const std::vector<std::size_t>& mis_idx, Vector& mean_out,
                          Matrix& cov_out);

Matrix iw_mode(double nu, const Matrix& S);  // S / (nu + p + 1), requires nu > p+1

// Bartlett construction: lower-triangular A with chi-square diagonal, then
// Sigma = Ls A^{-T} A^{-1} Ls^T for S = Ls Ls^T.
Matrix draw_inverse_wishart(Rng& rng, double nu, const Matrix& S);

Matrix draw_matrix_normal(Rng& rng, const Matrix& Bn, const Matrix& Vn, const Matrix& Sigma);
// deterministic body of the draw, exposed so tests can force Z
Matrix matrix_normal_from_z(const Matrix& Bn, const Matrix& Vn, const Matrix& Sigma,
                            const Matrix& Z);

// Scale and degrees of freedom of the covariance law given fixed coefficients:
// nu_c = nu0 + n + k, S_c = S0 + (Y-XB)'(Y-XB) + (B-B0)'V0_inv(B-B0).
std::pair<double, Matrix> conditional_sigma_scale(const Matrix& B, const Matrix& Y_complete,
                                                  const Matrix& X, const PriorSpec& prior);

// Row-joint conditional fill (rng == nullptr) or draw (rng set) of all
// missing cells of Y in place, with mu = the n x p matrix of row means.
// Rows are grouped by missingness pattern so each pattern pays for one
// factorization; a failed factorization is retried with escalating ridge
// (three retries) before IllConditioned escapes.
void impute_rows(Matrix& Y, const std::vector<std::uint8_t>& R, const Matrix& mu,
                 const Matrix& Sigma, double eps_jitter, Rng* rng,
                 StabilizationLog* stab = nullptr);

// Single-site column scan: each missing cell conditions on all other columns'
// current values through the precision matrix of Sigma + delta*I. Columns are
// visited in order and later columns see earlier updates.
void impute_scan(Matrix& Y, const std::vector<std::uint8_t>& R, const Matrix& mu,
                 const Matrix& Sigma, double eps_jitter, Rng* rng,
                 StabilizationLog* stab = nullptr);

}  // namespace covmode
