#pragma once
#include <utility>
#include <vector>

#include "covmode/gaussian_model.hpp"
#include "covmode/matrix.hpp"

namespace covmode {

// Empirical-Bayes covariance estimate built around a common-correlation
// target: the diagonal keeps the per-column variances, every off-diagonal
// entry is a single bias-corrected pooled correlation, and the shrinkage
// intensity comes from the dispersion of the corrected pairwise correlations
// around that pool.
struct EbFit {
  Matrix Z;               // structured target, Z_ii = C_ii, Z_ij = rho_bar*sd_i*sd_j
  double rho_bar = 0.0;   // pooled corrected correlation, clamped to (-0.999, 0.999)
  double lambda_eb = 0.0; // shrinkage intensity
  Matrix Sigma_mode;      // (lambda*Z + scatter) / (lambda + n + 2p + 2)
  Matrix Sigma_mean;      // (lambda*Z + scatter) / (lambda + n)
  bool spd_projected = false;   // an output needed an eigenvalue-floor projection
  bool lambda_clamped = false;  // intensity hit a cap or the positivity floor
};

// Truncated Gauss hypergeometric series 2F1(a,b;c;x), |x| <= 1, summed with
// Pochhammer recurrences over `terms` terms.
double gauss_2f1_truncated(double a, double b, double c, double x, int terms);

// Fit from a residual block W (n x p): columns are centered, the covariance
// uses the n-1 divisor, and the numerator of both outputs carries the scatter
// matrix (n-1)*C so the intensity lambda competes with n on equal scale.
EbFit eb_covariance_fit(const Matrix& W, int terms = 25);

// Fit from a precomputed p x p covariance estimate. `n` is the nominal row
// count behind it; `pair_counts`, when given, supplies the effective sample
// size behind each pairwise correlation (floored at 4) so the finite-sample
// corrections track pairwise-complete estimates instead of assuming n rows
// everywhere.
EbFit eb_covariance_fit_cov(const Matrix& C, double n, int terms = 25,
                            const Matrix* pair_counts = nullptr);

// Pairwise-complete covariance of the observed cells of E (mask R, 1 =
// observed), centered with per-column observed means. Entries with fewer
// than 3 overlapping rows stay zero. Returns the covariance and the matrix
// of overlap counts.
std::pair<Matrix, Matrix> pairwise_complete_cov(const Matrix& E,
                                                const std::vector<std::uint8_t>& R);

// Deterministic covariance update given fixed coefficients: the mode of the
// conditional inverse-Wishart law, (S0 + RSS(B)) / (nu0 + n + k + p + 1).
Matrix conjugate_mode_update(const Matrix& B, const Matrix& Y_star, const Matrix& X,
                             const PriorSpec& prior);

}  // namespace covmode
