#include "covmode/eb_covariance.hpp"

#include <algorithm>
#include <cmath>

#include "covmode/errors.hpp"
#include "covmode/linalg.hpp"
#include "covmode/log.hpp"

namespace covmode {

double gauss_2f1_truncated(double a, double b, double c, double x, int terms) {
  if (terms < 1) throw ValidationError("gauss_2f1_truncated: needs at least one term");
  if (!(std::abs(x) <= 1.0)) throw ValidationError("gauss_2f1_truncated: |x| must be <= 1");
  double s = 0.0, t = 1.0;
  for (int m = 0; m < terms; ++m) {
    s += t;
    const double denom = (c + m) * (1.0 + m);
    if (denom == 0.0)
      throw ValidationError("gauss_2f1_truncated: Pochhammer denominator hit zero");
    t *= (a + m) * (b + m) / denom * x;
  }
  return s;
}

namespace {

// try-Cholesky guard for the two fit outputs; projection is an estimator
// repair for roundoff, so it is logged and flagged, never silent
bool ensure_spd(Matrix& m, const char* what) {
  try {
    cholesky(m);
    return false;
  } catch (const NotPositiveDefinite&) {
    bool moved = false;
    m = nearest_spd(m, &moved);
    logf(LogLevel::Warn, "eb fit: %s required an SPD projection", what);
    return true;
  }
}

}  // namespace

EbFit eb_covariance_fit_cov(const Matrix& C, double n, int terms, const Matrix* pair_counts) {
  const std::size_t p = C.n_rows;
  if (p < 2) throw ValidationError("eb fit: needs at least two columns");
  if (!(n >= 4.0)) throw ValidationError("eb fit: too few rows (needs n >= 4)");

  Vector sd(p);
  for (std::size_t j = 0; j < p; ++j) {
    const double v = C(j, j);
    if (!(v > 0.0)) throw ValidationError("eb fit: column with non-positive variance");
    sd[j] = std::sqrt(v);
  }

  // corrected correlations pair by pair; the upper triangle drives everything
  const std::size_t n_pairs = p * (p - 1) / 2;
  Vector al(n_pairs), be(n_pairs);
  std::size_t idx = 0;
  double al_sum = 0.0;
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i + 1; j < p; ++j, ++idx) {
      double r = C(i, j) / (sd[i] * sd[j]);
      r = std::clamp(r, -0.9999999, 0.9999999);
      const double x = 1.0 - r * r;
      const double ne = pair_counts ? std::max((*pair_counts)(i, j), 4.0) : n;
      al[idx] = r * gauss_2f1_truncated(0.5, 0.5, (ne - 1.0) / 2.0, x, terms);
      be[idx] = 1.0 - ((ne - 2.0) * x / (ne - 1.0)) *
                          gauss_2f1_truncated(1.0, 1.0, (ne + 1.0) / 2.0, x, terms);
      al_sum += al[idx];
    }
  }

  EbFit fit;
  const double pair_count = static_cast<double>(p) * static_cast<double>(p - 1);
  fit.rho_bar = std::clamp(2.0 * al_sum / pair_count, -0.999, 0.999);

  double k2_sum = 0.0;
  for (std::size_t q = 0; q < n_pairs; ++q)
    k2_sum += be[q] - 2.0 * al[q] * fit.rho_bar + fit.rho_bar * fit.rho_bar;
  const double one_m = 1.0 - fit.rho_bar * fit.rho_bar;
  const double k2 = 2.0 * k2_sum / (pair_count * one_m * one_m);

  // k2 <= 0 means the corrected correlations sit tighter around the pool than
  // their own sampling noise allows — the strongest possible vote for the
  // target, so the intensity caps high instead of collapsing to the floor.
  if (k2 <= 0.0) {
    fit.lambda_eb = 1e6;
    fit.lambda_clamped = true;
    logf(LogLevel::Debug, "eb fit: dispersion below sampling noise, intensity capped at 1e6");
  } else {
    fit.lambda_eb = 1.0 / k2 - 3.0;
    if (fit.lambda_eb <= 0.0) {
      fit.lambda_eb = 1e-6;
      fit.lambda_clamped = true;
      logf(LogLevel::Debug, "eb fit: non-positive intensity clamped to 1e-6");
    }
  }

  fit.Z = Matrix(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    fit.Z(i, i) = C(i, i);
    for (std::size_t j = i + 1; j < p; ++j) fit.Z(i, j) = fit.Z(j, i) = fit.rho_bar * sd[i] * sd[j];
  }

  Matrix num = fit.Z;
  scale_inplace(num, fit.lambda_eb);
  add_inplace(num, C, n - 1.0);  // scatter = (n-1) * C

  fit.Sigma_mode = num;
  scale_inplace(fit.Sigma_mode, 1.0 / (fit.lambda_eb + n + 2.0 * static_cast<double>(p) + 2.0));
  fit.Sigma_mean = num;
  scale_inplace(fit.Sigma_mean, 1.0 / (fit.lambda_eb + n));

  const bool proj_mode = ensure_spd(fit.Sigma_mode, "mode");
  const bool proj_mean = ensure_spd(fit.Sigma_mean, "mean");
  fit.spd_projected = proj_mode || proj_mean;
  return fit;
}

EbFit eb_covariance_fit(const Matrix& W, int terms) {
  const std::size_t n = W.n_rows, p = W.n_cols;
  if (n < 4) throw ValidationError("eb fit: too few rows (needs n >= 4)");
  Matrix wc = W;
  for (std::size_t j = 0; j < p; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += wc(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) wc(i, j) -= mean;
  }
  Matrix c = crossprod(wc);
  scale_inplace(c, 1.0 / static_cast<double>(n - 1));
  return eb_covariance_fit_cov(c, static_cast<double>(n), terms);
}

std::pair<Matrix, Matrix> pairwise_complete_cov(const Matrix& E,
                                                const std::vector<std::uint8_t>& R) {
  const std::size_t n = E.n_rows, p = E.n_cols;
  Vector mu(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    double s = 0.0;
    std::size_t c = 0;
    for (std::size_t i = 0; i < n; ++i)
      if (R[i * p + j]) {
        s += E(i, j);
        ++c;
      }
    if (c == 0) throw ValidationError("pairwise covariance: column with no observed cells");
    mu[j] = s / static_cast<double>(c);
  }

  Matrix cov(p, p), counts(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    for (std::size_t j = i; j < p; ++j) {
      double s = 0.0;
      std::size_t nij = 0;
      for (std::size_t r = 0; r < n; ++r) {
        if (R[r * p + i] && R[r * p + j]) {
          s += (E(r, i) - mu[i]) * (E(r, j) - mu[j]);
          ++nij;
        }
      }
      counts(i, j) = counts(j, i) = static_cast<double>(nij);
      if (nij >= 3) cov(i, j) = cov(j, i) = s / static_cast<double>(nij - 1);
    }
  }
  return {std::move(cov), std::move(counts)};
}

Matrix conjugate_mode_update(const Matrix& B, const Matrix& Y_star, const Matrix& X,
                             const PriorSpec& prior) {
  auto [nu_c, s_c] = conditional_sigma_scale(B, Y_star, X, prior);
  return iw_mode(nu_c, s_c);
}

}  // namespace covmode
