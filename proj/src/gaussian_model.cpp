#include "covmode/gaussian_model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <map>

#include "covmode/errors.hpp"
#include "covmode/linalg.hpp"
#include "covmode/log.hpp"
#include "covmode/simd.hpp"

namespace covmode {

namespace {

Matrix gather(const Matrix& s, const std::vector<std::size_t>& rows,
              const std::vector<std::size_t>& cols) {
  Matrix out(rows.size(), cols.size());
  for (std::size_t a = 0; a < rows.size(); ++a)
    for (std::size_t b = 0; b < cols.size(); ++b) out(a, b) = s(rows[a], cols[b]);
  return out;
}

Matrix add_scaled_identity(const Matrix& a, double d) {
  Matrix out = a;
  for (std::size_t i = 0; i < out.n_rows; ++i) out(i, i) += d;
  return out;
}

}  // namespace

PriorSpec PriorSpec::ridge_default(std::size_t k, std::size_t p, double alpha, double s0_scale,
                                   double nu0) {
  if (!(alpha > 0.0)) throw ValidationError("prior: ridge penalty alpha must be positive");
  PriorSpec pr;
  pr.nu0 = nu0 > 0.0 ? nu0 : static_cast<double>(p) + 2.0;
  pr.S0 = Matrix(p, p);
  for (std::size_t i = 0; i < p; ++i) pr.S0(i, i) = s0_scale;
  pr.B0 = Matrix(k, p);
  pr.V0_inv = Matrix(k, k);
  for (std::size_t i = 0; i < k; ++i) pr.V0_inv(i, i) = alpha;
  pr.validate(k, p);
  return pr;
}

void PriorSpec::validate(std::size_t k, std::size_t p) const {
  if (S0.n_rows != p || S0.n_cols != p) throw ValidationError("prior: S0 shape mismatch");
  if (B0.n_rows != k || B0.n_cols != p) throw ValidationError("prior: B0 shape mismatch");
  if (V0_inv.n_rows != k || V0_inv.n_cols != k)
    throw ValidationError("prior: V0_inv shape mismatch");
  if (!(nu0 > static_cast<double>(p) + 1.0))
    throw ValidationError("prior: nu0 must exceed p + 1 so the covariance mode exists");
  try {
    cholesky(S0);
    cholesky(V0_inv);
  } catch (const NotPositiveDefinite&) {
    throw ValidationError("prior: S0 and V0_inv must be positive definite");
  }
}

std::size_t MaskedBlock::n_missing() const {
  std::size_t c = 0;
  for (auto v : R)
    if (!v) ++c;
  return c;
}

void MaskedBlock::validate() const {
  const std::size_t n = Y.n_rows, p = Y.n_cols;
  if (n == 0 || p == 0) throw ValidationError("block: empty data matrix");
  if (R.size() != n * p) throw ValidationError("block: mask shape mismatch");
  if (X.n_rows != n) throw ValidationError("block: design row count mismatch");
  if (X.n_cols == 0) throw ValidationError("block: empty design matrix");
  for (std::size_t j = 0; j < p; ++j) {
    std::size_t obs = 0;
    for (std::size_t i = 0; i < n; ++i) obs += observed(i, j) ? 1 : 0;
    if (obs == 0) throw ValidationError("block: column with no observed cells");
  }
  for (double v : X.data)
    if (!std::isfinite(v)) throw ValidationError("block: design matrix has non-finite entries");
  try {
    cholesky(crossprod(X));
  } catch (const NotPositiveDefinite&) {
    throw SingularDesign("block: design matrix is not full column rank");
  }
}

PosteriorSummary complete_data_posterior(const Matrix& Y_complete, const Matrix& X,
                                         const PriorSpec& prior) {
  const std::size_t n = Y_complete.n_rows, p = Y_complete.n_cols, k = X.n_cols;
  if (n == 0) throw ValidationError("complete_data_posterior: needs at least one row");
  if (X.n_rows != n) throw ValidationError("complete_data_posterior: design row mismatch");
  prior.validate(k, p);

  Matrix A = crossprod(X);
  add_inplace(A, prior.V0_inv);
  CholeskyFactor la;
  try {
    la = cholesky(A);
  } catch (const NotPositiveDefinite&) {
    throw SingularDesign("complete_data_posterior: X'X + V0_inv is singular");
  }

  Matrix rhs = matmul_tn(X, Y_complete);
  add_inplace(rhs, matmul(prior.V0_inv, prior.B0));

  PosteriorSummary post;
  post.Bn = chol_solve(la, rhs);
  post.Vn = crossprod(solve_lower_mat(la.lower, Matrix::identity(k)));
  symmetrize(post.Vn);

  Matrix resid = Y_complete;
  add_inplace(resid, matmul(X, post.Bn), -1.0);
  Matrix D = post.Bn;
  add_inplace(D, prior.B0, -1.0);

  post.Sn = prior.S0;
  add_inplace(post.Sn, crossprod(resid));
  add_inplace(post.Sn, matmul_tn(D, matmul(prior.V0_inv, D)));
  symmetrize(post.Sn);
  post.nun = prior.nu0 + static_cast<double>(n);
  return post;
}

void conditional_gaussian(const Vector& mu_row, const Matrix& Sigma, const Vector& y_obs,
                          const std::vector<std::size_t>& obs_idx,
                          const std::vector<std::size_t>& mis_idx, Vector& mean_out,
                          Matrix& cov_out) {
  const std::size_t p = Sigma.n_rows;
  if (obs_idx.size() + mis_idx.size() != p)
    throw ValidationError("conditional_gaussian: index sets must partition the coordinates");
  if (y_obs.size() != obs_idx.size())
    throw ValidationError("conditional_gaussian: observed value count mismatch");

  mean_out.assign(mis_idx.size(), 0.0);
  if (obs_idx.empty()) {
    for (std::size_t b = 0; b < mis_idx.size(); ++b) mean_out[b] = mu_row[mis_idx[b]];
    cov_out = gather(Sigma, mis_idx, mis_idx);
    symmetrize(cov_out);
    return;
  }

  Matrix soo = gather(Sigma, obs_idx, obs_idx);
  CholeskyFactor l;
  try {
    l = cholesky(soo);
  } catch (const NotPositiveDefinite&) {
    throw IllConditioned("conditional_gaussian: observed-block covariance is not factorizable");
  }
  Matrix fm = solve_lower_mat(l.lower, gather(Sigma, obs_idx, mis_idx));

  Vector diff(obs_idx.size());
  for (std::size_t a = 0; a < obs_idx.size(); ++a) diff[a] = y_obs[a] - mu_row[obs_idx[a]];
  Vector w = solve_lower(l.lower, diff);

  for (std::size_t b = 0; b < mis_idx.size(); ++b) {
    double acc = mu_row[mis_idx[b]];
    for (std::size_t a = 0; a < obs_idx.size(); ++a) acc += fm(a, b) * w[a];
    mean_out[b] = acc;
  }
  cov_out = gather(Sigma, mis_idx, mis_idx);
  add_inplace(cov_out, crossprod(fm), -1.0);
  symmetrize(cov_out);
}

Matrix iw_mode(double nu, const Matrix& S) {
  const double p = static_cast<double>(S.n_rows);
  if (!(nu > p + 1.0))
    throw ValidationError("iw_mode: degrees of freedom too small (needs nu > p + 1)");
  Matrix out = S;
  scale_inplace(out, 1.0 / (nu + p + 1.0));
  return out;
}

Matrix draw_inverse_wishart(Rng& rng, double nu, const Matrix& S) {
  const std::size_t p = S.n_rows;
  if (!(nu > static_cast<double>(p) - 1.0))
    throw ValidationError("draw_inverse_wishart: needs nu > p - 1");
  const Matrix ls = cholesky(S).lower;

  Matrix a(p, p);
  for (std::size_t i = 0; i < p; ++i) {
    a(i, i) = std::sqrt(rng.chisquare(nu - static_cast<double>(i)));
    for (std::size_t j = 0; j < i; ++j) a(i, j) = rng.normal();
  }
  Matrix m = solve_lower_mat(a, transpose(ls));  // A M = Ls'
  Matrix out = crossprod(m);                     // Ls (A A')^{-1} Ls'
  symmetrize(out);
  return out;
}

Matrix matrix_normal_from_z(const Matrix& Bn, const Matrix& Vn, const Matrix& Sigma,
                            const Matrix& Z) {
  if (Z.n_rows != Bn.n_rows || Z.n_cols != Bn.n_cols)
    throw ValidationError("matrix_normal_from_z: Z shape mismatch");
  const Matrix lv = cholesky(Vn).lower;
  const Matrix ls = cholesky(Sigma).lower;
  Matrix out = Bn;
  add_inplace(out, matmul(matmul(lv, Z), transpose(ls)));
  return out;
}

Matrix draw_matrix_normal(Rng& rng, const Matrix& Bn, const Matrix& Vn, const Matrix& Sigma) {
  Matrix z(Bn.n_rows, Bn.n_cols);
  rng.fill_normal(z);
  return matrix_normal_from_z(Bn, Vn, Sigma, z);
}

std::pair<double, Matrix> conditional_sigma_scale(const Matrix& B, const Matrix& Y_complete,
                                                  const Matrix& X, const PriorSpec& prior) {
  const std::size_t n = Y_complete.n_rows, k = X.n_cols;
  Matrix resid = Y_complete;
  add_inplace(resid, matmul(X, B), -1.0);
  Matrix D = B;
  add_inplace(D, prior.B0, -1.0);
  Matrix sc = prior.S0;
  add_inplace(sc, crossprod(resid));
  add_inplace(sc, matmul_tn(D, matmul(prior.V0_inv, D)));
  symmetrize(sc);
  return {prior.nu0 + static_cast<double>(n + k), std::move(sc)};
}

namespace {

// One attempt ladder shared by the row-joint and scan imputers: the base
// conditioning ridge from the config, escalated x100 per retry. An eps of
// zero means "try exact first", so retries start from a tiny floor.
double ridge_for_attempt(double eps, int attempt) {
  if (attempt == 0) return eps;
  const double base = std::max(eps, 1e-10);
  double d = base;
  for (int r = 0; r < attempt; ++r) d *= 100.0;
  return d;
}

Matrix cholesky_with_retries(const Matrix& s, double rel_floor, StabilizationLog* stab,
                             const char* what) {
  const double tr = trace(s);
  const std::size_t p = s.n_rows;
  for (int attempt = 0; attempt <= 3; ++attempt) {
    const double d = ridge_for_attempt(rel_floor, attempt) * tr / static_cast<double>(p);
    try {
      Matrix c = attempt == 0 && d == 0.0 ? s : add_scaled_identity(s, d);
      Matrix l = cholesky(c).lower;
      if (attempt > 0 && stab) ++stab->jitter_retries;
      return l;
    } catch (const NotPositiveDefinite&) {
      if (attempt == 3) break;
      logf(LogLevel::Debug, "%s: factorization retry %d", what, attempt + 1);
    }
  }
  throw IllConditioned(std::string(what) + ": factorization failed after jitter retries");
}

}  // namespace

void impute_rows(Matrix& Y, const std::vector<std::uint8_t>& R, const Matrix& mu,
                 const Matrix& Sigma, double eps_jitter, Rng* rng, StabilizationLog* stab) {
  const std::size_t n = Y.n_rows, p = Y.n_cols;
  const double delta = eps_jitter > 0.0 ? eps_jitter * trace(Sigma) / static_cast<double>(p) : 0.0;
  const Matrix s = delta > 0.0 ? add_scaled_identity(Sigma, delta) : Sigma;

  // group rows by missingness pattern, keeping first-appearance order
  std::map<std::vector<std::uint8_t>, std::size_t> seen;
  std::vector<std::vector<std::size_t>> groups;
  std::vector<std::vector<std::uint8_t>> patterns;
  std::vector<std::uint8_t> key(p);
  for (std::size_t i = 0; i < n; ++i) {
    bool any_missing = false;
    for (std::size_t j = 0; j < p; ++j) {
      key[j] = R[i * p + j];
      any_missing = any_missing || !key[j];
    }
    if (!any_missing) continue;
    auto it = seen.find(key);
    if (it == seen.end()) {
      it = seen.emplace(key, groups.size()).first;
      groups.emplace_back();
      patterns.push_back(key);
    }
    groups[it->second].push_back(i);
  }

  for (std::size_t g = 0; g < groups.size(); ++g) {
    std::vector<std::size_t> obs, mis;
    for (std::size_t j = 0; j < p; ++j) (patterns[g][j] ? obs : mis).push_back(j);
    const std::size_t m = mis.size();

    Matrix l, fm, cc;
    if (!obs.empty()) {
      bool ok = false;
      for (int attempt = 0; attempt <= 3 && !ok; ++attempt) {
        const double d =
            ridge_for_attempt(eps_jitter, attempt) * trace(Sigma) / static_cast<double>(p);
        const Matrix sr = attempt == 0 ? s : add_scaled_identity(Sigma, d);
        try {
          l = cholesky(gather(sr, obs, obs)).lower;
          fm = solve_lower_mat(l, gather(sr, obs, mis));
          cc = gather(sr, mis, mis);
          if (attempt > 0 && stab) ++stab->jitter_retries;
          ok = true;
        } catch (const NotPositiveDefinite&) {
          if (attempt == 3)
            throw IllConditioned("impute_rows: observed-block factorization failed");
        }
      }
      add_inplace(cc, crossprod(fm), -1.0);
      symmetrize(cc);
    } else {
      cc = gather(s, mis, mis);
      symmetrize(cc);
    }

    Matrix lc;
    if (rng != nullptr) lc = cholesky_with_retries(cc, 1e-12, stab, "impute_rows: conditional");

    Vector diff(obs.size()), w, cm(m), z(m);
    for (std::size_t idx = 0; idx < groups[g].size(); ++idx) {
      const std::size_t i = groups[g][idx];
      if (!obs.empty()) {
        for (std::size_t a = 0; a < obs.size(); ++a) diff[a] = Y(i, obs[a]) - mu(i, obs[a]);
        w = solve_lower(l, diff);
        for (std::size_t b = 0; b < m; ++b) {
          double acc = mu(i, mis[b]);
          for (std::size_t a = 0; a < obs.size(); ++a) acc += fm(a, b) * w[a];
          cm[b] = acc;
        }
      } else {
        for (std::size_t b = 0; b < m; ++b) cm[b] = mu(i, mis[b]);
      }
      if (rng != nullptr) {
        for (std::size_t b = 0; b < m; ++b) z[b] = rng->normal();
        for (std::size_t b = 0; b < m; ++b) {
          double acc = cm[b];
          for (std::size_t a = 0; a <= b; ++a) acc += lc(b, a) * z[a];
          Y(i, mis[b]) = acc;
        }
      } else {
        for (std::size_t b = 0; b < m; ++b) Y(i, mis[b]) = cm[b];
      }
    }
  }
}

void impute_scan(Matrix& Y, const std::vector<std::uint8_t>& R, const Matrix& mu,
                 const Matrix& Sigma, double eps_jitter, Rng* rng, StabilizationLog* stab) {
  const std::size_t n = Y.n_rows, p = Y.n_cols;
  const double tr = trace(Sigma);

  Matrix prec;
  bool ok = false;
  for (int attempt = 0; attempt <= 3 && !ok; ++attempt) {
    const double d = ridge_for_attempt(eps_jitter, attempt) * tr / static_cast<double>(p);
    try {
      prec = spd_inverse(d == 0.0 ? Sigma : add_scaled_identity(Sigma, d));
      if (attempt > 0 && stab) ++stab->jitter_retries;
      ok = true;
    } catch (const NotPositiveDefinite&) {
      if (attempt == 3) throw IllConditioned("impute_scan: covariance is not factorizable");
    }
  }

  Vector w(p);
  for (std::size_t j = 0; j < p; ++j) {
    bool any = false;
    for (std::size_t i = 0; i < n && !any; ++i) any = !R[i * p + j];
    if (!any) continue;

    const double pjj = prec(j, j);
    for (std::size_t r = 0; r < p; ++r) w[r] = -prec(r, j) / pjj;
    w[j] = 0.0;
    const double sd = std::sqrt(1.0 / pjj);

    for (std::size_t i = 0; i < n; ++i) {
      if (R[i * p + j]) continue;
      double cm = mu(i, j) + simd::dot(Y.row(i), w.data(), p) - simd::dot(mu.row(i), w.data(), p);
      Y(i, j) = rng != nullptr ? cm + sd * rng->normal() : cm;
    }
  }
}

}  // namespace covmode
