#include "covmode/mice.hpp"

#include <cassert>
#include <chrono>
#include <cmath>

#include "covmode/linalg.hpp"
#include "covmode/rng.hpp"

namespace covmode {

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// Cross-products of bootstrap-completed columns can be numerically singular
// (duplicated resamples, tiny observed counts), so retry the factorization
// with an escalating ridge before giving up.
CholeskyFactor chol_with_ridge(Matrix& a) {
  for (double bump : {1e-6, 1e-4, 1e-2}) {
    try {
      return cholesky(a);
    } catch (const NotPositiveDefinite&) {
      for (std::size_t d = 0; d < a.n_rows; ++d) a(d, d) += bump;
    }
  }
  return cholesky(a);
}

}  // namespace

void FcsConfig::validate() const {
  if (M < 2) throw ValidationError("FcsConfig: M must be >= 2");
  if (iters < 1) throw ValidationError("FcsConfig: iters must be >= 1");
}

std::vector<std::pair<std::string, double>> FcsConfig::snapshot() const {
  return {{"m", static_cast<double>(M)},
          {"iters", static_cast<double>(iters)},
          {"max_screen", static_cast<double>(max_screen)},
          {"seed", static_cast<double>(seed)}};
}

ImputationEnsemble mice_impute(const MaskedBlock& block, const FcsConfig& cfg) {
  block.validate();
  cfg.validate();
  const std::size_t n = block.Y.n_rows, p = block.Y.n_cols, k = block.X.n_cols;

  std::vector<std::vector<double>> obs_vals(p);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i)
      if (block.R[i * p + j]) obs_vals[j].push_back(block.Y(i, j));
    if (obs_vals[j].empty())
      throw AllMissingColumn("mice: column " + std::to_string(j) + " has no observed cells");
    if (obs_vals[j].size() < 2)
      throw ValidationError("mice: column " + std::to_string(j) +
                            " needs at least 2 observed cells");
  }

  // One screening pass on the observed cells: the mask never changes, so the
  // per-column predictor ranking is the same for every imputation and sweep.
  const std::vector<std::vector<std::size_t>> sel_for =
      availcase_screen(block.Y, block.R, cfg.max_screen);

  Rng rng(cfg.seed);
  ImputationEnsemble ens;
  ens.method = "mice";
  ens.mask = block.R;
  ens.config = cfg.snapshot();
  ens.draws.reserve(cfg.M);
  const auto t0 = std::chrono::steady_clock::now();

  for (std::size_t m = 0; m < cfg.M; ++m) {
    Matrix y = block.Y;
    for (std::size_t j = 0; j < p; ++j)
      for (std::size_t i = 0; i < n; ++i)
        if (!block.R[i * p + j]) y(i, j) = obs_vals[j][rng.index(obs_vals[j].size())];

    for (std::size_t it = 0; it < cfg.iters; ++it) {
      for (std::size_t j = 0; j < p; ++j) {
        const std::size_t nobs = obs_vals[j].size();
        const std::size_t qmax =
            nobs > k + 2 ? std::min(sel_for[j].size(), nobs - 2 - k) : 0;
        const std::size_t q = k + qmax;
        assert(q <= k + cfg.max_screen);

        Matrix go(nobs, q);
        Vector yo(nobs);
        Vector gy(q, 0.0);
        std::size_t r = 0;
        for (std::size_t i = 0; i < n; ++i) {
          if (!block.R[i * p + j]) continue;
          for (std::size_t c = 0; c < k; ++c) go(r, c) = block.X(i, c);
          for (std::size_t c = 0; c < qmax; ++c) go(r, k + c) = y(i, sel_for[j][c]);
          yo[r] = y(i, j);
          for (std::size_t c = 0; c < q; ++c) gy[c] += go(r, c) * yo[r];
          ++r;
        }

        Matrix a = crossprod(go);
        const CholeskyFactor la = chol_with_ridge(a);
        const Vector bh = chol_solve_vec(la, gy);

        double rss = 0.0;
        for (std::size_t i = 0; i < nobs; ++i) {
          double fit = 0.0;
          for (std::size_t c = 0; c < q; ++c) fit += go(i, c) * bh[c];
          const double e = yo[i] - fit;
          rss += e * e;
        }
        const double dof = static_cast<double>(nobs > q ? nobs - q : 1);
        const double s2 = rss / rng.chisquare(dof);
        const double s = std::sqrt(s2);

        Vector z(q);
        for (double& zv : z) zv = rng.normal();
        const Vector u = solve_lower_transposed(la.lower, z);
        Vector bj(q);
        for (std::size_t c = 0; c < q; ++c) bj[c] = bh[c] + s * u[c];

        for (std::size_t i = 0; i < n; ++i) {
          if (block.R[i * p + j]) continue;
          double fit = 0.0;
          for (std::size_t c = 0; c < k; ++c) fit += block.X(i, c) * bj[c];
          for (std::size_t c = 0; c < qmax; ++c) fit += y(i, sel_for[j][c]) * bj[k + c];
          y(i, j) = fit + s * rng.normal();
        }
      }
    }
    ens.draws.push_back(y);
  }

  ens.elapsed_seconds = seconds_since(t0);
  return ens;
}

}  // namespace covmode
