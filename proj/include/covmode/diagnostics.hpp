#pragma once
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "covmode/matrix.hpp"
#include "covmode/rng.hpp"

namespace covmode {

// Pooled scalar inference across M imputations: between/within variance
// decomposition, total variance, and the associated degrees of freedom.
struct PooledEstimate {
  double Q_bar = 0.0;
  double U_bar = 0.0;
  double B_M = 0.0;
  double T_M = 0.0;
  double r = 0.0;      // relative increase in variance due to nonresponse
  double nu_mi = 0.0;  // +inf when the between-imputation variance vanishes
  bool zero_within = false;  // U_bar = 0 with B_M > 0: r undefined, nu_mi pinned at +inf
};

PooledEstimate rubin_pool(const Vector& estimates, const Vector& variances);

// Randomized rank-cell PIT of one truth within its M draws:
// (r_below + U * (r_equal + 1)) / (M + 1).
double pit_rank_cell(Rng& rng, const Vector& draws, double truth);

// Fraction of PIT values inside the central band [alpha/2, 1 - alpha/2],
// boundaries inclusive. Every coverage number in this codebase is this count.
double pit_consistent_coverage(const Vector& pits, double alpha);

double central_mass(const Vector& pits);  // fraction in [0.4, 0.6]

// One-sample Kolmogorov-Smirnov distance of the PIT sample to Uniform(0,1).
double ks_uniform(Vector pits);

struct MarginalGaps {
  double mean_gap = 0.0;
  double sd_gap = 0.0;
  double iqr_gap = 0.0;
  double qq_gap = 0.0;
};

// Distribution gaps between the pooled predictive draws and the withheld
// truths. One quantile convention (linear interpolation between order
// statistics) is used for the IQR and the quantile grid.
MarginalGaps marginal_gaps(const Vector& truths, const Vector& pooled_draws);

std::pair<double, double> error_metrics(const Vector& truths, const Vector& posterior_means);

// Fraction of draw values outside their cell's admissible interval.
double support_violations(const Matrix& cell_draws,
                          const std::vector<std::pair<double, double>>& cell_bounds);

// Linear-interpolation quantile of a sorted sample (the single convention
// used wherever a quantile is needed).
double quantile_sorted(const Vector& sorted, double q);

// ---- withheld-cell evaluation ------------------------------------------------

// Draws for the withheld cells of one ensemble: row l of `draws` holds the M
// values imputed for cell l, truths[l] the masked-out value, cols[l] its
// column (for per-column support bounds). Cells are listed in row-major mask
// order.
struct CellDraws {
  Matrix draws;  // L x M
  Vector truths;
  std::vector<std::size_t> cols;
};

CellDraws collect_withheld(const std::vector<Matrix>& imputations, const Matrix& Y_true,
                           const std::vector<std::uint8_t>& R);

struct DiagnosticsReport {
  double rmse = 0.0, mae = 0.0;
  Vector pit_values;
  double pit_mean = 0.0, pit_sd = 0.0, pit_ks = 0.0;
  double p_central = 0.0;
  double cov_iqr = 0.0, cov90 = 0.0, cov95 = 0.0;
  double mean_gap = 0.0, sd_gap = 0.0, iqr_gap = 0.0, qq_gap = 0.0;
  double support_violation_rate = 0.0;
  double elapsed_seconds = 0.0;
};

// col_bounds: one admissible interval per data column (conventionally the
// observed min/max). The diagnostics RNG stream is derived from `seed` alone,
// so reports are reproducible independently of the imputation seeds.
DiagnosticsReport diagnose(const CellDraws& cells,
                           const std::vector<std::pair<double, double>>& col_bounds,
                           std::uint64_t seed);

void write_report_json(const std::string& path, const DiagnosticsReport& rep,
                       const std::string& method);
void write_pit_csv(const std::string& path, const Vector& pits);
// kind,value rows: the withheld truths, every pooled draw, and the posterior means
void write_overlay_csv(const std::string& path, const CellDraws& cells);

}  // namespace covmode
