#pragma once
#include <array>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

#include "covmode/chains.hpp"
#include "covmode/diagnostics.hpp"
#include "covmode/errors.hpp"
#include "covmode/mice.hpp"

namespace covmode {

struct TooFewCompleteRows : ValidationError {
  explicit TooFewCompleteRows(const std::string& msg) : ValidationError(msg) {}
};

// Gaussian-process block on a 2-D lattice: exponential kernel plus nugget,
// intercept + one standardized age-like covariate, stronger slopes on the
// first strong_slope_cols columns, columns standardized after generation.
// The lattice is generated at grid_x x grid_y sites and the p columns of
// highest pre-standardization variance are kept.
struct SpatialSimConfig {
  std::size_t n = 80;
  std::size_t grid_x = 7;
  std::size_t grid_y = 6;
  std::size_t p = 40;
  double kernel_scale = 3.2;  // correlation length, lattice units
  double kernel_var = 1.0;
  double nugget = 0.05;  // floored at 1e-6 * kernel_var inside the generator
  std::size_t strong_slope_cols = 10;
  double strong_slope = 0.8;
  double weak_slope = 0.2;
  double mask_rate = 0.3;
  std::size_t replicates = 10;
  std::uint64_t seed = 7;

  void validate() const;
};

struct SpatialSim {
  Matrix Y;  // n x p, columns standardized to mean 0, sd 1
  Matrix X;  // n x 2: intercept, standardized covariate
  // generating parameters mapped onto the standardized scale, for
  // reference-floor diagnostics only (never fed to the imputers)
  Matrix B_std;
  Matrix Sigma_std;
};

SpatialSim simulate_spatial(Rng& rng, const SpatialSimConfig& cfg);

// MCAR mask, 1 = observed: each cell kept with probability 1 - rate, redrawn
// until every column keeps >= min_obs observed cells and at least min_missing
// cells are masked overall.
std::vector<std::uint8_t> mask_mcar(Rng& rng, std::size_t n, std::size_t p, double rate,
                                    std::size_t min_obs = 2, std::size_t min_missing = 0,
                                    std::size_t attempts = 100);

// ---- replicate drivers -------------------------------------------------------

struct SpatialBenchConfig {
  SpatialSimConfig sim;
  ChainConfig chain;  // used by both chains; himce ignores hima_available_case
  FcsConfig fcs;
  double calib_holdout = 0.2;
  double calib_tau_b = 0.15;
  double calib_tau_a = 0.10;
  std::size_t shared_sweeps = 18;
  std::size_t workers = 1;
  bool allow_skip = false;
  std::string out_dir;  // empty: in-memory run, nothing written

  SpatialBenchConfig() {
    chain.alpha_ridge = 70.0;
    chain.screen_size = 20;
  }
  void validate() const;
};

struct LowdimBenchConfig {
  std::string csv_path = "data/lowdim_fixture.csv";
  std::vector<std::string> design_cols = {"age_std"};
  std::vector<std::string> target_cols = {"bmi_std", "chl_std"};
  double mask_rate = 0.3;
  std::size_t min_obs = 8;      // observed cells every column must keep
  std::size_t min_missing = 2;  // masked cells every replicate must produce
  std::size_t replicates = 60;
  std::uint64_t seed = 23;
  ChainConfig chain;       // himce configuration; p = 2 takes the exact branch
  double hima_alpha = 2.0; // hima ridge and shared-fit ridge
  double prior_nu0 = 4.0;
  double prior_s0_scale = 0.01;
  FcsConfig fcs;
  std::size_t shared_sweeps = 18;
  std::size_t workers = 1;
  bool allow_skip = false;
  std::string out_dir;

  LowdimBenchConfig() {
    chain.alpha_ridge = 70.0;
    chain.screen_size = 20;
    chain.hima_available_case = false;
  }
  void validate() const;
};

// Metric columns of summary.csv / replicates.csv, in file order. Timings are
// deliberately not in this list: they go to timings.csv so that the summary
// of a same-seed rerun is byte-identical.
extern const std::array<const char*, 14> kBenchmarkMetrics;

// The 14 metric values of one report, aligned with kBenchmarkMetrics.
Vector report_metrics(const DiagnosticsReport& rep);

// Mean and n-1 sd accumulated in index order; the recomputation identity
// (replicates.csv -> summary.csv) depends on every consumer using this exact
// reduction.
std::pair<double, double> mean_sd(const std::vector<double>& v);

struct MethodReplicate {
  std::size_t rep = 0;
  DiagnosticsReport report;
  double elapsed_seconds = 0.0;
  double calibration_seconds = -1.0;  // himce only
};

struct BenchmarkResult {
  std::vector<std::string> methods;                // {"hima", "himce", "mice"}
  std::vector<std::vector<MethodReplicate>> rows;  // rows[m] in replicate order
  std::vector<std::size_t> skipped;                // replicates dropped by --allow-skip
  double oracle_rmse = std::numeric_limits<double>::quiet_NaN();  // spatial Bayes floor

  // Mean across completed replicates; metric may also be "time".
  double metric_mean(const std::string& method, const std::string& metric) const;
};

BenchmarkResult run_spatial_benchmark(const SpatialBenchConfig& cfg);
BenchmarkResult run_lowdim_benchmark(const LowdimBenchConfig& cfg);

}  // namespace covmode
