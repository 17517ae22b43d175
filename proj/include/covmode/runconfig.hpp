#pragma once
#include <cmath>
#include <cstdint>
#include <iosfwd>
#include <limits>
#include <string>
#include <vector>

#include "covmode/benchmark.hpp"
#include "covmode/chains.hpp"
#include "covmode/gaussian_model.hpp"
#include "covmode/mice.hpp"

namespace covmode {

// Every tunable the CLI exposes, addressable by dotted key (chain.alpha_ridge,
// sim.nugget, lowdim.seed, ...) so a plain key=value file and flag overrides
// share one registry. Precedence: CLI flag > config file > default. Defaults
// are the benchmark profile, so `bench spatial` with no arguments runs the
// shipped experiment.
struct RunConfig {
  ChainConfig chain;
  double hima_alpha = std::numeric_limits<double>::quiet_NaN();  // NaN: use chain.alpha_ridge

  double prior_nu0 = 0.0;  // 0: p + 2
  double prior_s0_scale = 0.01;
  double prior_v0_alpha = std::numeric_limits<double>::quiet_NaN();  // NaN: chain.alpha_ridge

  FcsConfig fcs;
  SpatialSimConfig sim;

  double calib_holdout = 0.2;
  double calib_tau_b = 0.15;
  double calib_tau_a = 0.10;
  std::size_t shared_sweeps = 18;
  std::size_t workers = 1;
  bool allow_skip = false;

  std::string lowdim_csv = "data/lowdim_fixture.csv";
  std::string lowdim_design_cols = "age_std";      // comma-separated
  std::string lowdim_target_cols = "bmi_std,chl_std";
  double lowdim_mask_rate = 0.3;
  std::size_t lowdim_min_obs = 8;
  std::size_t lowdim_min_missing = 2;
  std::size_t lowdim_replicates = 60;
  std::uint64_t lowdim_seed = 23;
  double lowdim_hima_alpha = 2.0;
  double lowdim_nu0 = 4.0;

  std::string io_out = "out";
  std::string io_data;
  std::string io_design;
  std::string io_ensemble;
  std::string io_truth;

  std::string method = "himce";  // flag-only, not a config-file key

  RunConfig() {
    chain.alpha_ridge = 70.0;
    chain.screen_size = 20;
  }

  // Throws ValidationError for unknown keys or unparseable values.
  void set(const std::string& key, const std::string& value);
  std::string get(const std::string& key) const;
  static const std::vector<std::string>& keys();

  // Applies key=value lines ('#' comments and blank lines ignored).
  void apply_file(const std::string& path);

  void print_effective(std::ostream& os) const;

  SpatialBenchConfig spatial_bench() const;
  LowdimBenchConfig lowdim_bench() const;
  PriorSpec prior_for(std::size_t k, std::size_t p) const;
};

std::vector<std::string> split_list(const std::string& comma_joined);

}  // namespace covmode
