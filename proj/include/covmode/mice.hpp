#pragma once
#include <cstdint>

#include "covmode/chains.hpp"
#include "covmode/errors.hpp"
#include "covmode/gaussian_model.hpp"

namespace covmode {

struct FcsConfig {
  std::size_t M = 20;
  std::size_t iters = 10;      // FCS sweeps per imputation
  std::size_t max_screen = 20; // within-block predictors per conditional model
  std::uint64_t seed = 1;

  void validate() const;
  std::vector<std::pair<std::string, double>> snapshot() const;
};

struct AllMissingColumn : ValidationError {
  explicit AllMissingColumn(const std::string& msg) : ValidationError(msg) {}
};

// Screened Gaussian fully conditional specification: missing cells start as
// draws from each column's observed margin; every sweep regresses each column
// on the design plus its screened block predictors (flat coefficient prior,
// Jeffreys variance prior) and redraws the column's missing cells from the
// predictive normal. Screening ranks |pairwise-complete correlation| on the
// observed cells, so the ranking is fixed across imputations.
ImputationEnsemble mice_impute(const MaskedBlock& block, const FcsConfig& cfg);

}  // namespace covmode
