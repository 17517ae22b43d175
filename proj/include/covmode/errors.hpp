#pragma once
#include <stdexcept>
#include <string>

namespace covmode {

// Exit-code taxonomy used by the CLI: 2 = validation (bad config, bad shapes,
// violated preconditions), 3 = numerical failure at runtime, 4 = I/O.
struct ValidationError : std::runtime_error {
  explicit ValidationError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int exit_code = 2;
};

struct NumericalError : std::runtime_error {
  explicit NumericalError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int exit_code = 3;
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& msg) : std::runtime_error(msg) {}
  static constexpr int exit_code = 4;
};

// Specific numerical failures callers are expected to catch and repair
// (jitter or SPD-project, then retry).
struct NotPositiveDefinite : NumericalError {
  int pivot;
  NotPositiveDefinite(int pivot_index, double pivot_value)
      : NumericalError("cholesky: non-positive pivot " + std::to_string(pivot_value) +
                       " at index " + std::to_string(pivot_index)),
        pivot(pivot_index) {}
};

struct IllConditioned : NumericalError {
  explicit IllConditioned(const std::string& msg) : NumericalError(msg) {}
};

struct SingularDesign : NumericalError {
  explicit SingularDesign(const std::string& msg) : NumericalError(msg) {}
};

}  // namespace covmode
