#include "covmode/runconfig.hpp"

#include <algorithm>
#include <fstream>
#include <functional>
#include <map>
#include <ostream>
#include <sstream>

#include "covmode/csv.hpp"
#include "covmode/errors.hpp"

namespace covmode {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

double parse_double(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    const double x = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return x;
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + ": not a number: '" + v + "'");
  }
}

std::uint64_t parse_u64(const std::string& key, const std::string& v) {
  try {
    std::size_t used = 0;
    if (!v.empty() && v[0] == '-') throw std::invalid_argument(v);
    const unsigned long long x = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<std::uint64_t>(x);
  } catch (const std::exception&) {
    throw ValidationError("config: " + key + ": not a non-negative integer: '" + v + "'");
  }
}

bool parse_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1" || v == "yes") return true;
  if (v == "false" || v == "0" || v == "no") return false;
  throw ValidationError("config: " + key + ": not a boolean: '" + v + "'");
}

struct Entry {
  std::function<void(RunConfig&, const std::string&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

using Reg = std::map<std::string, Entry>;

template <typename F>
void add_d(Reg& reg, const char* key, F field) {
  reg[key] = {[field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_double(k, v);
              },
              [field](const RunConfig& c) {
                return format_double(field(const_cast<RunConfig&>(c)));
              }};
}

template <typename F>
void add_z(Reg& reg, const char* key, F field) {  // size_t
  reg[key] = {[field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = static_cast<std::size_t>(parse_u64(k, v));
              },
              [field](const RunConfig& c) {
                return std::to_string(field(const_cast<RunConfig&>(c)));
              }};
}

template <typename F>
void add_i(Reg& reg, const char* key, F field) {  // int
  reg[key] = {[field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = static_cast<int>(parse_u64(k, v));
              },
              [field](const RunConfig& c) {
                return std::to_string(field(const_cast<RunConfig&>(c)));
              }};
}

template <typename F>
void add_u(Reg& reg, const char* key, F field) {  // uint64
  reg[key] = {[field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_u64(k, v);
              },
              [field](const RunConfig& c) {
                return std::to_string(field(const_cast<RunConfig&>(c)));
              }};
}

template <typename F>
void add_b(Reg& reg, const char* key, F field) {
  reg[key] = {[field](RunConfig& c, const std::string& k, const std::string& v) {
                field(c) = parse_bool(k, v);
              },
              [field](const RunConfig& c) {
                return field(const_cast<RunConfig&>(c)) ? "true" : "false";
              }};
}

template <typename F>
void add_s(Reg& reg, const char* key, F field) {
  reg[key] = {[field](RunConfig& c, const std::string&, const std::string& v) {
                field(c) = v;
              },
              [field](const RunConfig& c) {
                return field(const_cast<RunConfig&>(c));
              }};
}

const Reg& registry() {
  static const Reg reg = [] {
    Reg r;
    add_z(r, "chain.m", [](RunConfig& c) -> std::size_t& { return c.chain.M; });
    add_z(r, "chain.t_burn", [](RunConfig& c) -> std::size_t& { return c.chain.T_burn; });
    add_z(r, "chain.thin", [](RunConfig& c) -> std::size_t& { return c.chain.thin; });
    add_z(r, "chain.inner", [](RunConfig& c) -> std::size_t& { return c.chain.inner; });
    add_d(r, "chain.alpha_ridge", [](RunConfig& c) -> double& { return c.chain.alpha_ridge; });
    add_d(r, "chain.eps_jitter", [](RunConfig& c) -> double& { return c.chain.eps_jitter; });
    add_d(r, "chain.bridge_df", [](RunConfig& c) -> double& { return c.chain.bridge_df; });
    add_d(r, "chain.bridge_max", [](RunConfig& c) -> double& { return c.chain.bridge_max; });
    add_z(r, "chain.exact_refresh_max_p",
          [](RunConfig& c) -> std::size_t& { return c.chain.exact_refresh_max_p; });
    add_z(r, "chain.screen_size", [](RunConfig& c) -> std::size_t& { return c.chain.screen_size; });
    add_i(r, "chain.eb_terms", [](RunConfig& c) -> int& { return c.chain.eb_terms; });
    add_u(r, "chain.seed", [](RunConfig& c) -> std::uint64_t& { return c.chain.seed; });
    add_b(r, "chain.hima_available_case",
          [](RunConfig& c) -> bool& { return c.chain.hima_available_case; });

    add_d(r, "hima.alpha", [](RunConfig& c) -> double& { return c.hima_alpha; });

    add_d(r, "prior.nu0", [](RunConfig& c) -> double& { return c.prior_nu0; });
    add_d(r, "prior.s0_scale", [](RunConfig& c) -> double& { return c.prior_s0_scale; });
    add_d(r, "prior.v0_alpha", [](RunConfig& c) -> double& { return c.prior_v0_alpha; });

    add_z(r, "mice.m", [](RunConfig& c) -> std::size_t& { return c.fcs.M; });
    add_z(r, "mice.iters", [](RunConfig& c) -> std::size_t& { return c.fcs.iters; });
    add_z(r, "mice.max_screen", [](RunConfig& c) -> std::size_t& { return c.fcs.max_screen; });
    add_u(r, "mice.seed", [](RunConfig& c) -> std::uint64_t& { return c.fcs.seed; });

    add_z(r, "sim.n", [](RunConfig& c) -> std::size_t& { return c.sim.n; });
    add_z(r, "sim.grid_x", [](RunConfig& c) -> std::size_t& { return c.sim.grid_x; });
    add_z(r, "sim.grid_y", [](RunConfig& c) -> std::size_t& { return c.sim.grid_y; });
    add_z(r, "sim.p", [](RunConfig& c) -> std::size_t& { return c.sim.p; });
    add_d(r, "sim.kernel_scale", [](RunConfig& c) -> double& { return c.sim.kernel_scale; });
    add_d(r, "sim.kernel_var", [](RunConfig& c) -> double& { return c.sim.kernel_var; });
    add_d(r, "sim.nugget", [](RunConfig& c) -> double& { return c.sim.nugget; });
    add_z(r, "sim.strong_slope_cols",
          [](RunConfig& c) -> std::size_t& { return c.sim.strong_slope_cols; });
    add_d(r, "sim.strong_slope", [](RunConfig& c) -> double& { return c.sim.strong_slope; });
    add_d(r, "sim.weak_slope", [](RunConfig& c) -> double& { return c.sim.weak_slope; });
    add_d(r, "sim.mask_rate", [](RunConfig& c) -> double& { return c.sim.mask_rate; });
    add_z(r, "sim.replicates", [](RunConfig& c) -> std::size_t& { return c.sim.replicates; });
    add_u(r, "sim.seed", [](RunConfig& c) -> std::uint64_t& { return c.sim.seed; });

    add_d(r, "calib.holdout", [](RunConfig& c) -> double& { return c.calib_holdout; });
    add_d(r, "calib.tau_b", [](RunConfig& c) -> double& { return c.calib_tau_b; });
    add_d(r, "calib.tau_a", [](RunConfig& c) -> double& { return c.calib_tau_a; });

    add_z(r, "bench.shared_sweeps", [](RunConfig& c) -> std::size_t& { return c.shared_sweeps; });
    add_z(r, "bench.workers", [](RunConfig& c) -> std::size_t& { return c.workers; });
    add_b(r, "bench.allow_skip", [](RunConfig& c) -> bool& { return c.allow_skip; });

    add_s(r, "lowdim.csv", [](RunConfig& c) -> std::string& { return c.lowdim_csv; });
    add_s(r, "lowdim.design_cols",
          [](RunConfig& c) -> std::string& { return c.lowdim_design_cols; });
    add_s(r, "lowdim.target_cols",
          [](RunConfig& c) -> std::string& { return c.lowdim_target_cols; });
    add_d(r, "lowdim.mask_rate", [](RunConfig& c) -> double& { return c.lowdim_mask_rate; });
    add_z(r, "lowdim.min_obs", [](RunConfig& c) -> std::size_t& { return c.lowdim_min_obs; });
    add_z(r, "lowdim.min_missing",
          [](RunConfig& c) -> std::size_t& { return c.lowdim_min_missing; });
    add_z(r, "lowdim.replicates",
          [](RunConfig& c) -> std::size_t& { return c.lowdim_replicates; });
    add_u(r, "lowdim.seed", [](RunConfig& c) -> std::uint64_t& { return c.lowdim_seed; });
    add_d(r, "lowdim.hima_alpha", [](RunConfig& c) -> double& { return c.lowdim_hima_alpha; });
    add_d(r, "lowdim.nu0", [](RunConfig& c) -> double& { return c.lowdim_nu0; });

    add_s(r, "io.out", [](RunConfig& c) -> std::string& { return c.io_out; });
    add_s(r, "io.data", [](RunConfig& c) -> std::string& { return c.io_data; });
    add_s(r, "io.design", [](RunConfig& c) -> std::string& { return c.io_design; });
    add_s(r, "io.ensemble", [](RunConfig& c) -> std::string& { return c.io_ensemble; });
    add_s(r, "io.truth", [](RunConfig& c) -> std::string& { return c.io_truth; });
    return r;
  }();
  return reg;
}

}  // namespace

void RunConfig::set(const std::string& key, const std::string& value) {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ValidationError("config: unknown key '" + key + "'");
  it->second.set(*this, key, value);
}

std::string RunConfig::get(const std::string& key) const {
  const auto it = registry().find(key);
  if (it == registry().end()) throw ValidationError("config: unknown key '" + key + "'");
  return it->second.get(*this);
}

const std::vector<std::string>& RunConfig::keys() {
  static const std::vector<std::string> ks = [] {
    std::vector<std::string> v;
    for (const auto& [k, e] : registry()) v.push_back(k);
    return v;
  }();
  return ks;
}

void RunConfig::apply_file(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw IoError("config: cannot open " + path);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(f, line)) {
    ++lineno;
    const std::string s = trim(line);
    if (s.empty() || s[0] == '#') continue;
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config: " + path + ":" + std::to_string(lineno) +
                            ": expected key=value");
    set(trim(s.substr(0, eq)), trim(s.substr(eq + 1)));
  }
}

void RunConfig::print_effective(std::ostream& os) const {
  for (const std::string& k : keys()) os << k << "=" << get(k) << "\n";
}

SpatialBenchConfig RunConfig::spatial_bench() const {
  SpatialBenchConfig b;
  b.sim = sim;
  b.chain = chain;
  b.fcs = fcs;
  b.calib_holdout = calib_holdout;
  b.calib_tau_b = calib_tau_b;
  b.calib_tau_a = calib_tau_a;
  b.shared_sweeps = shared_sweeps;
  b.workers = workers;
  b.allow_skip = allow_skip;
  b.out_dir = io_out;
  return b;
}

LowdimBenchConfig RunConfig::lowdim_bench() const {
  LowdimBenchConfig b;
  b.csv_path = lowdim_csv;
  b.design_cols = split_list(lowdim_design_cols);
  b.target_cols = split_list(lowdim_target_cols);
  b.mask_rate = lowdim_mask_rate;
  b.min_obs = lowdim_min_obs;
  b.min_missing = lowdim_min_missing;
  b.replicates = lowdim_replicates;
  b.seed = lowdim_seed;
  b.chain = chain;
  b.chain.hima_available_case = false;  // completed-matrix basis; n is too small for pairwise
  b.hima_alpha = lowdim_hima_alpha;
  b.prior_nu0 = lowdim_nu0;
  b.prior_s0_scale = prior_s0_scale;
  b.fcs = fcs;
  b.shared_sweeps = shared_sweeps;
  b.workers = workers;
  b.allow_skip = allow_skip;
  b.out_dir = io_out;
  return b;
}

PriorSpec RunConfig::prior_for(std::size_t k, std::size_t p) const {
  const double alpha = std::isnan(prior_v0_alpha) ? chain.alpha_ridge : prior_v0_alpha;
  return PriorSpec::ridge_default(k, p, alpha, prior_s0_scale, prior_nu0);
}

std::vector<std::string> split_list(const std::string& comma_joined) {
  std::vector<std::string> out;
  std::stringstream ss(comma_joined);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const std::string t = trim(item);
    if (!t.empty()) out.push_back(t);
  }
  return out;
}

}  // namespace covmode
