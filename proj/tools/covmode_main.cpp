// covmode: simulate benchmark data, run an imputation method, score an
// ensemble, or drive the replicate benchmarks. See README.md for examples.
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "covmode/benchmark.hpp"
#include "covmode/chains.hpp"
#include "covmode/csv.hpp"
#include "covmode/diagnostics.hpp"
#include "covmode/errors.hpp"
#include "covmode/log.hpp"
#include "covmode/mice.hpp"
#include "covmode/runconfig.hpp"

namespace {

using namespace covmode;
namespace fs = std::filesystem;

struct Flags {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> m;
  std::optional<double> mask_rate;
  std::optional<std::size_t> replicates;
  std::optional<std::size_t> workers;
  bool allow_skip = false;
  std::optional<std::string> out;
  std::optional<std::string> method;
  std::optional<std::string> data;
  std::optional<std::string> design;
  std::optional<std::string> ensemble;
  std::optional<std::string> truth;
  std::optional<std::size_t> n;
  std::optional<std::size_t> p;
  std::optional<std::string> grid;
};

void add_common(CLI::App* cmd, Flags& fl) {
  cmd->add_option("--config", fl.config, "key=value configuration file");
  cmd->add_option("--seed", fl.seed, "master seed (applies to chain, mice, sim, lowdim)");
  cmd->add_option("--out", fl.out, "output directory");
}

void add_sim_shape(CLI::App* cmd, Flags& fl) {
  cmd->add_option("--n", fl.n, "rows to simulate");
  cmd->add_option("--p", fl.p, "data columns to keep");
  cmd->add_option("--grid", fl.grid, "lattice size as WxH, e.g. 7x6");
  cmd->add_option("--mask-rate", fl.mask_rate, "MCAR missingness fraction");
}

void add_bench(CLI::App* cmd, Flags& fl) {
  cmd->add_option("--m", fl.m, "stored imputations per method");
  cmd->add_option("--replicates", fl.replicates, "independent replicates");
  cmd->add_option("--workers", fl.workers, "replicate-level worker threads");
  cmd->add_flag("--allow-skip", fl.allow_skip, "log and skip failed replicates");
}

RunConfig resolve(const Flags& fl) {
  RunConfig rc;
  if (!fl.config.empty()) rc.apply_file(fl.config);
  if (fl.seed) {
    rc.chain.seed = *fl.seed;
    rc.fcs.seed = *fl.seed;
    rc.sim.seed = *fl.seed;
    rc.lowdim_seed = *fl.seed;
  }
  if (fl.m) {
    rc.chain.M = *fl.m;
    rc.fcs.M = *fl.m;
  }
  if (fl.mask_rate) {
    rc.sim.mask_rate = *fl.mask_rate;
    rc.lowdim_mask_rate = *fl.mask_rate;
  }
  if (fl.replicates) {
    rc.sim.replicates = *fl.replicates;
    rc.lowdim_replicates = *fl.replicates;
  }
  if (fl.workers) rc.workers = *fl.workers;
  if (fl.allow_skip) rc.allow_skip = true;
  if (fl.out) rc.io_out = *fl.out;
  if (fl.method) rc.method = *fl.method;
  if (fl.data) {
    rc.io_data = *fl.data;
    rc.lowdim_csv = *fl.data;
  }
  if (fl.design) rc.io_design = *fl.design;
  if (fl.ensemble) rc.io_ensemble = *fl.ensemble;
  if (fl.truth) rc.io_truth = *fl.truth;
  if (fl.n) rc.sim.n = *fl.n;
  if (fl.p) rc.sim.p = *fl.p;
  if (fl.grid) {
    const auto x = fl.grid->find('x');
    try {
      if (x == std::string::npos) throw std::invalid_argument(*fl.grid);
      rc.sim.grid_x = std::stoull(fl.grid->substr(0, x));
      rc.sim.grid_y = std::stoull(fl.grid->substr(x + 1));
    } catch (const std::exception&) {
      throw ValidationError("--grid expects WxH, e.g. 7x6 (got '" + *fl.grid + "')");
    }
  }
  std::cout << "# effective configuration\n";
  rc.print_effective(std::cout);
  return rc;
}

std::vector<std::string> col_names(std::size_t count, const char* stem) {
  std::vector<std::string> names(count);
  for (std::size_t j = 0; j < count; ++j) names[j] = stem + std::to_string(j + 1);
  return names;
}

int cmd_simulate(const RunConfig& rc) {
  rc.sim.validate();
  Rng rng(rc.sim.seed);
  const SpatialSim sim = simulate_spatial(rng, rc.sim);
  const auto r = mask_mcar(rng, rc.sim.n, rc.sim.p, rc.sim.mask_rate);
  fs::create_directories(rc.io_out);
  const auto vnames = col_names(rc.sim.p, "v");
  write_csv(rc.io_out + "/truth.csv", vnames, sim.Y);
  write_csv(rc.io_out + "/masked.csv", vnames, sim.Y, &r);
  Matrix mask01(rc.sim.n, rc.sim.p);
  for (std::size_t i = 0; i < mask01.data.size(); ++i) mask01.data[i] = r[i] ? 1.0 : 0.0;
  write_csv(rc.io_out + "/mask.csv", vnames, mask01);
  write_csv(rc.io_out + "/design.csv", col_names(sim.X.n_cols, "x"), sim.X);
  std::cout << "simulate: wrote truth/masked/mask/design to " << rc.io_out << "\n";
  return 0;
}

MaskedBlock load_block(const RunConfig& rc, const CsvTable& tab) {
  MaskedBlock block;
  block.Y = tab.values;
  block.R = tab.observed;
  const std::size_t n = block.Y.n_rows, p = block.Y.n_cols;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (!block.observed(i, j)) block.Y(i, j) = 0.0;
  if (!rc.io_design.empty()) {
    const CsvTable dt = read_csv(rc.io_design);
    for (std::uint8_t o : dt.observed)
      if (!o) throw ValidationError("impute: design matrix has missing cells");
    if (dt.values.n_rows != n)
      throw ValidationError("impute: design rows do not match data rows");
    block.X = dt.values;
  } else {
    block.X = Matrix(n, 1, 1.0);
  }
  block.validate();
  return block;
}

int cmd_impute(const RunConfig& rc) {
  if (rc.io_data.empty()) throw ValidationError("impute: --data is required");
  const CsvTable tab = read_csv(rc.io_data);
  MaskedBlock block = load_block(rc, tab);
  const PriorSpec prior = rc.prior_for(block.X.n_cols, block.Y.n_cols);
  ImputationEnsemble ens;
  if (rc.method == "mvn_da") {
    ens = mvn_da(block, prior, rc.chain);
  } else if (rc.method == "hima") {
    ChainConfig c = rc.chain;
    if (!std::isnan(rc.hima_alpha)) c.alpha_ridge = rc.hima_alpha;
    ens = hima_chain(block, prior, c);
  } else if (rc.method == "himce") {
    ens = himce_chain(block, prior, rc.chain);
  } else if (rc.method == "mice") {
    ens = mice_impute(block, rc.fcs);
  } else {
    throw ValidationError("impute: unknown method '" + rc.method +
                          "' (expected mvn_da|hima|himce|mice)");
  }
  ens.columns = tab.header;
  write_ensemble(rc.io_out, ens);
  std::cout << "impute: " << rc.method << " wrote " << ens.draws.size() << " imputations to "
            << rc.io_out << " in " << ens.elapsed_seconds << "s\n";
  return 0;
}

int cmd_diagnose(const RunConfig& rc) {
  if (rc.io_ensemble.empty() || rc.io_truth.empty())
    throw ValidationError("diagnose: --ensemble and --truth are required");
  const ImputationEnsemble ens = read_ensemble(rc.io_ensemble);
  const CsvTable truth = read_csv(rc.io_truth);
  const std::size_t n = ens.n_rows(), p = ens.n_cols();
  if (truth.values.n_rows != n || truth.values.n_cols != p)
    throw ValidationError("diagnose: truths shape does not match the ensemble");
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (!ens.mask[i * p + j] && !truth.is_observed(i, j))
        throw ValidationError("diagnose: truths misaligned with ensemble mask (cell " +
                              std::to_string(i) + "," + std::to_string(j) + " missing)");
  const CellDraws cells = collect_withheld(ens.draws, truth.values, ens.mask);

  std::vector<std::pair<double, double>> bounds(
      p, {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  const Matrix& base = ens.draws.front();
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (ens.mask[i * p + j]) {
        bounds[j].first = std::min(bounds[j].first, base(i, j));
        bounds[j].second = std::max(bounds[j].second, base(i, j));
      }

  const DiagnosticsReport rep = diagnose(cells, bounds, rc.chain.seed);
  fs::create_directories(rc.io_out);
  write_report_json(rc.io_out + "/report.json", rep, ens.method);
  write_pit_csv(rc.io_out + "/pit.csv", rep.pit_values);
  write_overlay_csv(rc.io_out + "/overlay.csv", cells);
  std::printf("diagnose: %s  L=%zu  rmse=%.4f mae=%.4f cov90=%.4f cov95=%.4f pit_ks=%.4f\n",
              ens.method.c_str(), cells.truths.size(), rep.rmse, rep.mae, rep.cov90, rep.cov95,
              rep.pit_ks);
  return 0;
}

void print_result(const BenchmarkResult& res) {
  for (std::size_t m = 0; m < res.methods.size(); ++m) {
    std::printf("%-6s", res.methods[m].c_str());
    for (std::size_t i = 0; i < kBenchmarkMetrics.size(); ++i) {
      std::vector<double> vals;
      for (const MethodReplicate& row : res.rows[m])
        vals.push_back(report_metrics(row.report)[i]);
      const auto [mean, sd] = mean_sd(vals);
      std::printf(" %s=%.4f(%.4f)", kBenchmarkMetrics[i], mean, sd);
    }
    std::vector<double> times;
    for (const MethodReplicate& row : res.rows[m]) times.push_back(row.elapsed_seconds);
    std::printf("  time=%.2fs\n", mean_sd(times).first);
  }
  if (!res.skipped.empty()) {
    std::printf("skipped replicates:");
    for (std::size_t r : res.skipped) std::printf(" %zu", r);
    std::printf("\n");
  }
}

int cmd_bench_spatial(const RunConfig& rc) {
  const BenchmarkResult res = run_spatial_benchmark(rc.spatial_bench());
  print_result(res);
  return 0;
}

int cmd_bench_lowdim(const RunConfig& rc) {
  const BenchmarkResult res = run_lowdim_benchmark(rc.lowdim_bench());
  print_result(res);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"multiple imputation engine for continuous data blocks"};
  app.require_subcommand(1);
  Flags fl;

  CLI::App* sim = app.add_subcommand("simulate", "generate a lattice Gaussian benchmark block");
  add_common(sim, fl);
  add_sim_shape(sim, fl);

  CLI::App* imp = app.add_subcommand("impute", "run one imputation method on a CSV block");
  add_common(imp, fl);
  imp->add_option("--method", fl.method, "mvn_da|hima|himce|mice");
  imp->add_option("--m", fl.m, "stored imputations");
  imp->add_option("--data", fl.data, "data CSV (empty field = missing)");
  imp->add_option("--design", fl.design, "design CSV (default: intercept only)");

  CLI::App* diag = app.add_subcommand("diagnose", "score an ensemble against withheld truths");
  add_common(diag, fl);
  diag->add_option("--ensemble", fl.ensemble, "ensemble directory (from impute/bench)");
  diag->add_option("--truth", fl.truth, "complete truth CSV");

  CLI::App* bench = app.add_subcommand("bench", "replicate benchmark drivers");
  bench->require_subcommand(1);
  CLI::App* bsp = bench->add_subcommand("spatial", "simulated spatial-block benchmark");
  add_common(bsp, fl);
  add_sim_shape(bsp, fl);
  add_bench(bsp, fl);
  CLI::App* blo = bench->add_subcommand("lowdim", "small complete-row CSV benchmark");
  add_common(blo, fl);
  add_bench(blo, fl);
  blo->add_option("--data", fl.data, "input CSV (default: data/lowdim_fixture.csv)");
  blo->add_option("--mask-rate", fl.mask_rate, "MCAR missingness fraction");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return app.exit(e);  // --help
    std::cerr << e.what() << "\n";
    return ValidationError::exit_code;
  }

  try {
    const RunConfig rc = resolve(fl);
    if (sim->parsed()) return cmd_simulate(rc);
    if (imp->parsed()) return cmd_impute(rc);
    if (diag->parsed()) return cmd_diagnose(rc);
    if (bsp->parsed()) return cmd_bench_spatial(rc);
    if (blo->parsed()) return cmd_bench_lowdim(rc);
    return ValidationError::exit_code;
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return ValidationError::exit_code;
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return IoError::exit_code;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return NumericalError::exit_code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return NumericalError::exit_code;
  }
}
