#include "covmode/benchmark.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <exception>
#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <thread>

#include "covmode/csv.hpp"
#include "covmode/gaussian_model.hpp"
#include "covmode/linalg.hpp"
#include "covmode/log.hpp"

namespace covmode {

namespace {

namespace fs = std::filesystem;

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string rep_dirname(std::size_t rep) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "rep_%03zu", rep);
  return buf;
}

std::vector<std::string> default_columns(std::size_t p, const char* stem) {
  std::vector<std::string> names(p);
  for (std::size_t j = 0; j < p; ++j) names[j] = stem + std::to_string(j + 1);
  return names;
}

std::vector<std::pair<double, double>> observed_bounds(const MaskedBlock& block) {
  const std::size_t n = block.Y.n_rows, p = block.Y.n_cols;
  std::vector<std::pair<double, double>> bounds(
      p, {std::numeric_limits<double>::infinity(), -std::numeric_limits<double>::infinity()});
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (block.observed(i, j)) {
        bounds[j].first = std::min(bounds[j].first, block.Y(i, j));
        bounds[j].second = std::max(bounds[j].second, block.Y(i, j));
      }
  return bounds;
}

// Everything one replicate produces. Ensembles and inputs are kept so the
// export layer can write any replicate's directory without re-running it.
struct RepPayload {
  std::array<DiagnosticsReport, 3> reports;
  std::array<double, 3> elapsed{};
  double calibration_seconds = -1.0;
  double floor_rmse = std::numeric_limits<double>::quiet_NaN();
  Matrix truth;
  MaskedBlock block;
  std::array<ImputationEnsemble, 3> ensembles;  // hima, himce (calibrated), mice
};

MaskedBlock make_block(const Matrix& truth, std::vector<std::uint8_t> r, const Matrix& x) {
  MaskedBlock block;
  block.Y = truth;
  block.R = std::move(r);
  block.X = x;
  const std::size_t p = truth.n_cols;
  for (std::size_t i = 0; i < truth.n_rows; ++i)
    for (std::size_t j = 0; j < p; ++j)
      if (!block.R[i * p + j]) block.Y(i, j) = 0.0;
  block.validate();
  return block;
}

void finish_payload(RepPayload& out, ImputationEnsemble da, ImputationEnsemble dc,
                    ImputationEnsemble dm, std::uint64_t diag_seed) {
  const auto bounds = observed_bounds(out.block);
  out.ensembles = {std::move(da), std::move(dc), std::move(dm)};
  for (std::size_t m = 0; m < 3; ++m) {
    const CellDraws cells =
        collect_withheld(out.ensembles[m].draws, out.truth, out.block.R);
    out.reports[m] = diagnose(cells, bounds, diag_seed);
    out.elapsed[m] = out.ensembles[m].elapsed_seconds;
  }
  out.calibration_seconds = out.ensembles[1].calibration_seconds;
}

RepPayload spatial_rep(const SpatialBenchConfig& cfg, std::size_t rep) {
  RepPayload out;
  const std::uint64_t base = cfg.sim.seed * 1000 + rep;
  Rng rs(base);
  const SpatialSim sim = simulate_spatial(rs, cfg.sim);
  out.truth = sim.Y;
  out.block = make_block(sim.Y, mask_mcar(rs, cfg.sim.n, cfg.sim.p, cfg.sim.mask_rate),
                         sim.X);

  // Bayes floor: conditional-mean fill under the generating parameters. Only
  // logged — no imputer sees these matrices.
  {
    Matrix yf = out.block.Y;
    const Matrix mu = matmul(sim.X, sim.B_std);
    impute_rows(yf, out.block.R, mu, sim.Sigma_std, 1e-9, nullptr, nullptr);
    double se = 0.0;
    std::size_t cells = 0;
    for (std::size_t i = 0; i < yf.n_rows; ++i)
      for (std::size_t j = 0; j < yf.n_cols; ++j)
        if (!out.block.observed(i, j)) {
          const double d = yf(i, j) - out.truth(i, j);
          se += d * d;
          ++cells;
        }
    if (cells > 0) out.floor_rmse = std::sqrt(se / static_cast<double>(cells));
  }

  const auto t0 = std::chrono::steady_clock::now();
  const SharedFit sh = shared_fit(out.block, cfg.chain.alpha_ridge, cfg.chain.eps_jitter,
                                  cfg.shared_sweeps, cfg.chain.eb_terms);
  const double t_fit = seconds_since(t0);

  const PriorSpec prior =
      PriorSpec::ridge_default(out.block.X.n_cols, cfg.sim.p, cfg.chain.alpha_ridge);

  ChainConfig hcfg = cfg.chain;
  hcfg.seed = base + 10000;
  ImputationEnsemble da = hima_chain(out.block, prior, hcfg, &sh);
  da.elapsed_seconds += t_fit;

  ChainConfig ccfg = cfg.chain;
  ccfg.seed = base + 20000;
  ImputationEnsemble dc = himce_chain(out.block, prior, ccfg, &sh);
  dc.elapsed_seconds += t_fit;

  // Calibration re-runs both chains on the holdout-augmented mask with a
  // fresh deterministic fit; its cost is reported separately from the chain.
  Rng rng_cal(base + 30000);
  const ChainRunner rerun_himce = [&](const MaskedBlock& aug) {
    const SharedFit s2 = shared_fit(aug, cfg.chain.alpha_ridge, cfg.chain.eps_jitter,
                                    cfg.shared_sweeps, cfg.chain.eb_terms);
    ChainConfig c2 = cfg.chain;
    c2.seed = base + 40000;
    return himce_chain(aug, prior, c2, &s2).draws;
  };
  const ChainRunner rerun_hima = [&](const MaskedBlock& aug) {
    const SharedFit s2 = shared_fit(aug, cfg.chain.alpha_ridge, cfg.chain.eps_jitter,
                                    cfg.shared_sweeps, cfg.chain.eb_terms);
    ChainConfig c2 = cfg.chain;
    c2.seed = base + 50000;
    return hima_chain(aug, prior, c2, &s2).draws;
  };
  const auto tc0 = std::chrono::steady_clock::now();
  ImputationEnsemble dc_cal =
      calibrate_observed_cells(dc, da, out.block, cfg.calib_holdout, rerun_himce,
                               rerun_hima, rng_cal, cfg.calib_tau_b, cfg.calib_tau_a);
  dc_cal.calibration_seconds = seconds_since(tc0);

  FcsConfig fcfg = cfg.fcs;
  fcfg.seed = base + 60000;
  ImputationEnsemble dm = mice_impute(out.block, fcfg);

  finish_payload(out, std::move(da), std::move(dc_cal), std::move(dm), rep);
  return out;
}

RepPayload lowdim_rep(const LowdimBenchConfig& cfg, const Matrix& y, const Matrix& x,
                      const std::vector<std::string>& colnames, std::size_t rep) {
  RepPayload out;
  const std::uint64_t base = cfg.seed * 1000 + rep;
  Rng rs(base);
  out.truth = y;
  out.block = make_block(
      y, mask_mcar(rs, y.n_rows, y.n_cols, cfg.mask_rate, cfg.min_obs, cfg.min_missing),
      x);

  const auto t0 = std::chrono::steady_clock::now();
  const SharedFit sh = shared_fit(out.block, cfg.hima_alpha, cfg.chain.eps_jitter,
                                  cfg.shared_sweeps, cfg.chain.eb_terms);
  const double t_fit = seconds_since(t0);

  const PriorSpec prior = PriorSpec::ridge_default(
      x.n_cols, y.n_cols, cfg.chain.alpha_ridge, cfg.prior_s0_scale, cfg.prior_nu0);

  ChainConfig hcfg = cfg.chain;
  hcfg.alpha_ridge = cfg.hima_alpha;
  hcfg.seed = base + 10000;
  ImputationEnsemble da = hima_chain(out.block, prior, hcfg, &sh);
  da.elapsed_seconds += t_fit;

  ChainConfig ccfg = cfg.chain;
  ccfg.seed = base + 20000;
  ImputationEnsemble dc = himce_chain(out.block, prior, ccfg, &sh);
  dc.elapsed_seconds += t_fit;

  FcsConfig fcfg = cfg.fcs;
  fcfg.seed = base + 60000;
  ImputationEnsemble dm = mice_impute(out.block, fcfg);

  da.columns = dc.columns = dm.columns = colnames;
  finish_payload(out, std::move(da), std::move(dc), std::move(dm), base + 77);
  return out;
}

// Replicates are independent given the seed, so they may fan out over a small
// worker pool; the reduction below always walks them in index order.
template <typename RepFn>
BenchmarkResult drive(std::size_t reps, std::size_t workers, bool allow_skip,
                      const RepFn& body, std::vector<std::optional<RepPayload>>& payloads) {
  payloads.assign(reps, std::nullopt);
  std::vector<std::exception_ptr> errs(reps);
  auto run_one = [&](std::size_t r) {
    try {
      payloads[r] = body(r);
    } catch (...) {
      errs[r] = std::current_exception();
    }
  };
  if (workers <= 1) {
    for (std::size_t r = 0; r < reps; ++r) run_one(r);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    const std::size_t nthreads = std::min(workers, reps);
    pool.reserve(nthreads);
    for (std::size_t t = 0; t < nthreads; ++t)
      pool.emplace_back([&] {
        for (;;) {
          const std::size_t r = next.fetch_add(1);
          if (r >= reps) return;
          run_one(r);
        }
      });
    for (auto& th : pool) th.join();
  }

  BenchmarkResult res;
  res.methods = {"hima", "himce", "mice"};
  res.rows.resize(res.methods.size());
  for (std::size_t r = 0; r < reps; ++r) {
    if (errs[r]) {
      try {
        std::rethrow_exception(errs[r]);
      } catch (const std::exception& e) {
        if (!allow_skip) {
          logf(LogLevel::Error, "replicate %zu failed: %s", r, e.what());
          throw;
        }
        logf(LogLevel::Warn, "replicate %zu skipped: %s", r, e.what());
      }
      res.skipped.push_back(r);
      continue;
    }
    const RepPayload& pl = *payloads[r];
    for (std::size_t m = 0; m < 3; ++m)
      res.rows[m].push_back(
          {r, pl.reports[m], pl.elapsed[m], m == 1 ? pl.calibration_seconds : -1.0});
  }
  return res;
}

// ---- file outputs ------------------------------------------------------------

std::ofstream open_out(const std::string& path) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open for writing: " + path);
  return f;
}

void write_summary_csv(const std::string& path, const BenchmarkResult& res) {
  std::ofstream f = open_out(path);
  f << "method";
  for (const char* name : kBenchmarkMetrics) f << ',' << name << "_mean," << name << "_sd";
  f << '\n';
  for (std::size_t m = 0; m < res.methods.size(); ++m) {
    f << res.methods[m];
    for (std::size_t i = 0; i < kBenchmarkMetrics.size(); ++i) {
      std::vector<double> vals;
      vals.reserve(res.rows[m].size());
      for (const MethodReplicate& row : res.rows[m]) vals.push_back(report_metrics(row.report)[i]);
      const auto [mean, sd] = mean_sd(vals);
      f << ',' << format_double(mean) << ',' << format_double(sd);
    }
    f << '\n';
  }
}

void write_replicates_csv(const std::string& path, const BenchmarkResult& res) {
  std::ofstream f = open_out(path);
  f << "method,rep";
  for (const char* name : kBenchmarkMetrics) f << ',' << name;
  f << '\n';
  for (std::size_t m = 0; m < res.methods.size(); ++m)
    for (const MethodReplicate& row : res.rows[m]) {
      f << res.methods[m] << ',' << row.rep;
      for (double v : report_metrics(row.report)) f << ',' << format_double(v);
      f << '\n';
    }
}

void write_timings_csv(const std::string& path, const BenchmarkResult& res) {
  std::ofstream f = open_out(path);
  f << "method,rep,elapsed_seconds,calibration_seconds\n";
  for (std::size_t m = 0; m < res.methods.size(); ++m)
    for (const MethodReplicate& row : res.rows[m])
      f << res.methods[m] << ',' << row.rep << ',' << format_double(row.elapsed_seconds)
        << ',' << format_double(row.calibration_seconds) << '\n';
}

void write_pit_export(const std::string& path, const BenchmarkResult& res) {
  std::ofstream f = open_out(path);
  f << "method,rep,pit\n";
  for (std::size_t m = 0; m < res.methods.size(); ++m)
    for (const MethodReplicate& row : res.rows[m])
      for (double v : row.report.pit_values)
        f << res.methods[m] << ',' << row.rep << ',' << format_double(v) << '\n';
}

void write_overlay_export(const std::string& path, const BenchmarkResult& res,
                          const RepPayload& pl) {
  std::ofstream f = open_out(path);
  f << "method,kind,value\n";
  for (std::size_t m = 0; m < res.methods.size(); ++m) {
    const CellDraws cells =
        collect_withheld(pl.ensembles[m].draws, pl.truth, pl.block.R);
    const std::size_t L = cells.truths.size(), M = cells.draws.n_cols;
    for (double t : cells.truths) f << res.methods[m] << ",truth," << format_double(t) << '\n';
    for (std::size_t l = 0; l < L; ++l)
      for (std::size_t d = 0; d < M; ++d)
        f << res.methods[m] << ",draw," << format_double(cells.draws(l, d)) << '\n';
    for (std::size_t l = 0; l < L; ++l) {
      double mean = 0.0;
      for (std::size_t d = 0; d < M; ++d) mean += cells.draws(l, d);
      f << res.methods[m] << ",mean," << format_double(mean / static_cast<double>(M)) << '\n';
    }
  }
}

void export_rep_dir(const std::string& dir, const BenchmarkResult& res, const RepPayload& pl,
                    const std::vector<std::string>& colnames) {
  fs::create_directories(dir);
  write_csv(dir + "/truth.csv", colnames, pl.truth);
  write_csv(dir + "/masked.csv", colnames, pl.block.Y, &pl.block.R);
  Matrix mask01(pl.truth.n_rows, pl.truth.n_cols);
  for (std::size_t i = 0; i < mask01.data.size(); ++i)
    mask01.data[i] = pl.block.R[i] ? 1.0 : 0.0;
  write_csv(dir + "/mask.csv", colnames, mask01);
  write_csv(dir + "/design.csv", default_columns(pl.block.X.n_cols, "x"), pl.block.X);
  for (std::size_t m = 0; m < res.methods.size(); ++m)
    write_ensemble(dir + "/" + res.methods[m], pl.ensembles[m]);
}

void write_outputs(const std::string& out_dir, const BenchmarkResult& res,
                   const std::vector<std::optional<RepPayload>>& payloads,
                   const std::vector<std::string>& colnames) {
  fs::create_directories(out_dir);
  write_summary_csv(out_dir + "/summary.csv", res);
  write_replicates_csv(out_dir + "/replicates.csv", res);
  write_timings_csv(out_dir + "/timings.csv", res);
  write_pit_export(out_dir + "/pit_export.csv", res);

  const RepPayload* first = nullptr;
  for (const auto& pl : payloads)
    if (pl) {
      first = &*pl;
      break;
    }
  if (first != nullptr) write_overlay_export(out_dir + "/overlay_export.csv", res, *first);

  // keep full ensemble directories for the first, middle, and last replicate
  const std::size_t reps = payloads.size();
  std::set<std::size_t> sampled = {0, reps / 2, reps - 1};
  for (std::size_t r : sampled)
    if (r < reps && payloads[r])
      export_rep_dir(out_dir + "/ensembles/" + rep_dirname(r), res, *payloads[r], colnames);
}

}  // namespace

void SpatialSimConfig::validate() const {
  if (n < 2) throw ValidationError("simulate_spatial: n must be >= 2");
  if (p < 2) throw ValidationError("simulate_spatial: p must be >= 2");
  if (grid_x < 1 || grid_y < 1 || p > grid_x * grid_y)
    throw ValidationError("simulate_spatial: invalid lattice (need p <= grid_x * grid_y)");
  if (!(kernel_scale > 0.0)) throw ValidationError("simulate_spatial: kernel_scale must be > 0");
  if (!(kernel_var > 0.0)) throw ValidationError("simulate_spatial: kernel_var must be > 0");
  if (nugget < 0.0) throw ValidationError("simulate_spatial: nugget must be >= 0");
  if (!(mask_rate > 0.0 && mask_rate < 1.0))
    throw ValidationError("simulate_spatial: mask_rate must be in (0, 1)");
}

SpatialSim simulate_spatial(Rng& rng, const SpatialSimConfig& cfg) {
  cfg.validate();
  const std::size_t npts = cfg.grid_x * cfg.grid_y;
  const std::size_t n = cfg.n, p = cfg.p;

  Matrix kk(npts, npts);
  const double nug = std::max(cfg.nugget, 1e-6 * cfg.kernel_var);
  {
    std::vector<std::pair<double, double>> pts;
    pts.reserve(npts);
    for (std::size_t i = 0; i < cfg.grid_x; ++i)
      for (std::size_t j = 0; j < cfg.grid_y; ++j)
        pts.emplace_back(static_cast<double>(i), static_cast<double>(j));
    for (std::size_t a = 0; a < npts; ++a)
      for (std::size_t b = 0; b < npts; ++b) {
        const double d = std::hypot(pts[a].first - pts[b].first, pts[a].second - pts[b].second);
        kk(a, b) = cfg.kernel_var * std::exp(-d / cfg.kernel_scale) + (a == b ? nug : 0.0);
      }
  }
  const CholeskyFactor lk = cholesky(kk);

  Matrix z(n, npts);
  rng.fill_normal(z);
  const Matrix e_full = matmul(z, transpose(lk.lower));

  // keep the p highest-variance sites (ties by site index), ascending order
  std::vector<double> var(npts, 0.0);
  for (std::size_t j = 0; j < npts; ++j) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += e_full(i, j);
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = e_full(i, j) - mean;
      var[j] += d * d;
    }
    var[j] /= static_cast<double>(n);
  }
  std::vector<std::size_t> keep(npts);
  for (std::size_t j = 0; j < npts; ++j) keep[j] = j;
  std::stable_sort(keep.begin(), keep.end(),
                   [&](std::size_t a, std::size_t b) { return var[a] > var[b]; });
  keep.resize(p);
  std::sort(keep.begin(), keep.end());

  Matrix e(n, p);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) e(i, j) = e_full(i, keep[j]);
  Matrix kk_kept(p, p);
  for (std::size_t a = 0; a < p; ++a)
    for (std::size_t b = 0; b < p; ++b) kk_kept(a, b) = kk(keep[a], keep[b]);

  Vector age(n);
  for (double& v : age) v = 2.0 * rng.uniform() - 1.0;
  double amean = 0.0;
  for (double v : age) amean += v;
  amean /= static_cast<double>(n);
  double avar = 0.0;
  for (double v : age) avar += (v - amean) * (v - amean);
  const double asd = std::sqrt(avar / static_cast<double>(n));
  Matrix x(n, 2);
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    x(i, 1) = (age[i] - amean) / asd;
  }

  SpatialSim sim;
  sim.Y = Matrix(n, p);
  Vector slope(p);
  for (std::size_t j = 0; j < p; ++j)
    slope[j] = j < cfg.strong_slope_cols ? cfg.strong_slope : cfg.weak_slope;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < p; ++j) sim.Y(i, j) = x(i, 1) * slope[j] + e(i, j);

  Vector mu0(p, 0.0), sd0(p, 0.0);
  for (std::size_t j = 0; j < p; ++j) {
    for (std::size_t i = 0; i < n; ++i) mu0[j] += sim.Y(i, j);
    mu0[j] /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
      const double d = sim.Y(i, j) - mu0[j];
      sd0[j] += d * d;
    }
    sd0[j] = std::sqrt(sd0[j] / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) sim.Y(i, j) = (sim.Y(i, j) - mu0[j]) / sd0[j];
  }

  sim.X = x;
  sim.B_std = Matrix(2, p);
  sim.Sigma_std = Matrix(p, p);
  for (std::size_t j = 0; j < p; ++j) {
    sim.B_std(0, j) = -mu0[j] / sd0[j];
    sim.B_std(1, j) = slope[j] / sd0[j];
    for (std::size_t b = 0; b < p; ++b) sim.Sigma_std(j, b) = kk_kept(j, b) / (sd0[j] * sd0[b]);
  }
  return sim;
}

std::vector<std::uint8_t> mask_mcar(Rng& rng, std::size_t n, std::size_t p, double rate,
                                    std::size_t min_obs, std::size_t min_missing,
                                    std::size_t attempts) {
  if (!(rate > 0.0 && rate < 1.0)) throw ValidationError("mask_mcar: rate must be in (0, 1)");
  std::vector<std::uint8_t> r(n * p);
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    std::size_t missing = 0;
    std::vector<std::size_t> obs(p, 0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < p; ++j) {
        const bool keep = rng.uniform() >= rate;
        r[i * p + j] = keep ? 1 : 0;
        if (keep)
          ++obs[j];
        else
          ++missing;
      }
    if (missing >= min_missing &&
        *std::min_element(obs.begin(), obs.end()) >= min_obs)
      return r;
  }
  throw ValidationError("mask_mcar: column constraints unsatisfied after " +
                        std::to_string(attempts) + " redraws");
}

const std::array<const char*, 14> kBenchmarkMetrics = {
    "rmse",     "mae",    "p_central", "cov_iqr", "cov90",
    "cov95",    "pit_mean", "pit_sd",  "pit_ks",  "mean_gap",
    "sd_gap",   "iqr_gap", "qq_gap",   "support_violation_rate"};

Vector report_metrics(const DiagnosticsReport& rep) {
  return {rep.rmse,     rep.mae,    rep.p_central, rep.cov_iqr, rep.cov90,
          rep.cov95,    rep.pit_mean, rep.pit_sd,  rep.pit_ks,  rep.mean_gap,
          rep.sd_gap,   rep.iqr_gap, rep.qq_gap,   rep.support_violation_rate};
}

std::pair<double, double> mean_sd(const std::vector<double>& v) {
  double sum = 0.0;
  for (double x : v) sum += x;
  const double mean = sum / static_cast<double>(v.size());
  if (v.size() < 2) return {mean, 0.0};
  double ss = 0.0;
  for (double x : v) ss += (x - mean) * (x - mean);
  return {mean, std::sqrt(ss / static_cast<double>(v.size() - 1))};
}

double BenchmarkResult::metric_mean(const std::string& method, const std::string& metric) const {
  std::size_t m = methods.size();
  for (std::size_t i = 0; i < methods.size(); ++i)
    if (methods[i] == method) m = i;
  if (m == methods.size()) throw ValidationError("unknown method: " + method);
  std::vector<double> vals;
  vals.reserve(rows[m].size());
  if (metric == "time") {
    for (const MethodReplicate& row : rows[m]) vals.push_back(row.elapsed_seconds);
  } else {
    std::size_t idx = kBenchmarkMetrics.size();
    for (std::size_t i = 0; i < kBenchmarkMetrics.size(); ++i)
      if (metric == kBenchmarkMetrics[i]) idx = i;
    if (idx == kBenchmarkMetrics.size()) throw ValidationError("unknown metric: " + metric);
    for (const MethodReplicate& row : rows[m]) vals.push_back(report_metrics(row.report)[idx]);
  }
  if (vals.empty()) throw ValidationError("no completed replicates for method " + method);
  return mean_sd(vals).first;
}

void SpatialBenchConfig::validate() const {
  sim.validate();
  chain.validate();
  fcs.validate();
  if (sim.replicates < 2) throw ValidationError("benchmark: replicates must be >= 2");
  if (!(calib_holdout > 0.0 && calib_holdout < 1.0))
    throw ValidationError("benchmark: calib_holdout must be in (0, 1)");
  if (!(calib_tau_b > 0.0) || !(calib_tau_a > 0.0))
    throw ValidationError("benchmark: calibration damping constants must be > 0");
  if (shared_sweeps < 1) throw ValidationError("benchmark: shared_sweeps must be >= 1");
  if (workers < 1) throw ValidationError("benchmark: workers must be >= 1");
}

void LowdimBenchConfig::validate() const {
  chain.validate();
  fcs.validate();
  if (target_cols.empty()) throw ValidationError("lowdim benchmark: no target columns");
  if (!(mask_rate > 0.0 && mask_rate < 1.0))
    throw ValidationError("lowdim benchmark: mask_rate must be in (0, 1)");
  if (replicates < 2) throw ValidationError("lowdim benchmark: replicates must be >= 2");
  if (min_obs < 2) throw ValidationError("lowdim benchmark: min_obs must be >= 2");
  if (!(hima_alpha >= 0.0)) throw ValidationError("lowdim benchmark: hima_alpha must be >= 0");
  if (!(prior_s0_scale > 0.0))
    throw ValidationError("lowdim benchmark: prior_s0_scale must be > 0");
  if (shared_sweeps < 1) throw ValidationError("lowdim benchmark: shared_sweeps must be >= 1");
  if (workers < 1) throw ValidationError("lowdim benchmark: workers must be >= 1");
}

BenchmarkResult run_spatial_benchmark(const SpatialBenchConfig& cfg) {
  cfg.validate();
  std::vector<std::optional<RepPayload>> payloads;
  BenchmarkResult res =
      drive(cfg.sim.replicates, cfg.workers, cfg.allow_skip,
            [&](std::size_t r) { return spatial_rep(cfg, r); }, payloads);

  std::vector<double> floors;
  for (const auto& pl : payloads)
    if (pl && std::isfinite(pl->floor_rmse)) floors.push_back(pl->floor_rmse);
  if (!floors.empty()) {
    res.oracle_rmse = mean_sd(floors).first;
    logf(LogLevel::Info, "spatial benchmark: true-parameter conditional-mean rmse %.4f",
         res.oracle_rmse);
  }
  if (!cfg.out_dir.empty())
    write_outputs(cfg.out_dir, res, payloads, default_columns(cfg.sim.p, "v"));
  return res;
}

BenchmarkResult run_lowdim_benchmark(const LowdimBenchConfig& cfg) {
  cfg.validate();
  const CsvTable tab = read_csv(cfg.csv_path);
  std::vector<std::size_t> used;
  auto col_index = [&](const std::string& name) {
    for (std::size_t j = 0; j < tab.header.size(); ++j)
      if (tab.header[j] == name) return j;
    throw ValidationError("lowdim benchmark: column not in " + cfg.csv_path + ": " + name);
  };
  std::vector<std::size_t> design_idx, target_idx;
  for (const std::string& name : cfg.design_cols) design_idx.push_back(col_index(name));
  for (const std::string& name : cfg.target_cols) target_idx.push_back(col_index(name));
  used = design_idx;
  used.insert(used.end(), target_idx.begin(), target_idx.end());

  std::vector<std::size_t> complete;
  for (std::size_t i = 0; i < tab.values.n_rows; ++i) {
    bool ok = true;
    for (std::size_t j : used) ok = ok && tab.is_observed(i, j);
    if (ok) complete.push_back(i);
  }
  if (complete.size() < 8)
    throw TooFewCompleteRows("lowdim benchmark: " + std::to_string(complete.size()) +
                             " complete rows in " + cfg.csv_path + ", need >= 8");

  const std::size_t n = complete.size(), p = target_idx.size();
  Matrix y(n, p), x(n, 1 + design_idx.size());
  for (std::size_t i = 0; i < n; ++i) {
    x(i, 0) = 1.0;
    for (std::size_t c = 0; c < design_idx.size(); ++c)
      x(i, 1 + c) = tab.values(complete[i], design_idx[c]);
    for (std::size_t j = 0; j < p; ++j) y(i, j) = tab.values(complete[i], target_idx[j]);
  }

  std::vector<std::optional<RepPayload>> payloads;
  BenchmarkResult res =
      drive(cfg.replicates, cfg.workers, cfg.allow_skip,
            [&](std::size_t r) { return lowdim_rep(cfg, y, x, cfg.target_cols, r); },
            payloads);
  if (!cfg.out_dir.empty()) write_outputs(cfg.out_dir, res, payloads, cfg.target_cols);
  return res;
}

}  // namespace covmode
