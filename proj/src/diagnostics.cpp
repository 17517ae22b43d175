#include "covmode/diagnostics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>

#include "covmode/csv.hpp"
#include "covmode/errors.hpp"
#include "json.hpp"

namespace covmode {

namespace {

double mean_of(const Vector& v) {
  double s = 0.0;
  for (double x : v) s += x;
  return s / static_cast<double>(v.size());
}

double sd_pop(const Vector& v) {
  const double m = mean_of(v);
  double s = 0.0;
  for (double x : v) s += (x - m) * (x - m);
  return std::sqrt(s / static_cast<double>(v.size()));
}

}  // namespace

PooledEstimate rubin_pool(const Vector& estimates, const Vector& variances) {
  const std::size_t m = estimates.size();
  if (m < 2) throw ValidationError("rubin_pool: needs at least two imputations");
  if (variances.size() != m) throw ValidationError("rubin_pool: estimate/variance count mismatch");
  for (double v : variances)
    if (!(v >= 0.0)) throw ValidationError("rubin_pool: negative within-imputation variance");

  PooledEstimate out;
  out.Q_bar = mean_of(estimates);
  out.U_bar = mean_of(variances);
  double b = 0.0;
  for (double q : estimates) b += (q - out.Q_bar) * (q - out.Q_bar);
  out.B_M = b / static_cast<double>(m - 1);
  const double infl = 1.0 + 1.0 / static_cast<double>(m);
  out.T_M = out.U_bar + infl * out.B_M;

  const double inf = std::numeric_limits<double>::infinity();
  if (out.B_M == 0.0) {
    out.r = 0.0;
    out.nu_mi = inf;  // no between-imputation spread: complete-data inference
  } else if (out.U_bar == 0.0) {
    out.zero_within = true;
    out.r = inf;
    out.nu_mi = inf;
  } else {
    out.r = infl * out.B_M / out.U_bar;
    const double t = 1.0 + 1.0 / out.r;
    out.nu_mi = static_cast<double>(m - 1) * t * t;
  }
  return out;
}

double pit_rank_cell(Rng& rng, const Vector& draws, double truth) {
  if (draws.empty()) throw ValidationError("pit_rank_cell: needs at least one draw");
  std::size_t below = 0, equal = 0;
  for (double d : draws) {
    if (d < truth)
      ++below;
    else if (d == truth)
      ++equal;
  }
  const double u = rng.uniform_open();
  return (static_cast<double>(below) + u * static_cast<double>(equal + 1)) /
         static_cast<double>(draws.size() + 1);
}

double pit_consistent_coverage(const Vector& pits, double alpha) {
  if (pits.empty()) throw ValidationError("coverage: no PIT values");
  const double lo = alpha / 2.0, hi = 1.0 - alpha / 2.0;
  std::size_t c = 0;
  for (double p : pits) c += (p >= lo && p <= hi) ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(pits.size());
}

double central_mass(const Vector& pits) {
  if (pits.empty()) throw ValidationError("central_mass: no PIT values");
  std::size_t c = 0;
  for (double p : pits) c += (p >= 0.4 && p <= 0.6) ? 1 : 0;
  return static_cast<double>(c) / static_cast<double>(pits.size());
}

double ks_uniform(Vector pits) {
  if (pits.empty()) throw ValidationError("ks_uniform: no PIT values");
  std::sort(pits.begin(), pits.end());
  const double L = static_cast<double>(pits.size());
  double worst = 0.0;
  for (std::size_t i = 0; i < pits.size(); ++i) {
    const double hi = static_cast<double>(i + 1) / L - pits[i];
    const double lo = pits[i] - static_cast<double>(i) / L;
    worst = std::max(worst, std::max(hi, lo));
  }
  return worst;
}

double quantile_sorted(const Vector& sorted, double q) {
  if (sorted.empty()) throw ValidationError("quantile: empty sample");
  if (sorted.size() == 1) return sorted[0];
  const double h = q * static_cast<double>(sorted.size() - 1);
  const std::size_t lo = static_cast<std::size_t>(std::floor(h));
  const std::size_t hi = std::min(lo + 1, sorted.size() - 1);
  const double f = h - static_cast<double>(lo);
  return sorted[lo] + f * (sorted[hi] - sorted[lo]);
}

MarginalGaps marginal_gaps(const Vector& truths, const Vector& pooled_draws) {
  if (truths.size() < 2 || pooled_draws.empty())
    throw ValidationError("marginal_gaps: needs at least two truths and one draw");
  MarginalGaps g;
  g.mean_gap = std::abs(mean_of(pooled_draws) - mean_of(truths));
  g.sd_gap = std::abs(sd_pop(pooled_draws) - sd_pop(truths));

  Vector ds = pooled_draws, ts = truths;
  std::sort(ds.begin(), ds.end());
  std::sort(ts.begin(), ts.end());
  const double iqr_d = quantile_sorted(ds, 0.75) - quantile_sorted(ds, 0.25);
  const double iqr_t = quantile_sorted(ts, 0.75) - quantile_sorted(ts, 0.25);
  g.iqr_gap = std::abs(iqr_d - iqr_t);

  double acc = 0.0;
  int cnt = 0;
  for (int step = 1; step <= 19; ++step) {
    const double q = 0.05 * step;
    acc += std::abs(quantile_sorted(ds, q) - quantile_sorted(ts, q));
    ++cnt;
  }
  g.qq_gap = acc / cnt;
  return g;
}

std::pair<double, double> error_metrics(const Vector& truths, const Vector& posterior_means) {
  if (truths.empty() || truths.size() != posterior_means.size())
    throw ValidationError("error_metrics: shape mismatch");
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < truths.size(); ++i) {
    const double d = posterior_means[i] - truths[i];
    se += d * d;
    ae += std::abs(d);
  }
  const double L = static_cast<double>(truths.size());
  return {std::sqrt(se / L), ae / L};
}

double support_violations(const Matrix& cell_draws,
                          const std::vector<std::pair<double, double>>& cell_bounds) {
  if (cell_draws.n_rows != cell_bounds.size())
    throw ValidationError("support_violations: bounds count mismatch");
  if (cell_draws.n_rows == 0) return 0.0;
  std::size_t bad = 0;
  for (std::size_t l = 0; l < cell_draws.n_rows; ++l) {
    const auto [lo, hi] = cell_bounds[l];
    for (std::size_t m = 0; m < cell_draws.n_cols; ++m) {
      const double d = cell_draws(l, m);
      bad += (d < lo || d > hi) ? 1 : 0;
    }
  }
  return static_cast<double>(bad) /
         static_cast<double>(cell_draws.n_rows * cell_draws.n_cols);
}

CellDraws collect_withheld(const std::vector<Matrix>& imputations, const Matrix& Y_true,
                           const std::vector<std::uint8_t>& R) {
  if (imputations.empty()) throw ValidationError("collect_withheld: no imputations");
  const std::size_t n = Y_true.n_rows, p = Y_true.n_cols, m = imputations.size();
  std::size_t L = 0;
  for (auto v : R) L += v ? 0 : 1;

  CellDraws out;
  out.draws = Matrix(L, m);
  out.truths.resize(L);
  out.cols.resize(L);
  std::size_t l = 0;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < p; ++j) {
      if (R[i * p + j]) continue;
      out.truths[l] = Y_true(i, j);
      out.cols[l] = j;
      for (std::size_t d = 0; d < m; ++d) out.draws(l, d) = imputations[d](i, j);
      ++l;
    }
  }
  return out;
}

DiagnosticsReport diagnose(const CellDraws& cells,
                           const std::vector<std::pair<double, double>>& col_bounds,
                           std::uint64_t seed) {
  const std::size_t L = cells.draws.n_rows, m = cells.draws.n_cols;
  if (L == 0) throw ValidationError("diagnose: no withheld cells");

  DiagnosticsReport rep;
  Vector means(L);
  Vector row(m);
  Rng rng(seed);
  rep.pit_values.resize(L);
  for (std::size_t l = 0; l < L; ++l) {
    double s = 0.0;
    for (std::size_t d = 0; d < m; ++d) {
      row[d] = cells.draws(l, d);
      s += row[d];
    }
    means[l] = s / static_cast<double>(m);
    rep.pit_values[l] = pit_rank_cell(rng, row, cells.truths[l]);
  }

  std::tie(rep.rmse, rep.mae) = error_metrics(cells.truths, means);
  rep.pit_mean = mean_of(rep.pit_values);
  rep.pit_sd = sd_pop(rep.pit_values);
  rep.pit_ks = ks_uniform(rep.pit_values);
  rep.p_central = central_mass(rep.pit_values);
  rep.cov_iqr = pit_consistent_coverage(rep.pit_values, 0.5);
  rep.cov90 = pit_consistent_coverage(rep.pit_values, 0.10);
  rep.cov95 = pit_consistent_coverage(rep.pit_values, 0.05);

  Vector pooled(L * m);
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t d = 0; d < m; ++d) pooled[l * m + d] = cells.draws(l, d);
  const MarginalGaps g = marginal_gaps(cells.truths, pooled);
  rep.mean_gap = g.mean_gap;
  rep.sd_gap = g.sd_gap;
  rep.iqr_gap = g.iqr_gap;
  rep.qq_gap = g.qq_gap;

  std::vector<std::pair<double, double>> cell_bounds(L);
  for (std::size_t l = 0; l < L; ++l) {
    if (cells.cols[l] >= col_bounds.size())
      throw ValidationError("diagnose: column without support bounds");
    cell_bounds[l] = col_bounds[cells.cols[l]];
  }
  rep.support_violation_rate = support_violations(cells.draws, cell_bounds);
  return rep;
}

void write_report_json(const std::string& path, const DiagnosticsReport& rep,
                       const std::string& method) {
  nlohmann::json j;
  j["method"] = method;
  j["rmse"] = rep.rmse;
  j["mae"] = rep.mae;
  j["pit_mean"] = rep.pit_mean;
  j["pit_sd"] = rep.pit_sd;
  j["pit_ks"] = rep.pit_ks;
  j["p_central"] = rep.p_central;
  j["cov_iqr"] = rep.cov_iqr;
  j["cov90"] = rep.cov90;
  j["cov95"] = rep.cov95;
  j["mean_gap"] = rep.mean_gap;
  j["sd_gap"] = rep.sd_gap;
  j["iqr_gap"] = rep.iqr_gap;
  j["qq_gap"] = rep.qq_gap;
  j["support_violation_rate"] = rep.support_violation_rate;
  j["elapsed_seconds"] = rep.elapsed_seconds;
  j["n_withheld"] = rep.pit_values.size();
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
}

void write_pit_csv(const std::string& path, const Vector& pits) {
  Matrix col(pits.size(), 1);
  for (std::size_t i = 0; i < pits.size(); ++i) col(i, 0) = pits[i];
  write_csv(path, {"pit"}, col);
}

void write_overlay_csv(const std::string& path, const CellDraws& cells) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open for writing: " + path);
  out << "kind,value\n";
  const std::size_t L = cells.draws.n_rows, m = cells.draws.n_cols;
  for (std::size_t l = 0; l < L; ++l) out << "truth," << format_double(cells.truths[l]) << '\n';
  for (std::size_t l = 0; l < L; ++l)
    for (std::size_t d = 0; d < m; ++d)
      out << "draw," << format_double(cells.draws(l, d)) << '\n';
  for (std::size_t l = 0; l < L; ++l) {
    double s = 0.0;
    for (std::size_t d = 0; d < m; ++d) s += cells.draws(l, d);
    out << "mean," << format_double(s / static_cast<double>(m)) << '\n';
  }
  if (!out) throw IoError("write failed: " + path);
}

}  // namespace covmode
