#pragma once

// Length-optimal equivariant confidence sets for extreme quantiles:
//
//   S(x*) = { y : sum_xi W(xi) kappa_xi(x*) f_{X*|xi}(x*) < sum_xi Lambda(xi) f_{Y*(xi),X*|xi}(y, x*) }
//
// with point masses Lambda on the xi grid chosen so that the coverage
// P_xi(Y*(xi) in S(X*)) equals the nominal level at every grid point.
// Coverage is estimated by importance sampling from the uniform mixture over
// the grid, and Lambda is found by coordinate-wise exact solves.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>
#include <utility>
#include <vector>

#include "tailcen/error.hpp"
#include "tailcen/fixed_k/config.hpp"
#include "tailcen/fixed_k/densities.hpp"
#include "tailcen/fixed_k/ev.hpp"
#include "tailcen/fixed_k/lr_test.hpp"
#include "tailcen/parallel.hpp"
#include "tailcen/tail_data.hpp"
#include "tailcen/types.hpp"

namespace tailcen::fk {

struct LambdaCertificate {
  /// kkt_deviation on the solver's own draws.
  double max_deviation = std::numeric_limits<double>::infinity();
  int iterations = 0;
  bool converged = false;
  std::vector<double> coverage;
};

struct WeightTable {
  std::size_t k = 0, m = 0;
  double h = 1.0;
  double level = 0.95;
  std::vector<double> xi_grid;
  std::vector<double> weights;
  /// Lambda on xi_grid.
  std::vector<double> masses;
  std::uint64_t seed = 0;
  std::size_t draws = 0;
  LambdaCertificate certificate;
};

/// Simulated pool for coverage estimation: per draw j and grid point l,
/// ratio(j, l) = f_{Y*,X*|xi_l}(y_j, x*_j) / LHS(x*_j), and the importance
/// weight(j, l) = f_{Y*,X*|xi_l}(y_j, x*_j) / p(y_j, x*_j).
struct CoveragePool {
  std::size_t N = 0, G = 0;
  std::vector<double> ratio;
  std::vector<double> weight;
  std::vector<double> weight_sum;

  /// Per-grid-point coverage of S with masses `lambda`, plus standard errors.
  std::pair<std::vector<double>, std::vector<double>> coverage(const std::vector<double>& lambda) const {
    std::vector<double> hit(G, 0.0);
    std::vector<char> in(N);
    for (std::size_t j = 0; j < N; ++j) {
      const double* r = &ratio[j * G];
      double s = 0.0;
      for (std::size_t l = 0; l < G; ++l) s += lambda[l] * r[l];
      in[j] = s > 1.0;
    }
    for (std::size_t j = 0; j < N; ++j) {
      if (!in[j]) continue;
      const double* w = &weight[j * G];
      for (std::size_t l = 0; l < G; ++l) hit[l] += w[l];
    }
    std::vector<double> cov(G), se(G, 0.0);
    for (std::size_t l = 0; l < G; ++l) cov[l] = hit[l] / weight_sum[l];
    for (std::size_t j = 0; j < N; ++j) {
      const double* w = &weight[j * G];
      for (std::size_t l = 0; l < G; ++l) {
        const double d = (in[j] ? 1.0 : 0.0) - cov[l];
        se[l] += w[l] * w[l] * d * d;
      }
    }
    for (std::size_t l = 0; l < G; ++l) se[l] = std::sqrt(se[l]) / weight_sum[l];
    return {cov, se};
  }
};

inline CoveragePool build_coverage_pool(std::size_t k, std::size_t m, double h, const FkConfig& cfg, StreamTag tag,
                                        std::size_t draws) {
  cfg.validate();
  if (k < 3) throw ValidationError("Lagrange weights: k >= 3 required");
  if (!(h > 0.0)) throw ValidationError("Lagrange weights: h must be > 0");
  const auto& grid = cfg.xi_grid;
  const auto W = cfg.resolved_weights();
  CoveragePool pool;
  pool.N = draws;
  pool.G = grid.size();
  const std::size_t G = pool.G;
  pool.ratio.resize(draws * G);
  pool.weight.resize(draws * G);
  const std::uint64_t hbits = static_cast<std::uint64_t>(std::llround(h * 1e9));
  parallel_for(draws, cfg.threads, [&](std::size_t j, unsigned) {
    Philox4x32 rng(cfg.seed, stream_id({static_cast<std::uint64_t>(tag), k, m, hbits, j}));
    const EvDraw d = simulate_self_normalized(grid[j % G], m, k, h, rng);
    XstarKernel ker(d.xstar, cfg.quad);
    std::vector<double> lk(G), lr(G);
    for (std::size_t l = 0; l < G; ++l) lk[l] = ker.log_kappa_f(grid[l]);
    const double lhs = log_mixture(lk, W);
    for (std::size_t l = 0; l < G; ++l) lr[l] = ker.log_joint(d.ystar, grid[l], h);
    const double logp = log_sum_exp(lr.data(), G) - std::log(static_cast<double>(G));
    for (std::size_t l = 0; l < G; ++l) {
      pool.ratio[j * G + l] = std::exp(std::min(lr[l] - lhs, 690.0));
      pool.weight[j * G + l] = std::exp(lr[l] - logp);
    }
  });
  pool.weight_sum.assign(G, 0.0);
  for (std::size_t j = 0; j < draws; ++j)
    for (std::size_t l = 0; l < G; ++l) pool.weight_sum[l] += pool.weight[j * G + l];
  return pool;
}

/// Distance from the optimality conditions: coverage may exceed the level
/// only where Lambda_l = 0, and may never fall below it.
inline double kkt_deviation(const std::vector<double>& cov, const std::vector<double>& lambda, double level) {
  double d = 0.0;
  for (std::size_t l = 0; l < cov.size(); ++l)
    d = std::max(d, lambda[l] > 0.0 ? std::abs(cov[l] - level) : std::max(0.0, level - cov[l]));
  return d;
}

/// Gauss-Seidel search for Lambda. Coverage at xi_l is a nondecreasing step
/// function of Lambda_l with the other masses held fixed: draw j joins S once
/// Lambda_l exceeds (1 - sum_{i != l} Lambda_i r_ji) / r_jl. Each coordinate
/// step sorts these thresholds and places Lambda_l at the weighted crossing of
/// the target (zero when coverage is reached without it). Sweeps repeat until
/// kkt_deviation is within cfg.lambda_tol, at most cfg.lambda_max_iter times.
/// Coverage at grid points with zero mass can stay above the level: the
/// length-optimal set generally has slack there, and equal coverage at every
/// grid point is not attainable with nonnegative masses.
/// Returns the best sweep; check certificate.converged.
inline WeightTable solve_lambda_unchecked(std::size_t k, std::size_t m, double h, const FkConfig& cfg) {
  const CoveragePool pool = build_coverage_pool(k, m, h, cfg, StreamTag::lambda_solve, cfg.lambda_draws);
  const std::size_t G = pool.G, N = pool.N;
  const double target = cfg.level;

  // Start from a common mass that gives the right average coverage.
  std::vector<double> lam(G, 1.0);
  {
    auto mean_cov = [&](double c) {
      const auto cov = pool.coverage(std::vector<double>(G, std::exp(c))).first;
      double s = 0.0;
      for (double v : cov) s += v;
      return s / static_cast<double>(G);
    };
    double a = -60.0, b = 60.0;
    for (int it = 0; it < 60; ++it) {
      const double c = 0.5 * (a + b);
      (mean_cov(c) < target ? a : b) = c;
    }
    std::fill(lam.begin(), lam.end(), std::exp(0.5 * (a + b)));
  }

  std::vector<double> s(N, 0.0);
  for (std::size_t j = 0; j < N; ++j)
    for (std::size_t l = 0; l < G; ++l) s[j] += lam[l] * pool.ratio[j * G + l];

  std::vector<std::pair<double, double>> thr;  // (threshold, weight)
  thr.reserve(N);
  auto update = [&](std::size_t l) {
    thr.clear();
    double always = 0.0;
    for (std::size_t j = 0; j < N; ++j) {
      const double r = pool.ratio[j * G + l], w = pool.weight[j * G + l];
      const double rest = s[j] - lam[l] * r;
      if (rest > 1.0)
        always += w;
      else if (r > 0.0)
        thr.emplace_back((1.0 - rest) / r, w);
    }
    const double need = target * pool.weight_sum[l];
    double next = 0.0;
    if (always < need && !thr.empty()) {
      std::sort(thr.begin(), thr.end());
      double c = always;
      std::size_t i = 0;
      for (; i < thr.size(); ++i) {
        if (c + thr[i].second >= need) break;
        c += thr[i].second;
      }
      if (i == thr.size()) i = thr.size() - 1;
      // Stop below or above thr[i], whichever lands closer to the target.
      const bool take = (c + thr[i].second - need) < (need - c);
      if (take) {
        next = i + 1 < thr.size() ? std::sqrt(thr[i].first * thr[i + 1].first) : 2.0 * thr[i].first;
      } else {
        next = i > 0 ? std::sqrt(thr[i - 1].first * thr[i].first) : 0.5 * thr[i].first;
      }
    }
    for (std::size_t j = 0; j < N; ++j) s[j] += (next - lam[l]) * pool.ratio[j * G + l];
    lam[l] = next;
  };

  std::vector<double> best_lam = lam, best_cov;
  double best_dev = std::numeric_limits<double>::infinity();
  int it = 0;
  for (; it < cfg.lambda_max_iter; ++it) {
    const auto cov = pool.coverage(lam).first;
    const double maxdev = kkt_deviation(cov, lam, target);
    if (maxdev < best_dev) {
      best_dev = maxdev;
      best_lam = lam;
      best_cov = cov;
    }
    if (maxdev <= cfg.lambda_tol) break;
    for (std::size_t l = 0; l < G; ++l) update(l);
    // Recompute the running sums now and then to shed rounding drift.
    if (it % 16 == 15) {
      std::fill(s.begin(), s.end(), 0.0);
      for (std::size_t j = 0; j < N; ++j)
        for (std::size_t l = 0; l < G; ++l) s[j] += lam[l] * pool.ratio[j * G + l];
    }
  }
  WeightTable t;
  t.k = k;
  t.m = m;
  t.h = h;
  t.level = cfg.level;
  t.xi_grid = cfg.xi_grid;
  t.weights = cfg.resolved_weights();
  t.seed = cfg.seed;
  t.draws = cfg.lambda_draws;
  t.masses = best_lam;
  t.certificate.max_deviation = best_dev;
  t.certificate.iterations = it;
  t.certificate.coverage = best_cov;
  t.certificate.converged = best_dev <= cfg.lambda_tol;
  return t;
}

/// As solve_lambda_unchecked, but throws ConvergenceError (diagnostics = the
/// best coverage profile) when cfg.lambda_max_iter is reached.
inline WeightTable solve_lambda(std::size_t k, std::size_t m, double h, const FkConfig& cfg) {
  WeightTable t = solve_lambda_unchecked(k, m, h, cfg);
  if (!t.certificate.converged) {
    const double best_dev = t.certificate.max_deviation;
    const int it = t.certificate.iterations;
    std::ostringstream os;
    os << "solve_lambda(k=" << k << ", m=" << m << ", h=" << h << "): max coverage deviation " << best_dev
       << " after " << it << " iterations exceeds " << cfg.lambda_tol;
    throw ConvergenceError(os.str(), t.certificate.coverage);
  }
  return t;
}

/// Coverage of `table` on a fresh importance-sampled pool (independent of
/// the solver's draws): per-grid coverage and its standard error.
inline std::pair<std::vector<double>, std::vector<double>> check_coverage(const WeightTable& table, const FkConfig& cfg,
                                                                          std::size_t draws) {
  const CoveragePool pool = build_coverage_pool(table.k, table.m, table.h, cfg, StreamTag::lambda_check, draws);
  return pool.coverage(table.masses);
}

struct QuantileSet {
  std::vector<std::pair<double, double>> intervals;
  std::pair<double, double> hull{std::numeric_limits<double>::quiet_NaN(), std::numeric_limits<double>::quiet_NaN()};

  bool empty() const noexcept { return intervals.empty(); }
};

namespace detail {
inline void check_table(const WeightTable& table, std::size_t k, std::size_t m, const FkConfig& cfg) {
  if (table.k != k || table.m != m) {
    std::ostringstream os;
    os << "Lagrange table is for (k=" << table.k << ", m=" << table.m << "), data has (k=" << k << ", m=" << m << ")";
    throw ValidationError(os.str());
  }
  if (table.masses.size() != cfg.xi_grid.size() || table.xi_grid != cfg.xi_grid)
    throw ValidationError("Lagrange table was built on a different xi grid");
}
}  // namespace detail

/// S(x*) scanned on y = sinh(u), u uniform and refined around the maximum of
/// the weighted joint density, with boundaries bisected to a
/// relative resolution of 1e-4.
inline QuantileSet quantile_set(const SelfNormalized& xs, const WeightTable& table, const FkConfig& cfg) {
  detail::check_table(table, xs.k(), xs.m, cfg);
  const auto& grid = cfg.xi_grid;
  const std::size_t G = grid.size();
  XstarKernel ker(xs, cfg.quad);
  std::vector<double> lk(G), loglam(G);
  for (std::size_t l = 0; l < G; ++l) {
    lk[l] = ker.log_kappa_f(grid[l]);
    loglam[l] = table.masses[l] > 0.0 ? std::log(table.masses[l]) : -std::numeric_limits<double>::infinity();
  }
  const double lhs = log_mixture(lk, cfg.resolved_weights());
  std::vector<double> tmp(G);
  // log of the weighted joint density minus the threshold; the set is where
  // this is positive
  auto excess = [&](double y) {
    for (std::size_t l = 0; l < G; ++l)
      tmp[l] = std::isfinite(loglam[l]) ? loglam[l] + ker.log_joint(y, grid[l], table.h) : loglam[l];
    return log_sum_exp(tmp.data(), G) - lhs;
  };
  auto inside = [&](double y) { return excess(y) > 0.0; };
  // Coarse scan in u = asinh(y). A set narrower than a coarse step would be
  // missed, but it contains the maximizer of `excess`, so the bracket around
  // the coarse maximum is rescanned finely.
  const double U = std::asinh(1e6), du = 0.2;
  const int n = static_cast<int>(std::ceil(U / du));
  std::vector<double> us;
  std::vector<double> ex;
  for (int i = -n; i <= n; ++i) {
    us.push_back(i * du);
    ex.push_back(excess(std::sinh(i * du)));
  }
  const auto best = static_cast<std::size_t>(std::max_element(ex.begin(), ex.end()) - ex.begin());
  if (best > 0 && best + 1 < us.size()) {
    constexpr int kFine = 64;
    const double u0 = us[best - 1], step = 2.0 * du / kFine;
    std::vector<double> fu, fe;
    for (int j = 1; j < kFine; ++j) {
      if (j == kFine / 2) continue;
      fu.push_back(u0 + j * step);
      fe.push_back(excess(std::sinh(fu.back())));
    }
    // splice the fine points in between us[best - 1] and us[best + 1]
    const std::size_t half = kFine / 2 - 1;
    us.insert(us.begin() + static_cast<std::ptrdiff_t>(best) + 1, fu.begin() + static_cast<std::ptrdiff_t>(half), fu.end());
    ex.insert(ex.begin() + static_cast<std::ptrdiff_t>(best) + 1, fe.begin() + static_cast<std::ptrdiff_t>(half), fe.end());
    us.insert(us.begin() + static_cast<std::ptrdiff_t>(best), fu.begin(), fu.begin() + static_cast<std::ptrdiff_t>(half));
    ex.insert(ex.begin() + static_cast<std::ptrdiff_t>(best), fe.begin(), fe.begin() + static_cast<std::ptrdiff_t>(half));
  }
  std::vector<char> in(us.size());
  for (std::size_t i = 0; i < us.size(); ++i) in[i] = ex[i] > 0.0;
  auto boundary = [&](double ua, double ub, bool a_in) {
    // a_in: membership at ua; returns the crossing on the y scale
    while (std::abs(std::sinh(ub) - std::sinh(ua)) > 1e-4 * std::max(1.0, std::abs(std::sinh(ua)))) {
      const double mid = 0.5 * (ua + ub);
      if (inside(std::sinh(mid)) == a_in)
        ua = mid;
      else
        ub = mid;
    }
    return std::sinh(0.5 * (ua + ub));
  };
  QuantileSet s;
  std::size_t i = 0;
  while (i < us.size()) {
    if (!in[i]) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j + 1 < us.size() && in[j + 1]) ++j;
    const double lo = i == 0 ? std::sinh(us.front()) : boundary(us[i - 1], us[i], false);
    const double hi = j + 1 == us.size() ? std::sinh(us.back()) : boundary(us[j], us[j + 1], true);
    s.intervals.emplace_back(lo, hi);
    i = j + 1;
  }
  if (!s.intervals.empty()) s.hull = {s.intervals.front().first, s.intervals.back().second};
  return s;
}

/// (Y_(m+1) - Y_(m+k)) hull(S(Y*)) + Y_(m+k) for the 1 - p quantile.
inline ConfidenceInterval ci_quantile_fk(const TailData& tail, double p, const WeightTable& table,
                                         const FkConfig& cfg) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("ci_quantile_fk: p must lie in (0, 1)");
  detail::check_table(table, tail.k(), tail.m, cfg);
  const double h = p * static_cast<double>(tail.n);
  const double rel = std::abs(h - table.h) / h;
  ConfidenceInterval ci;
  ci.level = table.level;
  ci.method = Method::fk;
  if (rel > cfg.h_tolerance) {
    std::ostringstream os;
    os << "ci_quantile_fk: p*n=" << h << " differs from the table's h=" << table.h << " by more than "
       << 100.0 * cfg.h_tolerance << "%";
    throw ValidationError(os.str());
  }
  if (rel > 0.0) {
    std::ostringstream os;
    os << "h rounded from " << h << " to " << table.h;
    ci.note = os.str();
  }
  const QuantileSet s = quantile_set(self_normalize(tail), table, cfg);
  const double top = tail.exceedances.front(), bottom = tail.exceedances.back();
  const double spread = top - bottom;
  if (s.empty()) {
    ci.degenerate = true;
    ci.note += ci.note.empty() ? "empty quantile set" : "; empty quantile set";
    return ci;
  }
  ci.lo = spread * s.hull.first + bottom + tail.u;
  ci.hi = spread * s.hull.second + bottom + tail.u;
  return ci;
}

}  // namespace tailcen::fk
