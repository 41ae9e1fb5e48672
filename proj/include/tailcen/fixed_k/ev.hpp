#pragma once

// Limit law of the top order statistics: the joint density with m censored
// points, the exact partial-sum simulator, and the self-normalized
// (location/scale maximal invariant) statistic.

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>
#include <vector>

#include "tailcen/distributions.hpp"
#include "tailcen/error.hpp"
#include "tailcen/rng.hpp"
#include "tailcen/tail_data.hpp"

namespace tailcen::fk {

/// Y* = (Y - Y_(m+k)) / (Y_(m+1) - Y_(m+k)); first entry 1, last 0.
struct SelfNormalized {
  std::vector<double> values;
  std::size_t m = 0;

  std::size_t k() const noexcept { return values.size(); }
};

/// Self-normalizes a descending block Y_(m+1) >= ... >= Y_(m+k).
inline SelfNormalized self_normalize(const std::vector<double>& y, std::size_t m) {
  const std::size_t k = y.size();
  if (k < 3) throw ValidationError("self_normalize: k >= 3 required (the statistic is (1, 0) at k = 2)");
  for (std::size_t i = 1; i < k; ++i)
    if (y[i] > y[i - 1]) throw ValidationError("self_normalize: input must be sorted descending", {i});
  const double lo = y.back(), spread = y.front() - y.back();
  if (!(spread > 0.0)) throw DomainError("self_normalize: degenerate spread Y_(m+1) = Y_(m+k)");
  SelfNormalized s;
  s.m = m;
  s.values.resize(k);
  for (std::size_t i = 0; i < k; ++i) s.values[i] = (y[i] - lo) / spread;
  s.values.front() = 1.0;
  s.values.back() = 0.0;
  return s;
}

inline SelfNormalized self_normalize(const TailData& d) { return self_normalize(d.exceedances, d.m); }

/// Joint density of (X_{m+1}, ..., X_{m+k}) in the limit; 0 outside the
/// ordered cone.
inline double joint_density_fx(const std::vector<double>& x, double xi, std::size_t m) {
  const std::size_t k = x.size();
  if (k == 0) throw DomainError("joint_density_fx: empty input");
  for (std::size_t i = 1; i < k; ++i)
    if (x[i] > x[i - 1]) return 0.0;
  const bool gumbel = std::abs(xi) < kXiZero;
  auto lg = [&](double v) {
    // log(1 + xi v) / xi, or v in the Gumbel limit
    if (gumbel) return v;
    return std::log1p(xi * v) / xi;
  };
  for (double v : x)
    if (!gumbel && !(1.0 + xi * v > 0.0)) throw DomainError("joint_density_fx: 1 + xi x <= 0");
  const double mm = static_cast<double>(m);
  double e = -mm * lg(x.front()) - std::exp(-lg(x.back())) - std::lgamma(mm + 1.0);
  for (double v : x) e -= (1.0 + xi) * lg(v);
  return std::exp(e);
}

/// Exact draw of the observed block X_{m+1} > ... > X_{m+k} via
/// X_i = (Gamma_i^-xi - 1) / xi, Gamma_i partial sums of unit exponentials.
/// `log_gamma`, when given, receives log Gamma_{m+1..m+k}.
inline std::vector<double> simulate_tail_ev(double xi, std::size_t m, std::size_t k, Philox4x32& rng,
                                            std::vector<double>* log_gamma = nullptr) {
  if (!(xi > 0.0 && xi <= 1.0)) throw DomainError("simulate_tail_ev: xi must lie in (0, 1]");
  if (k < 1) throw DomainError("simulate_tail_ev: k >= 1 required");
  double g = 0.0;
  for (std::size_t i = 0; i < m; ++i) g -= std::log(uniform_open01(rng));
  std::vector<double> x(k);
  if (log_gamma) log_gamma->resize(k);
  for (std::size_t i = 0; i < k; ++i) {
    g -= std::log(uniform_open01(rng));
    const double lg = std::log(g);
    if (log_gamma) (*log_gamma)[i] = lg;
    x[i] = std::expm1(-xi * lg) / xi;
  }
  return x;
}

/// One draw of (X*, Y*(xi)) from the limit law. Differences are formed from
/// log Gamma so that small xi keeps full relative precision.
struct EvDraw {
  SelfNormalized xstar;
  double ystar = 0.0;  ///< (q(xi,h) - X_{m+k}) / (X_{m+1} - X_{m+k})
};

inline EvDraw simulate_self_normalized(double xi, std::size_t m, std::size_t k, double h, Philox4x32& rng) {
  if (k < 3) throw DomainError("simulate_self_normalized: k >= 3 required");
  std::vector<double> lg;
  simulate_tail_ev(xi, m, k, rng, &lg);
  // X_i - X_k = Gamma_k^-xi expm1(-xi (lg_i - lg_k)) / xi
  const double lk = lg.back();
  const double spread = std::expm1(-xi * (lg.front() - lk));
  EvDraw d;
  d.xstar.m = m;
  d.xstar.values.resize(k);
  for (std::size_t i = 0; i < k; ++i) d.xstar.values[i] = std::expm1(-xi * (lg[i] - lk)) / spread;
  d.xstar.values.front() = 1.0;
  d.xstar.values.back() = 0.0;
  // q - X_k = (h^-xi - Gamma_k^-xi) / xi = Gamma_k^-xi expm1(-xi (log h - lk)) / xi
  d.ystar = std::expm1(-xi * (std::log(h) - lk)) / spread;
  return d;
}

}  // namespace tailcen::fk
