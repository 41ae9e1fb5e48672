#pragma once

// Numerical checks shared by the unit tests and the acceptance binary. Each
// returns pass/fail plus a one-line summary of what was measured.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <boost/math/distributions/pareto.hpp>
#include <boost/math/quadrature/exp_sinh.hpp>
#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/gamma.hpp>

#include "tailcen.hpp"

namespace tailcen::testing {

struct Check {
  bool pass = false;
  std::string detail;
};

// ---------------------------------------------------------------------------
// Censored GPD with sigma = 1 and censoring point t = (kappa - 1) / xi.

/// Hessian of the negative log-likelihood of one observed exceedance y.
inline Mat2 hess_observed(double y, double xi) {
  TailData d;
  d.exceedances = {y};
  d.n = 1;
  return neg_loglik_derivs({xi, 1.0}, d).hess;
}

inline std::array<double, 2> grad_observed(double y, double xi) {
  TailData d;
  d.exceedances = {y};
  d.n = 1;
  return neg_loglik_derivs({xi, 1.0}, d).grad;
}

/// Derivatives of the censored term alone: a tail with one censored slot
/// minus the same tail without it.
inline LikDerivs derivs_censored(double t, double xi) {
  TailData with;
  with.exceedances = {0.0};
  with.m = 1;
  with.T = t;
  with.n = 2;
  TailData without;
  without.exceedances = {0.0};
  without.n = 1;
  const LikDerivs a = neg_loglik_derivs({xi, 1.0}, with);
  const LikDerivs b = neg_loglik_derivs({xi, 1.0}, without);
  LikDerivs out;
  out.grad = {a.grad[0] - b.grad[0], a.grad[1] - b.grad[1]};
  out.hess = {a.hess.a11 - b.hess.a11, a.hess.a12 - b.hess.a12, a.hess.a22 - b.hess.a22};
  return out;
}

/// E[f(Y)] over the observed part of a censored GPD(xi, 1) draw.
template <class F>
double observed_expectation(F&& f, double xi, double t) {
  const GpdParams p{xi, 1.0};
  auto g = [&](double y) { return std::exp(gpd_logpdf(y, p)) * f(y); };
  if (std::isinf(t)) return boost::math::quadrature::exp_sinh<double>().integrate(g, 1e-14);
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(g, 0.0, t, 20, 1e-14);
}

/// Expected Hessian of one censored GPD draw, by quadrature of the analytic
/// per-observation derivatives.
inline Mat2 expected_hessian(double xi, double kappa) {
  const double t = std::isinf(kappa) ? kappa : (kappa - 1.0) / xi;
  Mat2 M;
  M.a11 = observed_expectation([&](double y) { return hess_observed(y, xi).a11; }, xi, t);
  M.a12 = observed_expectation([&](double y) { return hess_observed(y, xi).a12; }, xi, t);
  M.a22 = observed_expectation([&](double y) { return hess_observed(y, xi).a22; }, xi, t);
  if (!std::isinf(t)) {
    const double S = 1.0 - gpd_cdf(t, {xi, 1.0});
    const Mat2 c = derivs_censored(t, xi).hess;
    M.a11 += S * c.a11;
    M.a12 += S * c.a12;
    M.a22 += S * c.a22;
  }
  return M;
}

inline Check fisher_information_oracle() {
  double worst = 0.0;
  std::ostringstream where;
  for (double xi : {0.1, 0.5, 0.9}) {
    for (double kappa : {1.5, 2.0, 4.0, std::numeric_limits<double>::infinity()}) {
      const Mat2 q = expected_hessian(xi, kappa);
      const Mat2 M = fisher_info(xi, kappa);
      for (auto [a, b] : {std::pair{q.a11, M.a11}, std::pair{q.a12, M.a12}, std::pair{q.a22, M.a22}}) {
        const double rel = std::abs(a - b) / std::abs(a);
        if (rel > worst) {
          worst = rel;
          where.str("");
          where << " at xi=" << xi << " kappa=" << kappa;
        }
      }
    }
  }
  std::ostringstream os;
  os << "max entrywise relative error " << worst << where.str() << " (bound 1e-6)";
  return {worst < 1e-6, os.str()};
}

/// Expected score of one censored draw, by quadrature.
inline std::array<double, 2> expected_score(double xi, double kappa) {
  const double t = std::isinf(kappa) ? kappa : (kappa - 1.0) / xi;
  std::array<double, 2> s{};
  for (int c = 0; c < 2; ++c)
    s[c] = observed_expectation([&](double y) { return grad_observed(y, xi)[c]; }, xi, t);
  if (!std::isinf(t)) {
    const double S = 1.0 - gpd_cdf(t, {xi, 1.0});
    const auto g = derivs_censored(t, xi).grad;
    s[0] += S * g[0];
    s[1] += S * g[1];
  }
  return s;
}

/// Mean of score outer product minus Hessian over simulated censored draws,
/// entrywise in units of its Monte Carlo standard error.
inline std::array<double, 3> information_equality_z(double xi, double kappa, std::size_t draws, std::uint64_t seed) {
  const double t = std::isinf(kappa) ? kappa : (kappa - 1.0) / xi;
  const LikDerivs cen = std::isinf(t) ? LikDerivs{} : derivs_censored(t, xi);
  Philox4x32 rng(seed, 0);
  std::array<double, 3> s1{}, s2{};
  for (std::size_t i = 0; i < draws; ++i) {
    const double y = gpd_quantile(1.0 - uniform_open01(rng), {xi, 1.0});
    std::array<double, 2> g;
    Mat2 H;
    if (y >= t) {
      g = cen.grad;
      H = cen.hess;
    } else {
      TailData d;
      d.exceedances = {y};
      d.n = 1;
      const LikDerivs L = neg_loglik_derivs({xi, 1.0}, d);
      g = L.grad;
      H = L.hess;
    }
    const double v[3] = {g[0] * g[0] - H.a11, g[0] * g[1] - H.a12, g[1] * g[1] - H.a22};
    for (int c = 0; c < 3; ++c) {
      s1[c] += v[c];
      s2[c] += v[c] * v[c];
    }
  }
  std::array<double, 3> z{};
  const double N = static_cast<double>(draws);
  for (int c = 0; c < 3; ++c) {
    const double mean = s1[c] / N;
    const double sd = std::sqrt(std::max(0.0, s2[c] / N - mean * mean));
    z[c] = mean / (sd / std::sqrt(N));
  }
  return z;
}

inline Check score_information_properties(std::size_t draws = 1000000) {
  double worst_score = 0.0;
  for (double xi : {0.1, 0.5, 0.9})
    for (double kappa : {1.5, 2.0, 4.0, std::numeric_limits<double>::infinity()}) {
      const auto s = expected_score(xi, kappa);
      worst_score = std::max({worst_score, std::abs(s[0]), std::abs(s[1])});
    }
  double worst_z = 0.0;
  std::uint64_t seed = 11;
  for (double xi : {0.2, 0.5})
    for (double kappa : {2.0, std::numeric_limits<double>::infinity()}) {
      const auto z = information_equality_z(xi, kappa, draws, seed++);
      for (double v : z) worst_z = std::max(worst_z, std::abs(v));
    }
  std::ostringstream os;
  os << "max |E score| " << worst_score << " (bound 1e-8); information equality max |z| " << worst_z
     << " over " << draws << " draws (bound 3)";
  return {worst_score < 1e-8 && worst_z < 3.0, os.str()};
}

// ---------------------------------------------------------------------------
// Fixed-k densities.

/// Integral of f_{X*|xi} over the single free coordinate when k = 3.
inline double fxstar_mass_k3(double xi, std::size_t m) {
  auto f = [&](double x) { return fk::density_fxstar({{1.0, x, 0.0}, m}, xi); };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, 1.0, 20, 1e-12);
}

/// E over X* ~ f_{X*|xi0} of f_{X*|xi1}(X*) / f_{X*|xi0}(X*), which is 1 when
/// f_{X*|xi1} integrates to 1. Returns (mean, standard error).
inline std::pair<double, double> fxstar_mass_mc(std::size_t k, std::size_t m, double xi0, double xi1,
                                                std::size_t draws, std::uint64_t seed) {
  std::vector<double> r(draws);
  parallel_for(draws, 0, [&](std::size_t j, unsigned) {
    Philox4x32 rng(seed, stream_id({k, m, j}));
    const fk::EvDraw d = fk::simulate_self_normalized(xi0, m, k, 1.0, rng);
    fk::XstarKernel ker(d.xstar);
    r[j] = std::exp(ker.log_fxstar(xi1) - ker.log_fxstar(xi0));
  });
  double s1 = 0.0, s2 = 0.0;
  for (double v : r) {
    s1 += v;
    s2 += v * v;
  }
  const double N = static_cast<double>(draws);
  const double mean = s1 / N;
  return {mean, std::sqrt(std::max(0.0, s2 / N - mean * mean) / N)};
}

/// Relative gap between the y-integral of the joint density and f_{X*|xi}.
inline double joint_marginal_gap(const fk::SelfNormalized& xs, double xi, double h) {
  fk::XstarKernel ker(xs);
  auto f = [&](double y) { return std::exp(ker.log_joint(y, xi, h)); };
  boost::math::quadrature::exp_sinh<double> es;
  const double pos = es.integrate(f, 1e-12);
  const double neg = es.integrate([&](double y) { return f(-y); }, 1e-12);
  const double fx = std::exp(ker.log_fxstar(xi));
  return std::abs((pos + neg) / fx - 1.0);
}

inline Check ev_density_fidelity(std::size_t mc_draws = 20000) {
  std::ostringstream os;
  bool pass = true;
  double worst_k3 = 0.0;
  for (std::size_t m : {0u, 2u})
    for (double xi : {0.1, 0.5, 0.9}) worst_k3 = std::max(worst_k3, std::abs(fxstar_mass_k3(xi, m) - 1.0));
  pass = pass && worst_k3 < 1e-5;
  os << "k=3 mass error " << worst_k3 << " (bound 1e-5);";
  double worst_z = 0.0;
  std::uint64_t seed = 101;
  for (std::size_t k : {4u, 10u, 20u})
    for (std::size_t m : {0u, 2u}) {
      const auto [mean, se] = fxstar_mass_mc(k, m, 0.5, 0.4, mc_draws, seed++);
      worst_z = std::max(worst_z, std::abs(mean - 1.0) / se);
    }
  pass = pass && worst_z < 3.0;
  os << " simulated mass max |z| " << worst_z << " (bound 3);";
  double worst_gap = 0.0;
  for (int rep = 0; rep < 6; ++rep) {
    Philox4x32 rng(7, static_cast<std::uint64_t>(rep));
    const std::size_t k = 4 + 7 * static_cast<std::size_t>(rep), m = static_cast<std::size_t>(rep % 3);
    const double xi = 0.1 + 0.17 * rep, h = rep % 2 ? 1.0 : 7.0;
    const fk::EvDraw d = fk::simulate_self_normalized(xi, m, k, h, rng);
    worst_gap = std::max(worst_gap, joint_marginal_gap(d.xstar, xi, h));
  }
  pass = pass && worst_gap < 1e-4;
  os << " joint marginalization max relative gap " << worst_gap << " (bound 1e-4)";
  return {pass, os.str()};
}

// ---------------------------------------------------------------------------
// Finite-n top order statistics against the limit law.

/// Two-sample Kolmogorov-Smirnov distance.
inline double ks_two_sample(std::vector<double> a, std::vector<double> b) {
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  const double na = static_cast<double>(a.size()), nb = static_cast<double>(b.size());
  while (i < a.size() && j < b.size()) {
    const double x = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= x) ++i;
    while (j < b.size() && b[j] <= x) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  return d;
}

/// The m + k largest of n standard Pareto(alpha) draws, descending. Only the
/// draws above a high cutoff c are materialized: their number is
/// Binomial(n, P(Y > c)) and, given that number, they are i.i.d. Pareto
/// conditioned on exceeding c, which is the law of the top of the sample.
inline std::vector<double> pareto_top(std::size_t n, double alpha, std::size_t top, Philox4x32& rng) {
  const double expected = std::max(60.0, 8.0 * static_cast<double>(top));
  const double pc = std::min(1.0, expected / static_cast<double>(n));
  std::binomial_distribution<std::size_t> bin(n, pc);
  std::size_t N = bin(rng);
  double c = std::pow(pc, -1.0 / alpha);
  if (N < top) {
    N = n;
    c = 1.0;
  }
  std::vector<double> y(N);
  for (auto& v : y) v = c * std::pow(uniform_open01(rng), -1.0 / alpha);
  std::partial_sort(y.begin(), y.begin() + static_cast<std::ptrdiff_t>(top), y.end(), std::greater<>());
  y.resize(top);
  return y;
}

inline Check finite_n_convergence(std::size_t reps = 40000) {
  const std::size_t n = 1000000, m = 2, k = 5;
  const double xi = 0.5;
  const double bn = std::sqrt(static_cast<double>(n)), an = xi * bn;
  std::vector<std::vector<double>> fin(k), lim(k);
  Philox4x32 r1(2024, 1), r2(2024, 2);
  for (std::size_t r = 0; r < reps; ++r) {
    const auto y = pareto_top(n, 1.0 / xi, m + k, r1);
    const auto x = fk::simulate_tail_ev(xi, m, k, r2);
    for (std::size_t i = 0; i < k; ++i) {
      fin[i].push_back((y[m + i] - bn) / an);
      lim[i].push_back(x[i]);
    }
  }
  double worst = 0.0;
  for (std::size_t i = 0; i < k; ++i) worst = std::max(worst, ks_two_sample(fin[i], lim[i]));
  std::ostringstream os;
  os << "max componentwise KS " << worst << " over " << reps << " replications each (bound 0.02)";
  return {worst < 0.02, os.str()};
}

// ---------------------------------------------------------------------------
// Equivariance of the fixed-k outputs under y -> a y + b.

inline Check fk_equivariance(const fk::CvTable& cv, const fk::WeightTable& lam, const fk::FkConfig& cfg,
                             const std::vector<double>& sample, double T, double p) {
  const std::size_t k = cv.k;
  const TailData base = TailData::from_sample(sample, k, T);
  const ConfidenceInterval i0 = fk::ci_index_fk(base, cv, cfg);
  const ConfidenceInterval q0 = fk::ci_quantile_fk(base, p, lam, cfg);
  double worst_index = 0.0, worst_q = 0.0;
  for (double a : {0.1, 7.0})
    for (double b : {-3.0, 100.0}) {
      std::vector<double> s(sample);
      for (auto& v : s) v = a * v + b;
      const TailData d = TailData::from_sample(s, k, a * T + b);
      const ConfidenceInterval i1 = fk::ci_index_fk(d, cv, cfg);
      const ConfidenceInterval q1 = fk::ci_quantile_fk(d, p, lam, cfg);
      worst_index = std::max({worst_index, std::abs(i1.lo - i0.lo), std::abs(i1.hi - i0.hi)});
      const double scale = a * (base.exceedances.front() - base.exceedances.back());
      worst_q = std::max({worst_q, std::abs(q1.lo - (a * q0.lo + b)) / scale, std::abs(q1.hi - (a * q0.hi + b)) / scale});
    }
  std::ostringstream os;
  os << "index interval max change " << worst_index << "; quantile interval max deviation from a*ci+b " << worst_q
     << " (relative to the spread)";
  return {worst_index == 0.0 && worst_q < 1e-9, os.str()};
}

}  // namespace tailcen::testing
