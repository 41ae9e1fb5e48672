#pragma once

// Generalized Pareto and extreme-value laws, plus the four Monte Carlo
// data-generating processes (all with tail index 1/2) and their exact
// quantiles.

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "tailcen/error.hpp"
#include "tailcen/quadrature.hpp"
#include "tailcen/rng.hpp"

namespace tailcen {

/// Below this |xi| the exponential / Gumbel branches are used.
inline constexpr double kXiZero = 1e-8;

struct GpdParams {
  double xi = 0.5;
  double sigma = 1.0;

  double alpha() const noexcept { return 1.0 / xi; }

  /// Right end-point of the support; +inf when xi >= 0.
  double upper_endpoint() const noexcept {
    return xi < 0.0 ? -sigma / xi : std::numeric_limits<double>::infinity();
  }
};

namespace detail {
inline void check_sigma(const GpdParams& p) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.xi)) {
    std::ostringstream os;
    os << "GPD: scale must be finite and > 0 (xi=" << p.xi << ", sigma=" << p.sigma << ")";
    throw DomainError(os.str());
  }
}
}  // namespace detail

/// G(y; xi, sigma).
inline double gpd_cdf(double y, const GpdParams& p) {
  detail::check_sigma(p);
  if (!(y >= 0.0) || y > p.upper_endpoint()) {
    std::ostringstream os;
    os << "gpd_cdf: y=" << y << " outside the support";
    throw DomainError(os.str());
  }
  if (std::abs(p.xi) < kXiZero) return -std::expm1(-y / p.sigma);
  return -std::expm1(-std::log1p(p.xi * y / p.sigma) / p.xi);
}

/// log g(y; xi, sigma), -inf outside the support.
inline double gpd_logpdf(double y, const GpdParams& p) {
  detail::check_sigma(p);
  if (!(y >= 0.0) || y > p.upper_endpoint()) return -std::numeric_limits<double>::infinity();
  if (std::abs(p.xi) < kXiZero) return -std::log(p.sigma) - y / p.sigma;
  return -std::log(p.sigma) - (1.0 + 1.0 / p.xi) * std::log1p(p.xi * y / p.sigma);
}

/// Analytic inverse of gpd_cdf.
inline double gpd_quantile(double q, const GpdParams& p) {
  detail::check_sigma(p);
  if (!(q >= 0.0 && q < 1.0)) {
    std::ostringstream os;
    os << "gpd_quantile: q=" << q << " outside [0, 1)";
    throw DomainError(os.str());
  }
  const double l = std::log1p(-q);
  if (std::abs(p.xi) < kXiZero) return -p.sigma * l;
  return p.sigma / p.xi * std::expm1(-p.xi * l);
}

/// V_xi(x) = exp(-(1 + xi x)^(-1/xi)), the limit law of the normalized maximum.
inline double ev_cdf(double x, double xi) {
  if (std::abs(xi) < kXiZero) return std::exp(-std::exp(-x));
  if (!(1.0 + xi * x > 0.0)) {
    std::ostringstream os;
    os << "ev_cdf: 1 + xi*x <= 0 (x=" << x << ", xi=" << xi << ")";
    throw DomainError(os.str());
  }
  return std::exp(-std::exp(-std::log1p(xi * x) / xi));
}

/// q(xi, h) = (h^(-xi) - 1) / xi, the exp(-h) quantile of V_xi.
inline double ev_tail_quantile(double xi, double h) {
  if (!(h > 0.0)) throw DomainError("ev_tail_quantile: h must be > 0");
  const double lh = std::log(h);
  if (std::abs(xi) < kXiZero) return -lh;
  return std::expm1(-xi * lh) / xi;
}

// ---------------------------------------------------------------------------
// Data-generating processes

enum class DgpKind { Gpd, AbsT2, F44, DPlN };

struct DgpSpec {
  DgpKind kind = DgpKind::Gpd;
  // Gpd draws are gpd_loc + GPD(gpd); the default is the standard Pareto
  // with tail index 1/2, i.e. 1 + GPD(1/2, 1/2).
  GpdParams gpd{0.5, 0.5};
  double gpd_loc = 1.0;
  // double Pareto-lognormal: Y = exp(c1 + c2 Z1 + xi Z2 - c3 Z3)
  double c1 = 0.0, c2 = 0.5, dpln_xi = 0.5, c3 = 1.0;

  static DgpSpec gpd_default() { return {}; }
  static DgpSpec gpd_unit() { return {.gpd = {0.5, 1.0}, .gpd_loc = 0.0}; }
  static DgpSpec abs_t2() { return {.kind = DgpKind::AbsT2}; }
  static DgpSpec f44() { return {.kind = DgpKind::F44}; }
  static DgpSpec dpln() { return {.kind = DgpKind::DPlN}; }

  double tail_index() const noexcept {
    switch (kind) {
      case DgpKind::Gpd: return gpd.xi;
      case DgpKind::DPlN: return dpln_xi;
      default: return 0.5;
    }
  }

  std::string name() const {
    switch (kind) {
      case DgpKind::Gpd: return "GPD";
      case DgpKind::AbsT2: return "t(2)";
      case DgpKind::F44: return "F(4,4)";
      case DgpKind::DPlN: return "dPlN";
    }
    return "?";
  }
};

inline DgpSpec parse_dgp(std::string_view s) {
  if (s == "gpd" || s == "GPD" || s == "pareto") return DgpSpec::gpd_default();
  if (s == "gpd-unit") return DgpSpec::gpd_unit();
  if (s == "t2" || s == "abs-t2" || s == "t(2)") return DgpSpec::abs_t2();
  if (s == "f44" || s == "F(4,4)") return DgpSpec::f44();
  if (s == "dpln" || s == "dPlN") return DgpSpec::dpln();
  throw ValidationError("unknown DGP '" + std::string(s) + "' (expected gpd, gpd-unit, t2, f44, dpln)");
}

/// n i.i.d. draws from the DGP.
inline std::vector<double> dgp_sample(const DgpSpec& spec, std::size_t n, Philox4x32& rng) {
  std::vector<double> out(n);
  switch (spec.kind) {
    case DgpKind::Gpd:
      for (auto& y : out) y = spec.gpd_loc + gpd_quantile(1.0 - uniform_open01(rng), spec.gpd);
      break;
    case DgpKind::AbsT2: {
      std::student_t_distribution<double> t(2.0);
      for (auto& y : out) y = std::abs(t(rng));
      break;
    }
    case DgpKind::F44: {
      std::fisher_f_distribution<double> f(4.0, 4.0);
      for (auto& y : out) y = f(rng);
      break;
    }
    case DgpKind::DPlN: {
      std::normal_distribution<double> z1;
      std::exponential_distribution<double> e;
      for (auto& y : out) {
        const double a = z1(rng);
        const double b = e(rng);
        const double c = e(rng);
        y = std::exp(spec.c1 + spec.c2 * a + spec.dpln_xi * b - spec.c3 * c);
      }
      break;
    }
  }
  return out;
}

namespace detail {

/// log Phi(a), accurate far into the lower tail.
inline double log_norm_cdf(double a) {
  if (a > -37.0) return std::log(0.5 * std::erfc(-a / std::numbers::sqrt2));
  const double a2 = a * a;
  return -0.5 * a2 - std::log(-a) - 0.5 * std::log(2.0 * std::numbers::pi) + std::log1p(-1.0 / a2 + 3.0 / (a2 * a2));
}

/// P(c2 Z1 + xi Z2 <= x), Z1 ~ N(0,1), Z2 ~ Exp(1).
inline double normal_exp_cdf(double x, double c2, double xi) {
  const double a = x / c2;
  const double first = 0.5 * std::erfc(-a / std::numbers::sqrt2);
  const double log_second = -x / xi + c2 * c2 / (2.0 * xi * xi) + log_norm_cdf(a - c2 / xi);
  return first - std::exp(log_second);
}

}  // namespace detail

/// CDF of the double Pareto-lognormal DGP: integrates the closed-form
/// normal/exponential convolution over the Exp(1) law of Z3.
inline double dpln_cdf(double y, const DgpSpec& spec) {
  if (!(y > 0.0)) return 0.0;
  if (std::isinf(y)) return 1.0;
  const double ly = std::log(y) - spec.c1;
  auto integrand = [&](double z) { return std::exp(-z) * detail::normal_exp_cdf(ly + spec.c3 * z, spec.c2, spec.dpln_xi); };
  return quad::integrate(integrand, 0.0, std::numeric_limits<double>::infinity(), 1e-12, 15).value;
}

/// Exact q-quantile of the DGP.
inline double dgp_true_quantile(const DgpSpec& spec, double q) {
  if (!(q > 0.0 && q < 1.0)) throw DomainError("dgp_true_quantile: q must lie in (0, 1)");
  switch (spec.kind) {
    case DgpKind::Gpd: return spec.gpd_loc + gpd_quantile(q, spec.gpd);
    case DgpKind::AbsT2:
      // P(|T| <= y) = y / sqrt(2 + y^2)
      return q * std::sqrt(2.0 / ((1.0 - q) * (1.0 + q)));
    case DgpKind::F44: {
      // F(4,4) cdf is I_w(2,2) = 3w^2 - 2w^3 with w = x / (1 + x).
      const double u = std::sin(std::asin(2.0 * q - 1.0) / 3.0);
      const double w = 0.5 + u;
      return w / (0.5 - u);
    }
    case DgpKind::DPlN: {
      auto f = [&](double ly) { return dpln_cdf(std::exp(ly), spec) - q; };
      double lo = -5.0, hi = 5.0;
      while (f(lo) > 0.0) lo -= 5.0;
      while (f(hi) < 0.0) hi += 5.0;
      std::uintmax_t iters = 200;
      auto tol = [](double a, double b) { return std::abs(b - a) <= 1e-13 * std::max(1.0, std::abs(a)); };
      auto [a, b] = boost::math::tools::toms748_solve(f, lo, hi, tol, iters);
      return std::exp(0.5 * (a + b));
    }
  }
  return std::numeric_limits<double>::quiet_NaN();
}

}  // namespace tailcen
