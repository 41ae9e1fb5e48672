#pragma once

// Quadrature helpers. Adaptive Gauss-Kronrod comes from Boost.Math; this
// header adds the log-space plumbing used by the extreme-value densities:
// integrands are handed over as log f, shifted by their maximum before a
// single exponentiation, and the half-line is mapped to (0, 1).

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <string>
#include <utility>

#include "tailcen/error.hpp"

namespace tailcen::quad {

struct Result {
  double value = 0.0;
  double error = 0.0;
};

/// Adaptive G7/K15 on [a, b]; either bound may be infinite.
template <class F>
Result integrate(F&& f, double a, double b, double rel_tol = 1e-12, unsigned max_depth = 20) {
  Result r;
  double l1 = 0.0;
  r.value = boost::math::quadrature::gauss_kronrod<double, 15>::integrate(f, a, b, max_depth, rel_tol, &r.error,
                                                                            &l1);
  return r;
}

struct LogResult {
  double log_value = -std::numeric_limits<double>::infinity();
  double rel_error = 0.0;
};

/// log of the integral over s in (0, inf) of exp(log_f(s)).
///
/// The mode of s * f(s) is located on a log-s scan first; with c the mode,
/// s = c t / (1 - t) puts it at t = 1/2, and the integrand is evaluated as
/// exp(log_f(s) + log ds/dt - shift). Throws ConvergenceError when the
/// Kronrod error estimate exceeds rel_tol after max_depth bisections.
template <class LogF>
LogResult integrate_log_halfline(LogF&& log_f, double rel_tol = 1e-10, unsigned max_depth = 30,
                                 const char* what = "integral") {
  constexpr double kNegInf = -std::numeric_limits<double>::infinity();
  auto psi = [&](double v) { return log_f(std::exp(v)) + v; };

  double best_v = 0.0, best = kNegInf;
  for (double v = -80.0; v <= 80.0; v += 0.25) {
    const double p = psi(v);
    if (p > best) {
      best = p;
      best_v = v;
    }
  }
  if (!std::isfinite(best)) {
    throw ConvergenceError(std::string(what) + ": integrand vanishes on the scan range");
  }
  // Golden-section polish of the mode; only the shift and centring depend on it.
  {
    const double g = 0.5 * (std::sqrt(5.0) - 1.0);
    double lo = best_v - 0.25, hi = best_v + 0.25;
    double x1 = hi - g * (hi - lo), x2 = lo + g * (hi - lo);
    double f1 = psi(x1), f2 = psi(x2);
    for (int it = 0; it < 40; ++it) {
      if (f1 < f2) {
        lo = x1;
        x1 = x2;
        f1 = f2;
        x2 = lo + g * (hi - lo);
        f2 = psi(x2);
      } else {
        hi = x2;
        x2 = x1;
        f2 = f1;
        x1 = hi - g * (hi - lo);
        f1 = psi(x1);
      }
    }
    if (std::max(f1, f2) > best) {
      best = std::max(f1, f2);
      best_v = f1 > f2 ? x1 : x2;
    }
  }
  const double c = std::exp(best_v);
  const double shift = best;

  auto g = [&](double t) -> double {
    if (t <= 0.0 || t >= 1.0) return 0.0;
    const double s = c * t / (1.0 - t);
    const double lf = log_f(s);
    if (!(lf > kNegInf)) return 0.0;
    // ds/dt = c / (1 - t)^2
    return std::exp(lf + best_v - 2.0 * std::log1p(-t) - shift);
  };
  double err = 0.0, l1 = 0.0;
  const double value =
      boost::math::quadrature::gauss_kronrod<double, 31>::integrate(g, 0.0, 1.0, max_depth, rel_tol, &err, &l1);
  if (!(value > 0.0) || !std::isfinite(value) || err > rel_tol * value * 10.0) {
    std::ostringstream os;
    os << what << ": quadrature did not converge (estimate " << value << ", error " << err << ", mode s=" << c
       << ")";
    throw ConvergenceError(os.str(), {value, err, c, shift});
  }
  return {shift + std::log(value), err / value};
}

/// log(exp(a) + exp(b)) without overflow.
inline double log_add(double a, double b) noexcept {
  if (a < b) std::swap(a, b);
  if (b == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace tailcen::quad
