#pragma once

// Censoring-ignoring benchmarks: Hill and the Gabaix-Ibragimov log-rank
// regression. Censored points are expected to sit in the sample at T.

#include <cmath>
#include <cstddef>
#include <sstream>
#include <vector>

#include "tailcen/error.hpp"
#include "tailcen/types.hpp"

namespace tailcen {

struct BaselineFit {
  double xi_hat = 0.0;
  double se = 0.0;
  std::size_t k_used = 0;
  Method method = Method::hill;

  ConfidenceInterval ci(double level) const {
    const double half = normal_critical(level) * se;
    return {xi_hat - half, xi_hat + half, level, method, false, {}};
  }
};

namespace detail {
inline void check_baseline_input(const std::vector<double>& y, std::size_t k, const char* who) {
  std::ostringstream os;
  if (k < 2) {
    os << who << ": k >= 2 required";
    throw ValidationError(os.str());
  }
  if (k + 1 > y.size()) {
    os << who << ": k+1=" << k + 1 << " exceeds the sample length " << y.size();
    throw ValidationError(os.str());
  }
  for (std::size_t i = 1; i <= k; ++i)
    if (y[i] > y[i - 1]) throw ValidationError(std::string(who) + ": sample must be sorted descending", {i});
  if (!(y[k] > 0.0)) {
    os << who << ": Y_(k+1)=" << y[k] << " must be positive";
    throw DomainError(os.str());
  }
}
}  // namespace detail

/// xi_hat = mean of log(Y_(i) / Y_(k+1)), i = 1..k; se = xi_hat / sqrt(k).
inline BaselineFit hill(const std::vector<double>& sorted_desc, std::size_t k) {
  detail::check_baseline_input(sorted_desc, k, "hill");
  const double lref = std::log(sorted_desc[k]);
  double s = 0.0;
  for (std::size_t i = 0; i < k; ++i) s += std::log(sorted_desc[i]) - lref;
  BaselineFit f;
  f.xi_hat = s / static_cast<double>(k);
  f.se = f.xi_hat / std::sqrt(static_cast<double>(k));
  f.k_used = k;
  f.method = Method::hill;
  return f;
}

/// OLS of log(rank - 1/2) on log Y_(rank), rank = 1..k; xi_hat = -1/slope,
/// se = xi_hat sqrt(2/k).
inline BaselineFit gi(const std::vector<double>& sorted_desc, std::size_t k) {
  detail::check_baseline_input(sorted_desc, k, "gi");
  const double kk = static_cast<double>(k);
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    mx += std::log(sorted_desc[i]);
    my += std::log(static_cast<double>(i) + 0.5);
  }
  mx /= kk;
  my /= kk;
  double sxx = 0.0, sxy = 0.0;
  for (std::size_t i = 0; i < k; ++i) {
    const double dx = std::log(sorted_desc[i]) - mx;
    sxx += dx * dx;
    sxy += dx * (std::log(static_cast<double>(i) + 0.5) - my);
  }
  if (!(sxx > 0.0)) throw DomainError("gi: the top k values are all equal");
  const double slope = sxy / sxx;
  BaselineFit f;
  f.xi_hat = -1.0 / slope;
  f.se = std::abs(f.xi_hat) * std::sqrt(2.0 / kk);
  f.k_used = k;
  f.method = Method::gi;
  return f;
}

}  // namespace tailcen
