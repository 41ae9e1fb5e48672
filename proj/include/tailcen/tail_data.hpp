#pragma once

// The censored tail sample: m censored slots on top, then k observed
// exceedances over the tail cutoff u.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <sstream>
#include <vector>

#include "tailcen/error.hpp"

namespace tailcen {

struct TailData {
  /// Y_(m+1) - u >= ... >= Y_(m+k) - u >= 0.
  std::vector<double> exceedances;
  std::size_t m = 0;
  double u = 0.0;
  std::optional<double> T;
  std::size_t n = 0;

  std::size_t k() const noexcept { return exceedances.size(); }

  /// T - u; only meaningful when T is set.
  double t_u() const { return T.value() - u; }

  /// Observed order statistics Y_(m+1), ..., Y_(m+k) on the data scale.
  std::vector<double> observed() const {
    std::vector<double> y(exceedances);
    for (auto& v : y) v += u;
    return y;
  }

  /// Throws ValidationError when an invariant fails.
  void validate() const {
    std::ostringstream os;
    if (exceedances.empty()) throw ValidationError("TailData: k >= 1 required");
    if (n < m + k()) {
      os << "TailData: n=" << n << " smaller than m+k=" << m + k();
      throw ValidationError(os.str());
    }
    for (std::size_t i = 0; i < k(); ++i) {
      if (!(exceedances[i] >= 0.0) || !std::isfinite(exceedances[i]))
        throw ValidationError("TailData: exceedances must be finite and >= 0", {i});
      if (i > 0 && exceedances[i] > exceedances[i - 1])
        throw ValidationError("TailData: exceedances must be sorted descending", {i});
    }
    if (T) {
      if (!(*T > u)) throw ValidationError("TailData: threshold T must exceed the cutoff u");
      if (exceedances.front() >= *T - u)
        throw ValidationError("TailData: observed exceedance at or above T - u", {0});
    }
  }

  /// Builds the tail from a full sample: values above T (or equal to it) are
  /// treated as censored when T is given, u is the (m+k+1)-th largest value.
  static TailData from_sample(std::vector<double> sample, std::size_t k, std::optional<double> T = std::nullopt,
                              std::optional<std::size_t> m_override = std::nullopt) {
    std::sort(sample.begin(), sample.end(), std::greater<>());
    TailData d;
    d.T = T;
    std::size_t m = 0;
    if (T) {
      while (m < sample.size() && sample[m] >= *T) ++m;
    }
    // Without a threshold the censored points are absent from `sample`.
    std::size_t first = m;
    if (m_override) {
      if (T && *m_override != m) throw ValidationError("m_override disagrees with the number of values at T");
      m = *m_override;
      if (!T) first = 0;
    }
    d.m = m;
    d.n = T ? sample.size() : sample.size() + m;
    if (first + k + 1 > sample.size()) {
      std::ostringstream os;
      os << "tail of k=" << k << " needs " << first + k + 1 << " values, sample has " << sample.size();
      throw ValidationError(os.str());
    }
    d.u = sample[first + k];
    d.exceedances.resize(k);
    for (std::size_t i = 0; i < k; ++i) d.exceedances[i] = sample[first + i] - d.u;
    d.validate();
    return d;
  }
};

}  // namespace tailcen
