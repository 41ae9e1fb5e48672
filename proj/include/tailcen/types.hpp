#pragma once

#include <boost/math/distributions/normal.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "tailcen/error.hpp"

namespace tailcen {

enum class Method { ml, fk, hill, gi };

inline std::string_view to_string(Method m) {
  switch (m) {
    case Method::ml: return "ml";
    case Method::fk: return "fk";
    case Method::hill: return "hill";
    case Method::gi: return "gi";
  }
  return "?";
}

inline Method parse_method(std::string_view s) {
  if (s == "ml") return Method::ml;
  if (s == "fk") return Method::fk;
  if (s == "hill") return Method::hill;
  if (s == "gi") return Method::gi;
  throw ValidationError("unknown method '" + std::string(s) + "'");
}

struct ConfidenceInterval {
  double lo = std::numeric_limits<double>::quiet_NaN();
  double hi = std::numeric_limits<double>::quiet_NaN();
  double level = 0.95;
  Method method = Method::ml;
  /// Point interval or empty acceptance region; `note` says which.
  bool degenerate = false;
  std::string note;

  double length() const noexcept { return hi - lo; }
  bool contains(double x) const noexcept { return lo <= x && x <= hi; }
};

/// Two-sided standard normal critical value z_{1-(1-level)/2}.
inline double normal_critical(double level) {
  if (!(level > 0.0 && level < 1.0)) throw DomainError("confidence level must lie in (0, 1)");
  return boost::math::quantile(boost::math::normal_distribution<double>(), 0.5 + 0.5 * level);
}

}  // namespace tailcen
