#pragma once

// Densities of the self-normalized statistic under the limit law:
//
//   f_{X*|xi}(x*)               density of X*
//   kappa_xi(x*) f_{X*|xi}(x*)  E[X_{m+1} - X_{m+k} | X* = x*] times that density
//   f_{Y*(xi),X*|xi}(y, x*)     joint density with Y*(xi) = (q(xi,h) - X_{m+k}) / spread
//
// After t = xi s each is a one-dimensional integral over t whose data
// dependence enters only through L(t) = sum_i log(1 + x*_i t). The fast path
// is a trapezoid rule on a uniform lattice in a smooth reparameterization of
// t over the whole real line (log t for the first two); the integrands are
// analytic in a strip around the real axis, so the rule converges
// geometrically and a half-step comparison gives a reliable error check.
// When the check fails the adaptive Gauss-Kronrod path is used instead.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <utility>
#include <vector>

#include "tailcen/error.hpp"
#include "tailcen/fixed_k/ev.hpp"
#include "tailcen/quadrature.hpp"

namespace tailcen::fk {

struct QuadratureSettings {
  /// Lattice step is step_scale / sqrt(k + m), capped at max_step.
  double step_scale = 0.4;
  double max_step = 0.1;
  /// Half-width of the lattice in log t (or logit) units.
  double half_range = 60.0;
  /// Nodes more than `drop` nats below the maximum are ignored.
  double drop = 40.0;
  /// Relative tolerance of the half-step agreement check.
  double check_tol = 1e-7;
  /// Relative tolerance of the adaptive fallback.
  double adaptive_tol = 1e-10;
  /// Skip the lattice and always integrate adaptively.
  bool adaptive_only = false;
};

namespace detail {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

/// log(step * sum_i exp(expo(i))) over the lattice i in [-n, n], or nullopt
/// when the window reaches the lattice edge or the half-step check fails.
template <class Expo>
std::optional<double> lattice_log_sum(Expo&& expo, int n, double step, const QuadratureSettings& qs) {
  const int stride = std::max(1, static_cast<int>(std::lround(0.7 / step)));
  const int n0 = std::min(n, static_cast<int>(24.0 / step) / stride * stride);
  double best = kNegInf;
  int arg = 0;
  // Coarse scan, extended outward while the edges are still significant.
  int lo = -n0, hi = n0;
  std::vector<std::pair<int, double>> coarse;
  auto visit = [&](int i) {
    const double e = expo(i);
    coarse.emplace_back(i, e);
    if (e > best) {
      best = e;
      arg = i;
    }
    return e;
  };
  for (int i = lo; i <= hi; i += stride) visit(i);
  double elo = coarse.front().second, ehi = coarse.back().second;
  while ((elo > best - qs.drop || !std::isfinite(best)) && lo - stride >= -n) {
    lo -= stride;
    elo = visit(lo);
  }
  while ((ehi > best - qs.drop || !std::isfinite(best)) && hi + stride <= n) {
    hi += stride;
    ehi = visit(hi);
  }
  if (!std::isfinite(best)) return std::nullopt;
  std::sort(coarse.begin(), coarse.end());
  // Window: coarse neighbours of the significant region, plus one stride.
  int wlo = arg, whi = arg;
  for (const auto& [i, e] : coarse)
    if (e > best - qs.drop - 20.0) {
      wlo = std::min(wlo, i);
      whi = std::max(whi, i);
    }
  wlo = std::max(-n, wlo - stride);
  whi = std::min(n, whi + stride);

  std::vector<double> fine;
  fine.reserve(static_cast<std::size_t>(whi - wlo + 1));
  for (int i = wlo; i <= whi; ++i) fine.push_back(expo(i));
  double fmax = *std::max_element(fine.begin(), fine.end());
  // Grow the window while its ends are still significant.
  while (fine.front() > fmax - qs.drop) {
    if (wlo - stride < -n) return std::nullopt;
    std::vector<double> ext;
    for (int i = wlo - stride; i < wlo; ++i) ext.push_back(expo(i));
    fine.insert(fine.begin(), ext.begin(), ext.end());
    wlo -= stride;
    fmax = std::max(fmax, *std::max_element(ext.begin(), ext.end()));
  }
  while (fine.back() > fmax - qs.drop) {
    if (whi + stride > n) return std::nullopt;
    for (int i = whi + 1; i <= whi + stride; ++i) fine.push_back(expo(i));
    whi += stride;
    fmax = std::max(fmax, *std::max_element(fine.end() - stride, fine.end()));
  }
  double s_all = 0.0, s_even = 0.0;
  for (std::size_t j = 0; j < fine.size(); ++j) {
    const double v = fine[j] - fmax > -qs.drop - 5.0 ? std::exp(fine[j] - fmax) : 0.0;
    s_all += v;
    if (((wlo + static_cast<int>(j)) & 1) == 0) s_even += v;
  }
  if (!(s_all > 0.0)) return std::nullopt;
  if (std::abs(s_all - 2.0 * s_even) > qs.check_tol * s_all) return std::nullopt;
  return fmax + std::log(step * s_all);
}

}  // namespace detail

/// Precomputed per-x* state for repeated density evaluation across xi, y.
/// Holds lazily filled lattice caches, so one instance must not be shared
/// between threads.
class XstarKernel {
 public:
  explicit XstarKernel(const SelfNormalized& xs, QuadratureSettings qs = {}) : qs_(qs), m_(xs.m), k_(xs.k()) {
    if (k_ < 3) throw DomainError("fixed-k densities need k >= 3");
    for (std::size_t i = 0; i < k_; ++i) {
      const double v = xs.values[i];
      if (!(v >= 0.0 && v <= 1.0)) throw DomainError("self-normalized values must lie in [0, 1]");
      if (v > 0.0) pos_.push_back(v);
    }
    step_ = std::min(qs_.max_step, qs_.step_scale / std::sqrt(static_cast<double>(k_ + m_)));
    n_ = static_cast<int>(std::ceil(qs_.half_range / step_));
    vnodes_.assign(static_cast<std::size_t>(2 * n_ + 1), Node{});
  }

  std::size_t k() const noexcept { return k_; }
  std::size_t m() const noexcept { return m_; }
  const std::vector<double>& positive_values() const noexcept { return pos_; }
  const QuadratureSettings& settings() const noexcept { return qs_; }

  /// L(t) = sum_i log(1 + x*_i t), using running products to save logs.
  double L(double t) const noexcept {
    double s = 0.0, prod = 1.0;
    for (double x : pos_) {
      prod *= 1.0 + x * t;
      if (prod > 1e270) {
        s += std::log(prod);
        prod = 1.0;
      }
    }
    return s + std::log(prod);
  }

  /// Straight log1p sum; used by the adaptive path.
  double L_direct(double t) const noexcept {
    double s = 0.0;
    for (double x : pos_) s += std::log1p(x * t);
    return s;
  }

  double log_fxstar(double xi) const {
    check_xi(xi);
    const double mm = static_cast<double>(m_), kk = static_cast<double>(k_);
    const double pre = std::lgamma(kk + mm) - std::lgamma(mm + 1.0) - (kk - 1.0) * std::log(xi);
    const double a = mm / xi, b = 1.0 + 1.0 / xi;
    if (!qs_.adaptive_only) {
      auto expo = [&](int i) {
        const Node& nd = vnode(i);
        return (kk - 1.0) * nd.lt - a * nd.A - b * nd.L;
      };
      if (auto r = detail::lattice_log_sum(expo, n_, step_, qs_)) return pre + *r;
    }
    return pre + adaptive_halfline([&](double t) {
             return (kk - 2.0) * std::log(t) - a * std::log1p(t) - b * L_direct(t);
           });
  }

  double log_kappa_f(double xi) const {
    check_xi(xi);
    const double mm = static_cast<double>(m_), kk = static_cast<double>(k_);
    const double pre = std::lgamma(kk + mm - xi) - std::lgamma(mm + 1.0) - kk * std::log(xi);
    const double a = mm / xi, b = 1.0 + 1.0 / xi;
    if (!qs_.adaptive_only) {
      auto expo = [&](int i) {
        const Node& nd = vnode(i);
        return kk * nd.lt - a * nd.A - b * nd.L;
      };
      if (auto r = detail::lattice_log_sum(expo, n_, step_, qs_)) return pre + *r;
    }
    return pre + adaptive_halfline([&](double t) {
             return (kk - 1.0) * std::log(t) - a * std::log1p(t) - b * L_direct(t);
           });
  }

  /// log f_{Y*(xi),X*|xi}(y, x*); -inf only through underflow.
  ///
  /// With B = log(1 + t y), the factor exp(-h e^{B/xi}) is a Gamma(m+k)
  /// kernel in u = log h + B/xi, which is very sharp in log t when xi is
  /// small. The lattice therefore runs over phi with |u - log h| =
  /// softplus(phi): uniform in u in the bulk, logarithmic in t near t = 0.
  double log_joint(double y, double xi, double h) const {
    check_xi(xi);
    if (!(h > 0.0)) throw DomainError("joint density: h must be > 0");
    const double mm = static_cast<double>(m_), kk = static_cast<double>(k_);
    const double pre = -std::lgamma(mm + 1.0) - kk * std::log(xi) + (mm + kk) * std::log(h);
    const double a = mm / xi, b = 1.0 + 1.0 / xi, c = (mm + kk) / xi;
    if (!qs_.adaptive_only) {
      std::optional<double> r;
      if (y == 0.0) {
        auto expo = [&](int i) {
          const Node& nd = vnode(i);
          return kk * nd.lt - h - a * nd.A - b * nd.L;
        };
        r = detail::lattice_log_sum(expo, n_, step_, qs_);
      } else {
        const double sgn = y > 0.0 ? 1.0 : -1.0;
        const double base = std::log(xi) - std::log(std::abs(y));
        const double phic = std::min(0.0, std::log(std::abs(y) / xi));
        auto expo = [&](int i) {
          const double phi = phic + i * step_;
          const double sp = phi > 0.0 ? phi + std::log1p(std::exp(-phi)) : std::log1p(std::exp(phi));
          const double B = sgn * xi * sp;
          const double t = std::expm1(B) / y;
          if (!(t > 0.0) || !std::isfinite(t)) return detail::kNegInf;
          return (kk - 1.0) * std::log(t) + c * B - h * std::exp(sgn * sp) - a * std::log1p(t) - b * L(t) + base +
                 (phi - sp);
        };
        r = detail::lattice_log_sum(expo, n_, step_, qs_);
      }
      if (r) return pre + *r;
    }
    return pre + adaptive_joint(y, xi, h);
  }

 private:
  struct Node {
    double lt = std::numeric_limits<double>::quiet_NaN();
    double A = 0.0, L = 0.0;
  };

  static void check_xi(double xi) {
    if (!(xi > 0.0 && xi <= 1.0)) throw DomainError("fixed-k densities need xi in (0, 1]");
  }

  const Node& vnode(int i) const {
    Node& nd = vnodes_[static_cast<std::size_t>(i + n_)];
    if (std::isnan(nd.lt)) {
      nd.lt = i * step_;
      const double t = std::exp(nd.lt);
      nd.A = std::log1p(t);
      nd.L = L(t);
    }
    return nd;
  }

  template <class LogF>
  double adaptive_halfline(LogF&& log_f) const {
    return quad::integrate_log_halfline(log_f, qs_.adaptive_tol, 30, "fixed-k density").log_value;
  }

  double adaptive_joint(double y, double xi, double h) const {
    const double mm = static_cast<double>(m_), kk = static_cast<double>(k_);
    const double a = mm / xi, b = 1.0 + 1.0 / xi, c = (mm + kk) / xi;
    auto core = [&](double t, double B) {
      return (kk - 1.0) * std::log(t) + (c - 1.0) * B - h * std::exp(B / xi) - a * std::log1p(t) - b * L_direct(t);
    };
    if (y >= 0.0) return adaptive_halfline([&](double t) { return core(t, std::log1p(t * y)); });
    // t = T s / (1 + s) on s in (0, inf); 1 + t y = 1 / (1 + s)
    const double T = -1.0 / y;
    return adaptive_halfline([&](double s) {
      const double t = T * s / (1.0 + s);
      const double B = -std::log1p(s);
      return core(t, B) + std::log(T) + 2.0 * B;
    });
  }

  QuadratureSettings qs_;
  std::size_t m_, k_;
  std::vector<double> pos_;
  double step_ = 0.1;
  int n_ = 0;
  mutable std::vector<Node> vnodes_;
};

/// f_{X*|xi}(x*).
inline double density_fxstar(const SelfNormalized& xs, double xi, const QuadratureSettings& qs = {}) {
  return std::exp(XstarKernel(xs, qs).log_fxstar(xi));
}

/// E_xi[X_{m+1} - X_{m+k} | X* = x*] f_{X*|xi}(x*).
inline double kappa_density(const SelfNormalized& xs, double xi, const QuadratureSettings& qs = {}) {
  if (!(xi < static_cast<double>(xs.k() + xs.m))) throw DomainError("kappa_density: k + m > xi required");
  return std::exp(XstarKernel(xs, qs).log_kappa_f(xi));
}

/// f_{Y*(xi),X*|xi}(y, x*) with q(xi, h) = (h^-xi - 1) / xi.
inline double joint_density_ystar_xstar(double y, const SelfNormalized& xs, double xi, double h,
                                        const QuadratureSettings& qs = {}) {
  return std::exp(XstarKernel(xs, qs).log_joint(y, xi, h));
}

}  // namespace tailcen::fk
