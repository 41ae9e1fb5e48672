#pragma once

// Censored generalized-Pareto maximum likelihood: the likelihood with its
// analytic derivatives, the simplex + Newton maximizer, the asymptotic
// information matrix, and normal-approximation intervals for the tail index
// and for extreme quantiles.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <sstream>

#include "tailcen/distributions.hpp"
#include "tailcen/error.hpp"
#include "tailcen/rng.hpp"
#include "tailcen/tail_data.hpp"
#include "tailcen/types.hpp"

namespace tailcen {

/// Symmetric 2x2 matrix.
struct Mat2 {
  double a11 = 0.0, a12 = 0.0, a22 = 0.0;

  double det() const noexcept { return a11 * a22 - a12 * a12; }

  Mat2 inverse() const {
    const double d = det();
    if (!(std::abs(d) > 1e-300) || !std::isfinite(d)) throw DomainError("singular 2x2 matrix");
    return {a22 / d, -a12 / d, a11 / d};
  }

  /// v' A v
  double quad(double v1, double v2) const noexcept { return a11 * v1 * v1 + 2.0 * a12 * v1 * v2 + a22 * v2 * v2; }

  bool positive_definite() const noexcept { return a11 > 0.0 && det() > 0.0; }
};

/// Value, gradient and Hessian of the negative log-likelihood in (xi, sigma).
struct LikDerivs {
  double value = 0.0;
  std::array<double, 2> grad{};
  Mat2 hess;
};

namespace detail {

inline bool admissible(const GpdParams& p, const TailData& d) {
  if (!(p.sigma > 0.0) || !std::isfinite(p.sigma) || !std::isfinite(p.xi)) return false;
  if (d.m > 0 && !(1.0 + p.xi * d.t_u() / p.sigma > 0.0)) return false;
  // exceedances are sorted descending, so the largest is the binding one
  return 1.0 + p.xi * d.exceedances.front() / p.sigma > 0.0;
}

inline void require_threshold(const TailData& d) {
  if (d.k() < 1) throw ValidationError("censored MLE: k >= 1 required");
  if (d.m > 0 && !d.T) throw ValidationError("censored MLE: a censoring threshold T is required when m > 0");
}

}  // namespace detail

/// -log L(xi, sigma): m censored terms plus k observed GPD log densities.
/// Returns +inf outside the admissible region.
inline double neg_loglik(const GpdParams& p, const TailData& d) {
  detail::require_threshold(d);
  if (!detail::admissible(p, d)) return std::numeric_limits<double>::infinity();
  const double xi = p.xi, s = p.sigma;
  const bool small = std::abs(xi) < kXiZero;
  double v = 0.0;
  if (d.m > 0) {
    const double w = d.t_u() / s;
    v += static_cast<double>(d.m) * (small ? w : std::log1p(xi * w) / xi);
  }
  const double ls = std::log(s);
  for (double e : d.exceedances) {
    const double r = e / s;
    v += (small ? r : (1.0 + 1.0 / xi) * std::log1p(xi * r)) + ls;
  }
  return v;
}

/// Analytic derivatives of neg_loglik; requires xi != 0 and admissible params.
inline LikDerivs neg_loglik_derivs(const GpdParams& p, const TailData& d) {
  detail::require_threshold(d);
  if (!detail::admissible(p, d)) throw DomainError("neg_loglik_derivs: parameters outside the admissible region");
  const double xi = p.xi, s = p.sigma;
  if (std::abs(xi) < kXiZero) throw DomainError("neg_loglik_derivs: xi too close to 0");
  const double xi2 = xi * xi, xi3 = xi2 * xi, s2 = s * s;
  LikDerivs out;
  auto& g = out.grad;
  auto& h = out.hess;
  if (d.m > 0) {
    const double mm = static_cast<double>(d.m);
    const double w = d.t_u() / s;
    const double z = 1.0 + xi * w;
    const double lz = std::log1p(xi * w);
    out.value += mm * lz / xi;
    g[0] += mm * (1.0 - 1.0 / z - lz) / xi2;
    g[1] += mm * (-w / (s * z));
    h.a11 += mm * (2.0 * lz / xi3 - 2.0 * w / (xi2 * z) - w * w / (xi * z * z));
    h.a22 += mm * (w * (1.0 + z) / (s2 * z * z));
    h.a12 += mm * (w * w / (s * z * z));
  }
  const double ls = std::log(s);
  const double c = 1.0 + 1.0 / xi;
  for (double e : d.exceedances) {
    const double r = e / s;
    const double z = 1.0 + xi * r;
    const double lz = std::log1p(xi * r);
    out.value += c * lz + ls;
    g[0] += -lz / xi2 + c * r / z;
    g[1] += 1.0 / s - (1.0 + xi) * r / (s * z);
    h.a11 += 2.0 * lz / xi3 - 2.0 * r / (xi2 * z) - c * r * r / (z * z);
    h.a22 += -1.0 / s2 + (1.0 + xi) * r * (1.0 + z) / (s2 * z * z);
    h.a12 += -r / (s * z) + (1.0 + xi) * r * r / (s * z * z);
  }
  return out;
}

/// Scale-free asymptotic information matrix M(xi, kappa); kappa = +inf means
/// no censoring in the limit.
inline Mat2 fisher_info(double xi, double kappa) {
  if (!(xi > 0.0)) throw DomainError("fisher_info: xi must be > 0");
  if (!(kappa > 1.0)) throw DomainError("fisher_info: kappa must be > 1");
  const double a = std::isinf(kappa) ? 0.0 : std::exp((-2.0 - 1.0 / xi) * std::log(kappa));
  const double p1 = 1.0 + xi, p2 = 1.0 + 2.0 * xi;
  Mat2 M;
  M.a11 = 2.0 / (p1 * p2);
  M.a22 = 1.0 / p2 - a / p2;
  M.a12 = 1.0 / (p1 * p2);
  if (a > 0.0) {
    const double c = a / (p1 * p2 * xi * xi);
    M.a11 += c * (-1.0 - xi + kappa * (2.0 + 4.0 * xi) - kappa * kappa * p1 * p2);
    M.a12 += c * (-p1 * p1 + (1.0 - 2.0 * kappa) * p1 * p2 + kappa * (2.0 + xi) * p2);
  }
  return M;
}

struct GpdFit {
  GpdParams params{};
  double loglik = -std::numeric_limits<double>::infinity();
  Mat2 info;
  bool converged = false;
  /// 1 + xi (T - u) / sigma at the estimate; +inf when m = 0.
  double kappa_hat = std::numeric_limits<double>::infinity();
  /// Sup-norm of the per-observation score in (log xi, log sigma).
  double grad_norm = std::numeric_limits<double>::infinity();
  int iterations = 0;
};

struct FitOptions {
  int restarts = 5;
  int max_simplex_iter = 500;
  int max_newton_iter = 100;
  double grad_tol = 1e-8;
  std::uint64_t seed = 0x6d6c6531ull;
};

namespace detail {

struct Simplex2 {
  std::array<std::array<double, 2>, 3> x;
  std::array<double, 3> f;
};

/// Nelder-Mead on R^2 with the standard coefficients (1, 2, 1/2, 1/2).
template <class F>
std::pair<std::array<double, 2>, double> nelder_mead(F&& fn, std::array<double, 2> x0, double step, int max_iter,
                                                     int& iters) {
  Simplex2 s;
  s.x = {x0, std::array<double, 2>{x0[0] + step, x0[1]}, std::array<double, 2>{x0[0], x0[1] + step}};
  for (int i = 0; i < 3; ++i) s.f[i] = fn(s.x[i]);
  auto lerp = [](const std::array<double, 2>& a, const std::array<double, 2>& b, double t) {
    return std::array<double, 2>{a[0] + t * (b[0] - a[0]), a[1] + t * (b[1] - a[1])};
  };
  int it = 0;
  for (; it < max_iter; ++it) {
    std::array<int, 3> o{0, 1, 2};
    std::sort(o.begin(), o.end(), [&](int a, int b) { return s.f[a] < s.f[b]; });
    const auto best = s.x[o[0]], mid = s.x[o[1]], worst = s.x[o[2]];
    const double fb = s.f[o[0]], fm = s.f[o[1]], fw = s.f[o[2]];
    const double size = std::max(std::abs(worst[0] - best[0]) + std::abs(worst[1] - best[1]),
                                 std::abs(mid[0] - best[0]) + std::abs(mid[1] - best[1]));
    if (std::isfinite(fw) && std::abs(fw - fb) <= 1e-14 * (1.0 + std::abs(fb)) && size < 1e-10) break;
    const std::array<double, 2> cen{0.5 * (best[0] + mid[0]), 0.5 * (best[1] + mid[1])};
    const auto xr = lerp(cen, worst, -1.0);
    const double fr = fn(xr);
    if (fr < fb) {
      const auto xe = lerp(cen, worst, -2.0);
      const double fe = fn(xe);
      if (fe < fr) {
        s.x[o[2]] = xe;
        s.f[o[2]] = fe;
      } else {
        s.x[o[2]] = xr;
        s.f[o[2]] = fr;
      }
    } else if (fr < fm) {
      s.x[o[2]] = xr;
      s.f[o[2]] = fr;
    } else {
      const bool outside = fr < fw;
      const auto xc = outside ? lerp(cen, xr, 0.5) : lerp(cen, worst, 0.5);
      const double fc = fn(xc);
      if (fc < (outside ? fr : fw)) {
        s.x[o[2]] = xc;
        s.f[o[2]] = fc;
      } else {
        for (int i : {o[1], o[2]}) {
          s.x[i] = lerp(best, s.x[i], 0.5);
          s.f[i] = fn(s.x[i]);
        }
      }
    }
  }
  iters += it;
  int ib = 0;
  for (int i = 1; i < 3; ++i)
    if (s.f[i] < s.f[ib]) ib = i;
  return {s.x[ib], s.f[ib]};
}

/// Gradient and Hessian in (a, b) = (log xi, log sigma), divided by m + k.
inline LikDerivs log_space_derivs(const std::array<double, 2>& ab, const TailData& d) {
  const GpdParams p{std::exp(ab[0]), std::exp(ab[1])};
  const LikDerivs raw = neg_loglik_derivs(p, d);
  const double nn = static_cast<double>(d.m + d.k());
  LikDerivs out;
  out.value = raw.value / nn;
  out.grad = {p.xi * raw.grad[0] / nn, p.sigma * raw.grad[1] / nn};
  out.hess.a11 = (p.xi * p.xi * raw.hess.a11 + p.xi * raw.grad[0]) / nn;
  out.hess.a22 = (p.sigma * p.sigma * raw.hess.a22 + p.sigma * raw.grad[1]) / nn;
  out.hess.a12 = p.xi * p.sigma * raw.hess.a12 / nn;
  return out;
}

}  // namespace detail

/// Maximizes the censored likelihood over (0, inf)^2.
inline GpdFit fit_mle(const TailData& d, const FitOptions& opt = {}) {
  detail::require_threshold(d);
  d.validate();
  GpdFit fit;
  double mean = 0.0;
  for (double e : d.exceedances) mean += e;
  mean /= static_cast<double>(d.k());
  if (!(mean > 0.0)) {
    // every exceedance is zero: the likelihood is unbounded as sigma -> 0
    fit.params = {0.5, 0.0};
    fit.converged = false;
    return fit;
  }

  auto obj = [&](const std::array<double, 2>& ab) {
    if (!(std::abs(ab[0]) < 700.0 && std::abs(ab[1]) < 700.0)) return std::numeric_limits<double>::infinity();
    return neg_loglik({std::exp(ab[0]), std::exp(ab[1])}, d);
  };

  const std::array<double, 2> base{std::log(0.5), std::log(0.5 * mean)};
  Philox4x32 rng(opt.seed, stream_id({d.k(), d.m}));
  std::normal_distribution<double> jitter(0.0, 0.5);
  std::array<double, 2> best = base;
  double fbest = std::numeric_limits<double>::infinity();
  for (int r = 0; r < std::max(1, opt.restarts); ++r) {
    std::array<double, 2> x0 = base;
    if (r > 0) {
      x0[0] += jitter(rng);
      x0[1] += jitter(rng);
    }
    auto [x, f] = detail::nelder_mead(obj, x0, 0.3, opt.max_simplex_iter, fit.iterations);
    if (f < fbest) {
      fbest = f;
      best = x;
    }
  }

  // Newton polish with a backtracking line search.
  std::array<double, 2> x = best;
  double fx = fbest;
  double gn = std::numeric_limits<double>::infinity();
  const double nn = static_cast<double>(d.m + d.k());
  for (int it = 0; it < opt.max_newton_iter && std::isfinite(fx); ++it) {
    LikDerivs L;
    try {
      L = detail::log_space_derivs(x, d);
    } catch (const DomainError&) {
      break;
    }
    gn = std::max(std::abs(L.grad[0]), std::abs(L.grad[1]));
    if (gn < opt.grad_tol) break;
    Mat2 H = L.hess;
    double damp = 0.0;
    while (!H.positive_definite()) {
      damp = damp == 0.0 ? 1e-6 * (std::abs(H.a11) + std::abs(H.a22) + 1e-12) : damp * 10.0;
      H = {L.hess.a11 + damp, L.hess.a12, L.hess.a22 + damp};
      if (damp > 1e12) break;
    }
    const Mat2 Hi = H.inverse();
    const std::array<double, 2> dir{-(Hi.a11 * L.grad[0] + Hi.a12 * L.grad[1]),
                                    -(Hi.a12 * L.grad[0] + Hi.a22 * L.grad[1])};
    bool moved = false;
    // Near the optimum the decrease falls below the rounding of the
    // objective, so a full step is also taken when it shrinks the gradient.
    {
      const std::array<double, 2> y{x[0] + dir[0], x[1] + dir[1]};
      const double fy = obj(y);
      if (fy <= fx + 1e-12 * (1.0 + std::abs(fx))) {
        try {
          const LikDerivs Ly = detail::log_space_derivs(y, d);
          if (std::max(std::abs(Ly.grad[0]), std::abs(Ly.grad[1])) < gn) {
            x = y;
            fx = std::min(fx, fy);
            moved = true;
          }
        } catch (const DomainError&) {
        }
      }
    }
    double t = 1.0;
    for (int ls = 0; ls < 60 && !moved; ++ls, t *= 0.5) {
      const std::array<double, 2> y{x[0] + t * dir[0], x[1] + t * dir[1]};
      const double fy = obj(y);
      if (fy <= fx + 1e-4 * t * nn * (L.grad[0] * dir[0] + L.grad[1] * dir[1])) {
        x = y;
        fx = fy;
        moved = true;
      }
    }
    ++fit.iterations;
    if (!moved) break;
  }
  if (gn >= opt.grad_tol && std::isfinite(fx)) {
    try {
      const LikDerivs L = detail::log_space_derivs(x, d);
      gn = std::max(std::abs(L.grad[0]), std::abs(L.grad[1]));
    } catch (const DomainError&) {
    }
  }

  fit.params = {std::exp(x[0]), std::exp(x[1])};
  fit.loglik = -fx;
  fit.grad_norm = gn;
  fit.kappa_hat = (d.m > 0 && d.T) ? 1.0 + fit.params.xi * d.t_u() / fit.params.sigma
                                   : std::numeric_limits<double>::infinity();
  fit.converged = gn < opt.grad_tol;
  if (fit.converged) {
    fit.info = fisher_info(fit.params.xi, fit.kappa_hat);
    fit.converged = fit.info.positive_definite();
  }
  return fit;
}

/// xi_hat +/- z sqrt([M^-1]_11 / k). Not truncated at 0, so that reported
/// lengths are those of the Wald interval.
inline ConfidenceInterval ci_index_ml(const GpdFit& fit, std::size_t k, double level) {
  if (!fit.converged) throw ConvergenceError("ci_index_ml: fit did not converge", {fit.grad_norm});
  const Mat2 Mi = fit.info.inverse();
  const double half = normal_critical(level) * std::sqrt(Mi.a11 / static_cast<double>(k));
  ConfidenceInterval ci;
  ci.lo = fit.params.xi - half;
  ci.hi = fit.params.xi + half;
  ci.level = level;
  ci.method = Method::ml;
  return ci;
}

namespace detail {
inline double d_n(const TailData& d, double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("tail probability p must lie in (0, 1)");
  const double pn = p * static_cast<double>(d.n);
  const double mk = static_cast<double>(d.m + d.k());
  if (pn > mk * (1.0 + 1e-12)) {
    std::ostringstream os;
    os << "p*n=" << pn << " exceeds m+k=" << mk << ": the target lies inside the sample, use the empirical quantile";
    throw DomainError(os.str());
  }
  return std::max(1.0, mk / pn);
}
}  // namespace detail

/// Q_hat(1 - p) = u + sigma/xi (d^xi - 1), d = (m+k)/(p n).
inline double quantile_point(const GpdFit& fit, const TailData& d, double p) {
  const double dn = detail::d_n(d, p);
  const double xi = fit.params.xi;
  const double lg = std::log(dn);
  if (std::abs(xi) < kXiZero) return d.u + fit.params.sigma * lg;
  return d.u + fit.params.sigma * std::expm1(xi * lg) / xi;
}

/// q_xi(t) = t^xi log(t) / xi.
inline double q_xi(double xi, double t) { return std::pow(t, xi) * std::log(t) / xi; }

/// Q_hat +/- z sigma_hat q(d) sqrt(Sigma / k), truncated below at u.
inline ConfidenceInterval ci_quantile_ml(const GpdFit& fit, const TailData& d, double p, double level) {
  if (!fit.converged) throw ConvergenceError("ci_quantile_ml: fit did not converge", {fit.grad_norm});
  const double dn = detail::d_n(d, p);
  const double Q = quantile_point(fit, d, p);
  ConfidenceInterval ci;
  ci.level = level;
  ci.method = Method::ml;
  if (dn <= 1.0) {
    ci.lo = ci.hi = Q;
    ci.degenerate = true;
    ci.note = "d_n = 1: target equals the tail cutoff, interval collapses to a point";
    return ci;
  }
  const double xi = fit.params.xi;
  const double q = q_xi(xi, dn);
  const double lg = std::log(dn);
  // Delta-method gradient of Q_hat in (xi, sigma_hat/sigma - 1), scaled by
  // 1 / (sigma q); v1 -> 0 as xi -> 0.
  const double v2 = -std::expm1(-xi * lg) / lg;
  const double v1 = std::abs(xi) < 1e-6 ? 0.5 * xi * lg : 1.0 - v2 / xi;
  const double Sigma = fit.info.inverse().quad(v1, v2) + 1.0 / (q * q);
  const double half = normal_critical(level) * fit.params.sigma * q * std::sqrt(Sigma / static_cast<double>(d.k()));
  ci.lo = std::max(d.u, Q - half);
  ci.hi = Q + half;
  return ci;
}

}  // namespace tailcen
