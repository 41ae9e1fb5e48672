#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <cstring>
#include <string>
#include <vector>

#include "tailcen/error.hpp"
#include "tailcen/fixed_k/densities.hpp"

namespace tailcen::fk {

/// {1/50, 2/50, ..., 1}.
inline std::vector<double> default_xi_grid() {
  std::vector<double> g(50);
  for (int i = 0; i < 50; ++i) g[static_cast<std::size_t>(i)] = (i + 1) / 50.0;
  return g;
}

struct FkConfig {
  std::vector<double> xi_grid = default_xi_grid();
  /// Weights W on xi_grid; empty means uniform.
  std::vector<double> weights;
  /// Confidence level of index and quantile sets (the tests have size 1 - level).
  double level = 0.95;
  /// Draws behind critical values (direct and importance-sampled tables).
  std::size_t cv_draws = 100000;
  /// Draws behind the Lagrange-weight solver.
  std::size_t lambda_draws = 20000;
  double lambda_tol = 0.001;
  /// Gauss-Seidel sweeps.
  int lambda_max_iter = 500;
  std::uint64_t seed = 12345;
  /// 0 = hardware concurrency.
  unsigned threads = 0;
  /// Refine the hull of the accepted index set by bisection (off-grid
  /// critical values are then simulated directly).
  bool refine = false;
  double refine_resolution = 0.005;
  /// Relative difference allowed between p*n and a Lagrange table's h.
  double h_tolerance = 0.1;
  QuadratureSettings quad;

  std::vector<double> resolved_weights() const {
    if (!weights.empty()) return weights;
    return std::vector<double>(xi_grid.size(), 1.0 / static_cast<double>(xi_grid.size()));
  }

  void validate() const {
    if (xi_grid.empty()) throw ValidationError("FkConfig: empty xi grid");
    for (std::size_t i = 0; i < xi_grid.size(); ++i) {
      if (!(xi_grid[i] > 0.0 && xi_grid[i] <= 1.0)) throw ValidationError("FkConfig: xi grid must lie in (0, 1]", {i});
      if (i > 0 && !(xi_grid[i] > xi_grid[i - 1]))
        throw ValidationError("FkConfig: xi grid must be strictly increasing", {i});
    }
    if (!weights.empty()) {
      if (weights.size() != xi_grid.size()) throw ValidationError("FkConfig: weights and grid differ in length");
      double s = 0.0;
      for (std::size_t i = 0; i < weights.size(); ++i) {
        if (!(weights[i] >= 0.0)) throw ValidationError("FkConfig: negative weight", {i});
        s += weights[i];
      }
      if (std::abs(s - 1.0) > 1e-9) throw ValidationError("FkConfig: weights must sum to 1");
    }
    if (!(level > 0.0 && level < 1.0)) throw ValidationError("FkConfig: level must lie in (0, 1)");
    if (cv_draws < 100 || lambda_draws < 100) throw ValidationError("FkConfig: too few simulation draws");
  }

  /// FNV-1a over the grid and the resolved weights.
  std::uint64_t grid_hash() const {
    std::uint64_t h = 0xcbf29ce484222325ull;
    auto mix = [&](double v) {
      unsigned char b[sizeof(double)];
      std::memcpy(b, &v, sizeof v);
      for (unsigned char c : b) {
        h ^= c;
        h *= 0x100000001b3ull;
      }
    };
    for (double v : xi_grid) mix(v);
    for (double v : resolved_weights()) mix(v);
    return h;
  }
};

/// Stream tags so that different simulations never share random numbers.
enum class StreamTag : std::uint64_t { cv_direct = 1, cv_table = 2, lambda_solve = 3, lambda_check = 4 };

/// log(sum exp(v_i)).
inline double log_sum_exp(const double* v, std::size_t n) {
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) mx = std::max(mx, v[i]);
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += std::exp(v[i] - mx);
  return mx + std::log(s);
}

}  // namespace tailcen::fk
