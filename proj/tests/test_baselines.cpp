#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <functional>
#include <vector>

#include "tailcen/baselines.hpp"
#include "tailcen/distributions.hpp"

using namespace tailcen;

TEST(Hill, MeanLogExcess) {
  const std::vector<double> y{std::exp(3.0), std::exp(2.0), std::exp(1.0), 1.0, 0.5};
  const BaselineFit f = hill(y, 3);
  EXPECT_NEAR(f.xi_hat, 2.0, 1e-14);
  EXPECT_NEAR(f.se, 2.0 / std::sqrt(3.0), 1e-14);
  EXPECT_EQ(f.k_used, 3u);
  const auto ci = f.ci(0.95);
  EXPECT_NEAR(ci.hi - ci.lo, 2 * 1.959963984540054 * f.se, 1e-12);
  EXPECT_EQ(ci.method, Method::hill);
}

// Points exactly on log(i - 1/2) = a - alpha log y give slope -alpha.
TEST(Gi, ExactLineRecoversIndex) {
  const double alpha = 2.5, a = 4.0;
  std::vector<double> y;
  for (int i = 1; i <= 30; ++i) y.push_back(std::exp((a - std::log(i - 0.5)) / alpha));
  const BaselineFit f = gi(y, 20);
  EXPECT_NEAR(f.xi_hat, 1 / alpha, 1e-12);
  EXPECT_NEAR(f.se, f.xi_hat * std::sqrt(2.0 / 20), 1e-12);
}

TEST(Baselines, ScaleInvariant) {
  Philox4x32 rng(4, 4);
  auto y = dgp_sample(DgpSpec::gpd_default(), 500, rng);
  std::sort(y.begin(), y.end(), std::greater<>());
  auto z = y;
  for (auto& v : z) v *= 13.0;
  EXPECT_NEAR(hill(y, 40).xi_hat, hill(z, 40).xi_hat, 1e-12);
  EXPECT_NEAR(gi(y, 40).xi_hat, gi(z, 40).xi_hat, 1e-12);
}

TEST(Baselines, NearTruthOnPareto) {
  Philox4x32 rng(5, 5);
  auto y = dgp_sample(DgpSpec::gpd_default(), 100000, rng);
  std::sort(y.begin(), y.end(), std::greater<>());
  const auto h = hill(y, 2000);
  EXPECT_NEAR(h.xi_hat, 0.5, 4 * h.se);
  const auto g = gi(y, 2000);
  EXPECT_NEAR(g.xi_hat, 0.5, 4 * g.se);
}

TEST(Baselines, InputValidation) {
  const std::vector<double> y{5, 4, 3, 2, 1};
  EXPECT_THROW(hill(y, 5), ValidationError);
  EXPECT_THROW(hill(y, 1), ValidationError);
  EXPECT_THROW(hill({1, 2, 3, 4}, 2), ValidationError);
  EXPECT_THROW(hill({3, 2, 1, 0}, 3), DomainError);
  EXPECT_THROW(gi({2, 2, 2, 1}, 3), DomainError);
}
