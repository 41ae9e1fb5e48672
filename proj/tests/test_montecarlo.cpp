#include <gtest/gtest.h>

#include <cmath>

#include "tailcen/montecarlo.hpp"

using namespace tailcen;

namespace {

McConfig small_experiment() {
  McConfig c;
  c.n = 200;
  c.cen_p = 0.01;
  c.reps = 40;
  c.seed = 5;
  c.fk.xi_grid.clear();
  for (int i = 1; i <= 10; ++i) c.fk.xi_grid.push_back(i / 10.0);
  c.fk.cv_draws = 2000;
  c.fk.lambda_draws = 2000;
  return c;
}

TailData tail_with(std::size_t k, bool threshold) {
  std::vector<double> y;
  for (std::size_t i = 0; i < k + 20; ++i) y.push_back(1.0 + static_cast<double>(i));
  if (threshold) return TailData::from_sample(y, k, 1e6);
  return TailData::from_sample(y, k, std::nullopt, std::size_t{2});
}

}  // namespace

TEST(Targets, NamesAndParsing) {
  EXPECT_EQ(TargetSpec::index().name(), "index");
  EXPECT_EQ(TargetSpec::quantile(0.01).name(), "q99");
  EXPECT_EQ(TargetSpec::quantile(0.001).name(), "q999");
  EXPECT_NEAR(parse_target("q999").p, 0.001, 1e-15);
  EXPECT_TRUE(parse_target("index").is_index());
  EXPECT_THROW(parse_target("median"), ValidationError);
}

TEST(Hybrid, SwitchesAboveTwoHundredFifty) {
  EXPECT_EQ(hybrid_choice(tail_with(251, true)), Method::ml);
  EXPECT_EQ(hybrid_choice(tail_with(250, true)), Method::fk);
  EXPECT_EQ(hybrid_choice(tail_with(50, true)), Method::fk);
  EXPECT_EQ(hybrid_choice(tail_with(251, false)), Method::fk);
}

TEST(Hybrid, FkBranchUsesTheTailsKAndM) {
  McConfig c = small_experiment();
  TableStore tables(c.fk, std::nullopt);
  Philox4x32 rng(3, 0);
  const auto y = dgp_sample(c.dgp, 300, rng);
  std::vector<double> s(y);
  std::sort(s.begin(), s.end(), std::greater<>());
  const TailData d = TailData::from_sample(y, 12, 0.5 * (s[3] + s[4]));
  ASSERT_EQ(d.m, 4u);
  const MethodResult r = hybrid_dispatch(d, TargetSpec::index(), tables);
  EXPECT_EQ(r.ci.method, Method::fk);
  EXPECT_EQ(tables.cv(12, 4).k, 12u);
  EXPECT_EQ(tables.cv(12, 4).m, 4u);
}

TEST(McConfig, Validation) {
  McConfig c;
  c.reps = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = McConfig{};
  c.cen_p = 1.0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = McConfig{};
  c.n = 40;
  EXPECT_THROW(c.validate(), ValidationError);
  EXPECT_EQ(McConfig{}.k(), 50u);
}

TEST(RunExperiment, RowsAreWellFormed) {
  const McConfig c = small_experiment();
  const McReport r = run_experiment(c);
  // hill and gi only report the index
  EXPECT_EQ(r.rows.size(), 2u + 2u * 3u);
  for (const auto& w : r.rows) {
    EXPECT_EQ(w.used + w.failures, c.reps) << to_string(w.method) << ' ' << w.target;
    if (w.used == 0) continue;
    EXPECT_GE(w.coverage, 0.0);
    EXPECT_LE(w.coverage, 1.0);
    EXPECT_NEAR(w.mc_std_err, std::sqrt(w.coverage * (1 - w.coverage) / w.used), 1e-15);
    if (w.target == "index")
      EXPECT_EQ(w.truth, 0.5);
    else
      EXPECT_EQ(w.truth, dgp_true_quantile(c.dgp, w.target == "q99" ? 0.99 : 0.999));
    if (w.method == Method::fk) EXPECT_TRUE(std::isnan(w.bias));
  }
  EXPECT_NE(r.find(Method::fk, "q999"), nullptr);
  EXPECT_EQ(r.find(Method::hill, "q99"), nullptr);
}

TEST(RunExperiment, IdenticalAcrossWorkerCounts) {
  McConfig c = small_experiment();
  c.threads = 1;
  const auto a = to_json(run_experiment(c)).dump();
  c.threads = 4;
  const auto b = to_json(run_experiment(c)).dump();
  EXPECT_EQ(a, b);
}

TEST(RunExperiment, BaselineCensoringTreatmentMatters) {
  McConfig c = small_experiment();
  c.methods = {Method::hill};
  c.targets = {TargetSpec::index()};
  c.cen_p = 0.05;
  const double dropped = run_experiment(c).rows.at(0).bias;
  c.baselines_drop_censored = false;
  const double topcoded = run_experiment(c).rows.at(0).bias;
  EXPECT_NE(dropped, topcoded);
}

TEST(RunExperiment, FailuresAreCountedNotDropped) {
  McConfig c = small_experiment();
  c.methods = {Method::ml};
  c.targets = {TargetSpec::quantile(0.2)};
  const McReport r = run_experiment(c);
  ASSERT_EQ(r.rows.size(), 1u);
  EXPECT_EQ(r.rows[0].failures, c.reps);
  EXPECT_FALSE(r.rows[0].first_error.empty());
  EXPECT_NE(to_csv(r).find("NA"), std::string::npos);
}

TEST(Report, CsvAndJsonCarryEveryRow) {
  McConfig c = small_experiment();
  c.methods = {Method::hill, Method::ml};
  const McReport r = run_experiment(c);
  const std::string csv = to_csv(r);
  EXPECT_EQ(static_cast<std::size_t>(std::count(csv.begin(), csv.end(), '\n')), r.rows.size() + 1);
  EXPECT_EQ(to_json(r)["rows"].size(), r.rows.size());
  EXPECT_NE(to_table(r).find("q999"), std::string::npos);
}
