#include "fixtures.hpp"
#include "tube/error.hpp"
#include "tube/pipeline.hpp"
#include "tube/simlab.hpp"

#include <doctest.h>

#include <algorithm>

using namespace tube;

TEST_CASE("stratified resample keeps the labeled count") {
  const Dataset d = fixture::random_dataset(50, 12, 1, 1, 2);
  Rng a = derive_rng(5, 0), b = derive_rng(5, 0);
  const auto r1 = stratified_resample(d, a);
  const auto r2 = stratified_resample(d, b);
  CHECK(r1 == r2);
  CHECK(r1.size() == 50);
  const long lab = std::count_if(r1.begin(), r1.end(), [&](Eigen::Index i) { return d.labeled(i); });
  CHECK(lab == 12);
}

TEST_CASE("sample covariance") {
  Eigen::MatrixXd same(2, 3);
  same << 1, 2, 3, 1, 2, 3;
  CHECK(sample_covariance(same).cwiseAbs().maxCoeff() == 0.0);
  Eigen::MatrixXd m(3, 2);
  m << 1, 2, 3, 4, 5, 9;
  const Eigen::MatrixXd c = sample_covariance(m);
  CHECK(c(0, 0) == doctest::Approx(4.0));
  CHECK(c(1, 1) == doctest::Approx(13.0));
  CHECK(c(0, 1) == doctest::Approx(7.0));
}

TEST_CASE("derived streams do not depend on threads") {
  std::vector<std::uint64_t> one(16), many(16);
  parallel_for(16, 1, [&](long r) { one[static_cast<std::size_t>(r)] = derive_rng(9, static_cast<std::uint64_t>(r))(); });
  parallel_for(16, 4, [&](long r) { many[static_cast<std::size_t>(r)] = derive_rng(9, static_cast<std::uint64_t>(r))(); });
  CHECK(one == many);
  CHECK(derive_seed(9, 1) != derive_seed(9, 2));
}

TEST_CASE("pipeline: bootstrap is thread-invariant; no bootstrap means omega 1/2") {
  const auto sim = fixture::small_cohort(1500, 150, 21);
  PipelineConfig pc;
  pc.bases.default_df = 4;
  pc.bootstrap = 3;
  pc.threads = 1;
  const TubeResult a = run_tube(sim.data, pc);
  pc.threads = 3;
  const TubeResult b = run_tube(sim.data, pc);
  REQUIRE(a.bootstrap);
  REQUIRE(b.bootstrap);
  CHECK(a.bootstrap->draws == b.bootstrap->draws);
  CHECK(a.risk.combined.beta == b.risk.combined.beta);
  CHECK(a.stage1_violations() == b.stage1_violations());
  MESSAGE("violations stage I " << a.stage1_violations() << ", stage II " << a.stage2_violations());

  pc.bootstrap = 0;
  const TubeResult c = run_tube(sim.data, pc);
  CHECK_FALSE(c.bootstrap);
  for (Eigen::Index k = 0; k < c.risk.combined.omega.size(); ++k)
    CHECK(c.risk.combined.omega[k] == 0.5);
  CHECK(c.fit.roc.auc > 0.5);
  CHECK(c.fit.beta1.fit.coefficients[1] > 0);
}

TEST_CASE("simulated cohorts") {
  SimSetting s;
  s.N = 3000;
  s.n = 100;
  s.seed = 42;
  const SimulatedData a = generate_dataset(s), b = generate_dataset(s);
  CHECK(a.data.x() == b.data.x());
  CHECK(a.data.g() == b.data.g());
  CHECK(a.y_true == b.y_true);
  CHECK(a.data.n_labeled() == 100);
  for (Eigen::Index i = 0; i < a.data.size(); ++i) {
    CHECK((a.y_true[i] == 0.0 || a.y_true[i] == 1.0));
    for (int j = 1; j < 4; ++j) {
      const double v = a.data.g()(i, j);
      CHECK((v == 0.0 || v == 1.0 || v == 2.0));
    }
  }
  s.n = 0;
  CHECK_THROWS_AS(validate_setting(s), ConfigError);
  s.n = 10;
  s.name = 'z';
  CHECK_THROWS_AS(validate_setting(s), ConfigError);
}

TEST_CASE("population oracle reproduces the tabled truths") {
  SimSetting s;
  const PopulationOracle a = population_oracle(s, 1000000);
  Eigen::VectorXd expect(5);
  expect << -4.6, 1.6, 1.6, 1.6, 1.6;
  MESSAGE("setting a beta_bar " << a.beta_bar.transpose() << ", auc " << a.auc_bar);
  CHECK((a.beta_bar - expect).cwiseAbs().maxCoeff() < 0.05);
  CHECK(a.auc_bar == doctest::Approx(0.702).epsilon(0.015));
  s.name = 'b';
  const PopulationOracle b = population_oracle(s, 1000000);
  expect << 1.3, 0.7, -0.7, -0.7, -0.7;
  MESSAGE("setting b beta_bar " << b.beta_bar.transpose());
  CHECK((b.beta_bar - expect).cwiseAbs().maxCoeff() < 0.05);
}

TEST_CASE("replication harness") {
  SimSetting s;
  s.replications = 0;
  SimConfig c;
  c.oracle_draws = 1000000;
  const SimReport empty = run_replications(s, c);
  for (const auto& m : empty.methods) CHECK(m.estimates.empty());

  s.N = 1500;
  s.n = 150;
  s.replications = 2;
  c.pipeline.bases.default_df = 4;
  c.pipeline.bootstrap = 0;
  c.methods = {SimMethod::naive_logistic, SimMethod::tube};
  CHECK_THROWS_AS(run_replications(s, c, empty.oracle), ConfigError);
  const PopulationOracle pop = population_oracle(s, 1000000);
  const SimReport r = run_replications(s, c, pop);
  for (const auto& m : r.methods) {
    CHECK(m.failures == 0);
    for (const auto& row : m.rows) {
      CHECK(row.percent_bias >= 0.0);
      CHECK(row.percent_bias <= 1.0 + 1e-12);
    }
  }
  c.threads = 2;
  const SimReport r2 = run_replications(s, c, pop);
  CHECK(r2.methods[1].estimates == r.methods[1].estimates);
}

TEST_CASE("reference metrics") {
  const auto sim = fixture::small_cohort(500, 50, 3);
  const Eigen::MatrixXd design = sim.data.risk_design();
  Eigen::VectorXd beta(5);
  beta << -4.6, 1.6, 1.6, 1.6, 1.6;
  const ReferenceMetrics self = eval_against_reference(beta, beta, design, sim.y_true);
  CHECK(self.mspe == 0.0);
  CHECK(self.false_class == 0.0);
  CHECK(self.class_cor == doctest::Approx(1.0));
  CHECK(self.deviance_delta == 0.0);
  const ReferenceMetrics flip = eval_against_reference(-beta, beta, design);
  CHECK(flip.class_cor < 0.0);
  CHECK(flip.false_class > 0.5);
}
