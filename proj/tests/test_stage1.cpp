#include "fixtures.hpp"
#include "tube/error.hpp"
#include "tube/stage1.hpp"

#include <doctest.h>

#include <cmath>

using namespace tube;

namespace {

StageOneParams neutral_theta(const SieveBases& b, int k) {
  StageOneParams t;
  t.xi = Eigen::VectorXd::Zero(b.psi.cols());
  for (const auto& phi : b.phi) t.zeta.push_back(Eigen::VectorXd::Zero(phi.cols()));
  t.lambda = initial_lambda(k);
  t.mu = 0.5;
  return t;
}

}  // namespace

TEST_CASE("initial label-error matrix") {
  const Eigen::MatrixXd l = initial_lambda(2);
  CHECK(l(1, 0) == doctest::Approx(0.075));
  CHECK(l(1, 1) == doctest::Approx(0.075));
  CHECK(l(1, 2) == doctest::Approx(0.85));
  CHECK(l(0, 0) == doctest::Approx(0.85));
  CHECK(l(0, 1) == doctest::Approx(0.075));
  CHECK(l(0, 2) == doctest::Approx(0.075));
}

TEST_CASE("starting values") {
  Eigen::MatrixXd x(6, 1), g(6, 1);
  x << 0.1, -0.3, 1.2, 0.4, 0.0, 2.0;
  g << 1.0, 0.5, -1.0, 0.2, 0.3, -0.4;
  const std::vector<std::optional<double>> ys{1.0, 0.0, 1.0, 0.5, std::nullopt, std::nullopt};
  const Dataset d(x, g, ys, 2);
  const SieveBases b = fixture::linear_bases(d);
  const StageOneParams t = init_theta(d, b);
  CHECK(t.mu == doctest::Approx(0.5));
  Eigen::VectorXd dagger(4);
  dagger << 1, 0, 1, 0;
  const auto ref = fit_fractional_logistic(dagger, b.phi[0].topRows(4)).coefficients;
  CHECK((t.zeta[0] - ref).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("composite likelihood: neutral parameters cancel") {
  const Dataset d = fixture::random_dataset(30, 12, 2, 1, 3);
  const SieveBases b = fixture::linear_bases(d);
  StageOneParams t = neutral_theta(b, 2);
  t.lambda.row(0) << 0.2, 0.3, 0.5;
  t.lambda.row(1) = t.lambda.row(0);
  t.xi << 0.4, -1.1;  // arbitrary: identical rows make the label term free of xi
  double expect = 0;
  for (auto i : d.labeled_rows()) expect += std::log(t.lambda(0, d.label_level(i)));
  // zeta = 0, mu = 1/2: every surrogate term is log(g + 1 - g) = 0
  CHECK(composite_loglik(t, d, b) == doctest::Approx(expect).epsilon(1e-14));
}

TEST_CASE("composite likelihood matches a direct evaluation") {
  const Dataset d = fixture::random_dataset(20, 8, 2, 2, 5);
  const SieveBases b = fixture::linear_bases(d);
  StageOneParams t = neutral_theta(b, 2);
  t.xi << -0.3, 0.8, -0.5;
  t.zeta[0] << 0.2, 1.1;
  t.zeta[1] << -0.7, 0.4;
  t.lambda << 0.6, 0.3, 0.1, 0.05, 0.25, 0.7;
  t.mu = 0.37;
  double ref = 0;
  auto g = [](double w) { return 1 / (1 + std::exp(-w)); };
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    const double pg = g(t.xi[0] + t.xi[1] * d.g()(i, 0) + t.xi[2] * d.g()(i, 1));
    if (d.labeled(i)) {
      const int k = static_cast<int>(std::lround(*d.y_star(i) * 2));
      ref += std::log(t.lambda(1, k) * pg + t.lambda(0, k) * (1 - pg));
    }
    for (int j = 0; j < 2; ++j) {
      const double px = g(t.zeta[j][0] + t.zeta[j][1] * d.x()(i, j));
      ref += std::log(px * pg / t.mu + (1 - px) * (1 - pg) / (1 - t.mu));
    }
  }
  CHECK(std::abs(composite_loglik(t, d, b) - ref) < 1e-12);
}

TEST_CASE("E-step cancellations and a hand value") {
  const Dataset d = fixture::random_dataset(25, 10, 2, 1, 8);
  const SieveBases b = fixture::linear_bases(d);
  StageOneParams t = neutral_theta(b, 2);
  t.xi << 0.3, 0.9;
  const StageOneImputations imp = e_step_stage1(t, d, b);
  const Eigen::VectorXd eta = b.psi * t.xi;
  for (Eigen::Index i = 0; i < d.size(); ++i)
    for (int j = 0; j < 2; ++j) CHECK(imp.surrogate(i, j) == doctest::Approx(expit(eta[i])));

  t.lambda.row(1) = t.lambda.row(0);
  const StageOneImputations same = e_step_stage1(t, d, b);
  Eigen::Index r = 0;
  for (auto i : d.labeled_rows()) CHECK(same.labeled[r++] == doctest::Approx(expit(eta[i])));

  // psi'xi = 0, grade 1 (k = K), starting lambda: 0.85 / (0.85 + 0.075)
  Eigen::MatrixXd x(1, 1), g(1, 1);
  x << 0.0;
  g << 0.0;
  const Dataset one(x, g, {1.0}, 2);
  const SieveBases b1 = fixture::linear_bases(one);
  const StageOneImputations h = e_step_stage1(neutral_theta(b1, 2), one, b1);
  CHECK(h.labeled[0] == doctest::Approx(0.85 / 0.925).epsilon(1e-14));
  CHECK(h.labeled[0] == doctest::Approx(0.9189).epsilon(1e-4));
}

TEST_CASE("label-error update") {
  Eigen::MatrixXd x = Eigen::MatrixXd::Zero(5, 1), g = Eigen::MatrixXd::Zero(5, 1);
  const std::vector<std::optional<double>> ys{0.0, 0.5, 1.0, 1.0, 0.0};
  const Dataset d(x, g, ys, 2);
  Eigen::VectorXd hard(5);
  hard << 0, 0, 1, 1, 1;
  const Eigen::MatrixXd l = update_lambda(hard, d);
  CHECK(l(0, 0) == doctest::Approx(0.5));
  CHECK(l(0, 1) == doctest::Approx(0.5));
  CHECK(l(1, 2) == doctest::Approx(2.0 / 3.0));
  CHECK(l(1, 0) == doctest::Approx(1.0 / 3.0));

  // two records, grades 0 and 1, posteriors 0.3 and 0.9
  const Dataset two(Eigen::MatrixXd::Zero(2, 1), Eigen::MatrixXd::Zero(2, 1),
                    {0.0, 1.0}, 2);
  Eigen::VectorXd post(2);
  post << 0.3, 0.9;
  const Eigen::MatrixXd m = update_lambda(post, two);
  // class 1: masses 0.3 (k=0), 0.9 (k=2) over 1.2; class 0: 0.7, 0.1 over 0.8
  CHECK(std::abs(m(1, 0) - 0.25) < 1e-5);
  CHECK(std::abs(m(1, 2) - 0.75) < 1e-5);
  CHECK(std::abs(m(0, 0) - 0.875) < 1e-5);
  CHECK(std::abs(m(0, 2) - 0.125) < 1e-5);
}

TEST_CASE("M-step: mu is the mean imputation; pooled xi equals a stacked fit") {
  const Dataset d = fixture::random_dataset(40, 15, 1, 1, 21);
  const SieveBases b = fixture::linear_bases(d);
  StageOneImputations c;
  c.labeled = Eigen::VectorXd::Constant(d.n_labeled(), 0.3);
  c.surrogate = Eigen::MatrixXd::Constant(d.size(), 1, 0.3);
  const StageOneParams start = init_theta(d, b);
  CHECK(m_step_stage1(c, d, b, start).mu == doctest::Approx(0.3));

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u;
  StageOneImputations r;
  r.labeled.resize(d.n_labeled());
  r.surrogate.resize(d.size(), 1);
  for (Eigen::Index i = 0; i < r.labeled.size(); ++i) r.labeled[i] = u(rng);
  for (Eigen::Index i = 0; i < d.size(); ++i) r.surrogate(i, 0) = u(rng);
  EmConfig frozen;
  frozen.frozen.lambda = frozen.frozen.zeta = frozen.frozen.mu = true;
  const StageOneParams next = m_step_stage1(r, d, b, start, frozen);
  CHECK(next.zeta[0] == start.zeta[0]);
  CHECK(next.lambda == start.lambda);
  const Eigen::Index n = d.n_labeled(), big = d.size();
  Eigen::MatrixXd stacked(n + big, b.psi.cols());
  Eigen::VectorXd y(n + big);
  for (Eigen::Index k = 0; k < n; ++k) {
    stacked.row(k) = b.psi.row(d.labeled_rows()[static_cast<std::size_t>(k)]);
    y[k] = r.labeled[k];
  }
  stacked.bottomRows(big) = b.psi;
  y.tail(big) = r.surrogate.col(0);
  const auto ref = fit_fractional_logistic(y, stacked).coefficients;
  CHECK((next.xi - ref).cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("EM: ascent with mu held fixed, violations counted otherwise") {
  const auto sim = fixture::small_cohort();
  BasisConfig bc;
  bc.default_df = 4;
  const SieveBases b = prepare_bases(sim.data.x(), sim.data.g(), bc);
  EmConfig strict;
  strict.strict_ascent = true;
  strict.acceleration = EmAcceleration::none;
  strict.frozen.mu = true;
  StageOneFit f;
  CHECK_NOTHROW(f = run_em_stage1(sim.data, b, strict));
  CHECK(f.trace.ascent_violations == 0);
  for (std::size_t r = 1; r < f.trace.objective_per_iteration.size(); ++r) {
    const double prev = f.trace.objective_per_iteration[r - 1];
    CHECK(f.trace.objective_per_iteration[r] >= prev - 1e-8 * std::abs(prev));
  }

  const long before = em_ascent_violations(EmStage::one);
  const StageOneFit g = run_em_stage1(sim.data, b, EmConfig{});
  CHECK(g.trace.converged);
  CHECK(em_ascent_violations(EmStage::one) - before == g.trace.ascent_violations);
  MESSAGE("stage I ascent violations (mu updated): " << g.trace.ascent_violations);
}
