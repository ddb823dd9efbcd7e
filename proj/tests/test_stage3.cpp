#include "oracles.hpp"
#include "tube/error.hpp"
#include "tube/stage3.hpp"

#include <doctest.h>

#include <random>

using namespace tube;

TEST_CASE("projection of symmetric imputations is zero") {
  Eigen::MatrixXd x(4, 1), g(4, 1);
  x << 0, 1, 2, 3;
  g << -1, 0.5, 1, 2;
  const Dataset d(x, g, {0.0, 1.0, std::nullopt, std::nullopt}, 2);
  StageTwoImputations im;
  im.labeled = Eigen::VectorXd::Constant(2, 0.5);
  im.all = Eigen::VectorXd::Constant(4, 0.5);
  const ProjectionFits f = fit_projection(im, d);
  CHECK(f.beta0.coefficients.cwiseAbs().maxCoeff() < 1e-8);
  CHECK(f.beta1.coefficients.cwiseAbs().maxCoeff() < 1e-8);
}

TEST_CASE("projection with hard true labels is plain logistic regression") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> z;
  Eigen::MatrixXd x(80, 1), g(80, 2);
  Eigen::VectorXd y(80);
  std::vector<std::optional<double>> ys(80);
  for (int i = 0; i < 80; ++i) {
    x(i, 0) = z(rng);
    g.row(i) << z(rng), z(rng);
    y[i] = (g(i, 0) + z(rng)) > 0;
    if (i < 30) ys[static_cast<std::size_t>(i)] = y[i];
  }
  const Dataset d(x, g, ys, 1);
  StageTwoImputations im;
  im.labeled = y.head(30);
  im.all = y;
  const ProjectionFits f = fit_projection(im, d);
  CHECK((f.beta1.coefficients - oracle::grid_logistic(y, d.risk_design())).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("sign alignment") {
  Eigen::MatrixXd design(2, 2);
  design << 1, 0, 1, 1;
  Eigen::VectorXd y(2);
  y << 0.2, 0.8;
  LogisticFit up = fit_fractional_logistic(y, design);
  SignPolicy pol;
  pol.anchor = 1;
  CHECK_FALSE(sign_align(up, y, design, pol).sign_flipped);

  const Eigen::VectorXd yc = (1.0 - y.array()).matrix();
  const LogisticFit down = fit_fractional_logistic(yc, design);
  CHECK(down.coefficients[1] < 0);
  const AlignedFit a = sign_align(down, yc, design, pol);
  CHECK(a.sign_flipped);
  CHECK(a.fit.coefficients[1] == doctest::Approx(up.coefficients[1]).epsilon(1e-8));

  SignPolicy prev;
  prev.kind = SignPolicyKind::prevalence;
  Eigen::MatrixXd ones = Eigen::MatrixXd::Ones(3, 1);
  Eigen::VectorXd b(1);
  b << logit(0.7);
  CHECK(needs_flip(b, ones, prev));
  b << logit(0.3);
  CHECK_FALSE(needs_flip(b, ones, prev));
}

TEST_CASE("combination weight") {
  CHECK(optimal_omega(1, 1, 0) == doctest::Approx(0.5));
  CHECK(optimal_omega(1, 4, 0) == doctest::Approx(0.8));
  bool degenerate = false;
  CHECK(optimal_omega(1, 1, 1, &degenerate) == 0.5);
  CHECK(degenerate);

  Eigen::VectorXd b0(2), b1(2);
  b0 << 1, 2;
  b1 << 3, 6;
  Eigen::MatrixXd cov = Eigen::MatrixXd::Zero(4, 4);
  cov.diagonal() << 1, 1, 4, 1;
  const CombinedBeta c = combine_beta(b0, b1, cov);
  CHECK(c.omega[0] == doctest::Approx(0.8));
  CHECK(c.omega[1] == doctest::Approx(0.5));
  CHECK(c.beta[0] == doctest::Approx(0.8 * 1 + 0.2 * 3));
  CHECK(c.se[0] == doctest::Approx(std::sqrt(0.64 + 0.04 * 4)));
}

TEST_CASE("roc curve basics") {
  StepSurvival s;
  s.jump_points = {1, 2, 3};
  s.jump_sizes = {0.2, 0.5, 0.3};
  CHECK(roc_curve(s, s).auc == doctest::Approx(0.5));
  StepSurvival lo, hi;
  lo.jump_points = hi.jump_points = {1, 2, 3, 4};
  lo.jump_sizes = {0.5, 0.5, 0, 0};
  hi.jump_sizes = {0, 0, 0.4, 0.6};
  CHECK(roc_curve(lo, hi).auc == doctest::Approx(1.0));
  const RocCurve r = roc_curve(lo, hi);
  CHECK(r.fpr.front() == 0.0);
  CHECK(r.tpr.back() == doctest::Approx(1.0));
}

TEST_CASE("weighted concordance") {
  Eigen::VectorXd s(4), w(4);
  s << 1, 2, 3, 4;
  w << 0.1, 0.2, 0.8, 0.9;
  // ordered pairs a > b: 0.18 + 0.72 + 0.64 + 0.81 + 0.72 + 0.18 = 3.25; each
  // record with itself ties: 0.5 * (0.09 + 0.16 + 0.16 + 0.09) = 0.25; over 2 * 2
  CHECK(score_auc(s, w) == doctest::Approx(3.5 / 4.0).epsilon(1e-14));
  CHECK(score_auc(Eigen::VectorXd::Zero(4), w) == doctest::Approx(0.5));
  Eigen::VectorXd hard(4);
  hard << 0, 1, 0, 1;
  // hard labels: classes {2, 4} vs {1, 3}: concordant pairs (2,1) (4,1) (4,3)
  CHECK(score_auc(s, hard) == doctest::Approx(0.75));
}
