#include "oracles.hpp"
#include "tube/error.hpp"
#include "tube/glm.hpp"

#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace tube;

TEST_CASE("expit") {
  CHECK(expit(0.0) == 0.5);
  // 1 - e^{-40}/(1 + e^{-40}) = 1 - 4.248354255291589e-18, which rounds to 1
  CHECK(expit(40.0) == doctest::Approx(1.0 - 4.248354255291589e-18).epsilon(1e-16));
  CHECK(std::isfinite(expit(1000.0)));
  CHECK(expit(-1000.0) >= 0.0);
  for (double w : {-30.0, -3.2, 0.7, 12.0}) CHECK(std::abs(expit(-w) - (1 - expit(w))) <= std::numeric_limits<double>::epsilon());
}

TEST_CASE("bernoulli log-likelihood") {
  CHECK(bernoulli_loglik(1, 0) == doctest::Approx(-0.6931471805599453));
  for (double w : {-3.0, 0.2, 5.0})
    CHECK(bernoulli_loglik(0.5, w) ==
          doctest::Approx((bernoulli_loglik(1, w) + bernoulli_loglik(0, w)) / 2));
  CHECK(bernoulli_loglik(1, 40) == doctest::Approx(-4.248354255291589e-18).epsilon(1e-6));
}

TEST_CASE("y = 1/2 everywhere gives the zero vector") {
  Eigen::MatrixXd x(5, 2);
  x << 1, 0.3, 1, -1, 1, 2, 1, 0.1, 1, 5;
  const LogisticFit f = fit_fractional_logistic(Eigen::VectorXd::Constant(5, 0.5), x);
  CHECK(f.converged);
  CHECK(f.coefficients.cwiseAbs().maxCoeff() < 1e-7);
}

TEST_CASE("saturated two-point fit") {
  Eigen::MatrixXd x(2, 2);
  x << 1, 0, 1, 1;
  Eigen::VectorXd y(2);
  y << 0.2, 0.8;
  const LogisticFit f = fit_fractional_logistic(y, x, {}, {});
  CHECK(f.coefficients[0] == doctest::Approx(-1.3862943611198906).epsilon(1e-6));
  CHECK(f.coefficients[1] == doctest::Approx(2.772588722239781).epsilon(1e-6));
}

TEST_CASE("random 50 x 3 instance matches the grid oracle") {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> z;
  std::uniform_real_distribution<double> u;
  Eigen::MatrixXd x(50, 3);
  Eigen::VectorXd y(50);
  for (int i = 0; i < 50; ++i) {
    x(i, 0) = 1;
    x(i, 1) = z(rng);
    x(i, 2) = z(rng);
    y[i] = u(rng);
  }
  const Eigen::VectorXd ref = oracle::grid_logistic(y, x);
  const LogisticFit f = fit_fractional_logistic(y, x);
  CHECK((f.coefficients - ref).cwiseAbs().maxCoeff() < 1e-4);
}

TEST_CASE("weights act as replication") {
  Eigen::MatrixXd x(3, 2), xr(4, 2);
  x << 1, 0, 1, 1, 1, 2;
  xr << 1, 0, 1, 1, 1, 1, 1, 2;
  Eigen::VectorXd y(3), yr(4), w(3);
  y << 0.1, 0.6, 0.7;
  yr << 0.1, 0.6, 0.6, 0.7;
  w << 1, 2, 1;
  const auto a = fit_fractional_logistic(y, x, w).coefficients;
  const auto b = fit_fractional_logistic(yr, xr).coefficients;
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("gradient matches finite differences") {
  Eigen::MatrixXd x(4, 2);
  x << 1, -1, 1, 0, 1, 1, 1, 3;
  Eigen::VectorXd y(4), w(4), b(2);
  y << 0, 0.3, 0.9, 1;
  w << 1, 2, 0.5, 1;
  b << 0.2, -0.4;
  const Eigen::VectorXd g = logistic_gradient(y, x, w, b);
  for (int k = 0; k < 2; ++k) {
    Eigen::VectorXd e = Eigen::VectorXd::Zero(2);
    e[k] = 1e-6;
    const double fd = (logistic_objective(y, x, w, b + e) - logistic_objective(y, x, w, b - e)) / 2e-6;
    CHECK(g[k] == doctest::Approx(fd).epsilon(1e-6));
  }
}
