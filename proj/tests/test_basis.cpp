#include "tube/basis.hpp"
#include "tube/error.hpp"

#include <doctest.h>

#include <cmath>
#include <random>

using namespace tube;

namespace {
Eigen::VectorXd normal_sample(int n, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  Eigen::VectorXd v(n);
  for (int i = 0; i < n; ++i) v[i] = z(rng);
  return v;
}
}  // namespace

TEST_CASE("sieve dimension") {
  CHECK(choose_dimension(10000) == 22);
  CHECK(choose_dimension(16) == 3);
  CHECK(choose_dimension(1000000) == 100);
}

TEST_CASE("natural spline contains linear functions") {
  const Eigen::VectorXd x = normal_sample(1000, 3);
  const BasisSpec spec = resolve_natural_spline(x, 4);
  const DesignMatrix b = natural_spline_basis(x, spec);
  REQUIRE(b.cols() == 4);
  const Eigen::VectorXd coef = b.colPivHouseholderQr().solve(x);
  CHECK((b * coef - x).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("natural spline is smooth at knots and linear past the boundary") {
  const Eigen::VectorXd x = normal_sample(500, 5);
  const BasisSpec spec = resolve_natural_spline(x, 5);
  auto at = [&](double v) {
    Eigen::VectorXd p(1);
    p << v;
    return Eigen::RowVectorXd(natural_spline_basis(p, spec).row(0));
  };
  const double h = 1e-4;
  for (std::size_t k = 1; k + 1 < spec.knots.size(); ++k) {
    const double t = spec.knots[k];
    const Eigen::RowVectorXd l = at(t - h), c = at(t), r = at(t + h);
    CHECK((r - l).cwiseAbs().maxCoeff() < 1e-2);
    // second difference stays bounded: continuous second derivative
    const Eigen::RowVectorXd d2 = (r - 2 * c + l) / (h * h);
    const Eigen::RowVectorXd d2w = (at(t + 2 * h) - 2 * c + at(t - 2 * h)) / (4 * h * h);
    CHECK((d2 - d2w).cwiseAbs().maxCoeff() < 1e-2 * (1 + d2.cwiseAbs().maxCoeff()));
  }
  const double hi = spec.knots.back() + 1.0;
  const Eigen::RowVectorXd sd = at(hi + 0.5) - 2 * at(hi) + at(hi - 0.5);
  CHECK(sd.cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("dummy basis") {
  Eigen::VectorXd x(3);
  x << 0, 1, 2;
  const BasisSpec spec = resolve_dummy(x);
  Eigen::VectorXd v(1);
  v << 2;
  const DesignMatrix row = dummy_basis(v, spec);
  CHECK(row.cols() == 3);
  CHECK(row(0, 0) == 1);
  CHECK(row(0, 1) == 0);
  CHECK(row(0, 2) == 1);
  Eigen::VectorXd b(2);
  b << 0, 1;
  Eigen::VectorXd z(1);
  z << 0;
  const DesignMatrix r2 = dummy_basis(z, resolve_dummy(b));
  CHECK(r2.cols() == 2);
  CHECK(r2(0, 1) == 0);
  Eigen::VectorXd unseen(1);
  unseen << 3;
  CHECK_THROWS_AS(dummy_basis(unseen, spec), Error);
}

TEST_CASE("snp category basis") {
  Eigen::MatrixXd g(9, 2);
  int r = 0;
  for (int a = 0; a < 3; ++a)
    for (int b = 0; b < 3; ++b) g.row(r++) << a, b;
  CHECK(snp_category_basis(g, resolve_snp_category(g)).cols() == 9);

  Eigen::MatrixXd one(6, 1);
  one << 0, 0, 0, 1, 1, 2;
  const DesignMatrix s = snp_category_basis(one, resolve_snp_category(one));
  const DesignMatrix d = dummy_basis(one.col(0), resolve_dummy(one.col(0)));
  CHECK(s == d);

  Eigen::MatrixXd train(3, 2);
  train << 0, 0, 1, 1, 2, 2;
  Eigen::MatrixXd test(1, 2);
  test << 0, 2;
  CHECK_THROWS_AS(snp_category_basis(test, resolve_snp_category(train)), Error);
}

TEST_CASE("resolved specs evaluate new data without refitting") {
  const Eigen::VectorXd x = normal_sample(200, 9);
  const BasisSpec spec = resolve_natural_spline(x, 4);
  Eigen::MatrixXd xm(200, 1);
  xm.col(0) = x;
  CHECK(evaluate_basis(xm.topRows(10), spec) == natural_spline_basis(x.head(10), spec));
}
