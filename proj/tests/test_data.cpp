#include "tube/data.hpp"
#include "tube/error.hpp"

#include <doctest.h>

#include <cstdio>
#include <filesystem>
#include <sstream>

using namespace tube;

TEST_CASE("csv: unlabeled cell leaves the record unreviewed") {
  const Dataset d = parse_csv("y_star,x1,g1\n1,0.5,1\n,0.1,0\n0,0.2,2\n");
  CHECK(d.size() == 3);
  CHECK(d.n_labeled() == 2);
  CHECK_FALSE(d.labeled(1));
  CHECK(d.labeled_rows() == std::vector<Eigen::Index>{0, 2});
}

TEST_CASE("csv: grades 0, 1/2, 1 give K = 2") {
  const Dataset d = parse_csv("y_star,x1,g1\n0,0,0\n0.5,1,1\n1,2,0\n");
  CHECK(d.K() == 2);
  CHECK(d.label_level(1) == 1);
  CHECK(d.label_level(2) == 2);
}

TEST_CASE("csv: input errors") {
  CHECK_THROWS_AS(parse_csv("y_star,x1,g1\n1.3,0,0\n"), ValidationError);
  CHECK_THROWS_AS(parse_csv("y_star,x1,g1\n1,abc,0\n"), ParseError);
  CHECK_THROWS_AS(parse_csv("y_star,x1,g1\n1,0\n"), SchemaError);
  CHECK_THROWS_AS(parse_csv("y_star,x1,g1\n1,,0\n"), Error);
}

TEST_CASE("csv: labeled rows may come in any order") {
  const Dataset d = parse_csv("y_star,x1,g1\n,0,0\n,1,1\n1,2,0\n0,3,1\n");
  CHECK(d.labeled_rows() == std::vector<Eigen::Index>{2, 3});
}

TEST_CASE("csv: write then load reproduces every field") {
  Eigen::MatrixXd x(4, 2), g(4, 1);
  x << 0.1234567890123456, -2.5, 1e-9, 3.0, 7.75, 1.0 / 3.0, -0.0, 12345.678901234;
  g << 0, 1, 2, 1;
  const std::vector<std::optional<double>> ys{0.5, std::nullopt, 1.0, 0.0};
  const Dataset d(x, g, ys);
  const auto path = std::filesystem::temp_directory_path() / "tube_roundtrip.csv";
  write_csv(path.string(), d);
  const Dataset e = load_csv(path.string());
  std::filesystem::remove(path);
  REQUIRE(e.size() == d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i) {
    CHECK(e.labeled(i) == d.labeled(i));
    if (d.labeled(i)) CHECK(*e.y_star(i) == *d.y_star(i));
    for (Eigen::Index j = 0; j < d.p(); ++j)
      CHECK(e.x()(i, j) == doctest::Approx(d.x()(i, j)).epsilon(1e-15));
    CHECK(e.g()(i, 0) == d.g()(i, 0));
  }
}

TEST_CASE("label granularity") {
  const std::vector<double> a{0.0, 0.25, 1.0};
  CHECK(infer_label_granularity(a) == 4);
  const std::vector<double> b{0.0, 1.0};
  CHECK(infer_label_granularity(b) == 1);
}

TEST_CASE("subset keeps duplicates and labels") {
  const Dataset d = parse_csv("y_star,x1,g1\n1,0,0\n,1,1\n0,2,0\n");
  const std::vector<Eigen::Index> rows{2, 2, 1};
  const Dataset s = d.subset(rows);
  CHECK(s.size() == 3);
  CHECK(s.n_labeled() == 2);
  CHECK(s.x()(1, 0) == 2.0);
}
