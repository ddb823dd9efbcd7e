#pragma once

#include "tube/basis.hpp"
#include "tube/data.hpp"
#include "tube/simlab.hpp"

#include <random>

namespace fixture {

/// A small simulated cohort (setting a) for end-to-end checks.
inline tube::SimulatedData small_cohort(long n_all = 2000, long n = 200, std::uint64_t seed = 7,
                                        char setting = 'a') {
  tube::SimSetting s;
  s.name = setting;
  s.N = n_all;
  s.n = n;
  s.seed = seed;
  return tube::generate_dataset(s);
}

/// Random dataset with K = 2 grades, p surrogates and q risk factors.
inline tube::Dataset random_dataset(long n_all, long n, int p, int q, unsigned seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::uniform_int_distribution<int> grade(0, 2);
  Eigen::MatrixXd x(n_all, p), g(n_all, q);
  std::vector<std::optional<double>> ys(static_cast<std::size_t>(n_all));
  for (long i = 0; i < n_all; ++i) {
    for (int j = 0; j < p; ++j) x(i, j) = z(rng);
    for (int j = 0; j < q; ++j) g(i, j) = z(rng);
    if (i < n) ys[static_cast<std::size_t>(i)] = grade(rng) / 2.0;
  }
  return tube::Dataset(x, g, ys, 2);
}

inline tube::SieveBases linear_bases(const tube::Dataset& d) {
  tube::BasisConfig c;
  c.force_linear = true;
  return tube::prepare_bases(d.x(), d.g(), c);
}

}  // namespace fixture
