// Brute-force reference computations shared by the unit and acceptance
// tests. Deliberately naive: no library numerics beyond std::exp/log.
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <random>
#include <vector>

namespace oracle {

inline double loglik(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                     const Eigen::VectorXd& b) {
  double s = 0;
  for (Eigen::Index i = 0; i < x.rows(); ++i) {
    double eta = 0;
    for (Eigen::Index k = 0; k < x.cols(); ++k) eta += x(i, k) * b[k];
    const double log1pe = eta > 0 ? eta + std::log1p(std::exp(-eta)) : std::log1p(std::exp(eta));
    s += y[i] * eta - log1pe;
  }
  return s;
}

/// Coordinate grid refinement: scan 41 points per coordinate around the
/// current value, shrink the step once a full sweep changes nothing.
inline Eigen::VectorXd grid_logistic(const Eigen::VectorXd& y, const Eigen::MatrixXd& x,
                                     double step = 1.0, double final_step = 1e-7) {
  Eigen::VectorXd b = Eigen::VectorXd::Zero(x.cols());
  double best = loglik(y, x, b);
  while (step > final_step) {
    bool moved = true;
    for (int sweep = 0; moved && sweep < 10000; ++sweep) {
      moved = false;
      for (Eigen::Index k = 0; k < b.size(); ++k) {
        const double centre = b[k];
        double arg = centre;
        for (int t = -20; t <= 20; ++t) {
          b[k] = centre + t * step;
          const double v = loglik(y, x, b);
          if (v > best + 1e-15 * std::abs(best)) {
            best = v;
            arg = b[k];
          }
        }
        b[k] = arg;
        if (arg != centre) moved = true;
      }
    }
    step /= 4;
  }
  return b;
}

/// Weighted concordance by enumerating all ordered pairs.
inline double pairwise_auc(const std::vector<double>& s, const std::vector<double>& w1,
                           const std::vector<double>& w0) {
  double num = 0, den1 = 0, den0 = 0;
  for (double v : w1) den1 += v;
  for (double v : w0) den0 += v;
  for (std::size_t a = 0; a < s.size(); ++a)
    for (std::size_t b = 0; b < s.size(); ++b) {
      const double c = s[a] > s[b] ? 1.0 : (s[a] == s[b] ? 0.5 : 0.0);
      num += w1[a] * w0[b] * c;
    }
  return num / (den1 * den0);
}

/// argmin over a uniform grid of (w, 1-w) S (w, 1-w)' on [0, 1].
inline double grid_omega(double s00, double s11, double s01, double h = 1e-6) {
  double best = 1e300, arg = 0;
  const long steps = static_cast<long>(std::llround(1.0 / h));
  for (long t = 0; t <= steps; ++t) {
    const double w = static_cast<double>(t) / static_cast<double>(steps);
    const double v = w * w * s00 + (1 - w) * (1 - w) * s11 + 2 * w * (1 - w) * s01;
    if (v < best) {
      best = v;
      arg = w;
    }
  }
  return arg;
}

/// Empirical survival Pr(score > c) among records with `member` true.
inline double empirical_survival(const Eigen::VectorXd& scores,
                                 const std::vector<bool>& member, double c) {
  double in = 0, above = 0;
  for (Eigen::Index i = 0; i < scores.size(); ++i)
    if (member[static_cast<std::size_t>(i)]) {
      in += 1;
      if (scores[i] > c) above += 1;
    }
  return above / in;
}

}  // namespace oracle
