#pragma once

#include <Eigen/Dense>

namespace tube {

/// e^w / (1 + e^w) without overflow.
double expit(double w);
double logit(double p);

/// y log g(w) + (1 - y) log(1 - g(w)), probabilities clamped to
/// [1e-12, 1 - 1e-12].
double bernoulli_loglik(double y, double w);

struct LogisticOptions {
  // Tight defaults: an M-step that stops early can lower the EM objective.
  double gradient_tol = 1e-10;
  double relative_objective_tol = 1e-15;
  int max_iterations = 100;
  double ridge = 1e-8;
  int max_halvings = 30;
  /// Coefficient norm beyond which the data are treated as separated.
  double separation_norm = 1e3;
};

struct LogisticFit {
  Eigen::VectorXd coefficients;
  bool converged = false;
  int iterations = 0;
  double final_gradient_norm = 0.0;  // max-abs
  double objective = 0.0;
};

/// Sum_i w_i [y_i * eta_i - log(1 + e^eta_i)], the weighted Bernoulli
/// log-likelihood for fractional y. Empty `weights` means unit weights.
double logistic_objective(const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& beta);
Eigen::VectorXd logistic_gradient(const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& beta);

/// Newton-Raphson maximum likelihood for outcomes in [0, 1], with a fixed
/// Hessian ridge and step halving. `start` (if non-empty) warm-starts the
/// iteration. Throws SingularityError when the Newton system cannot be
/// solved.
LogisticFit fit_fractional_logistic(const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& weights = {},
                                    const LogisticOptions& options = {},
                                    const Eigen::VectorXd& start = {});

}  // namespace tube
