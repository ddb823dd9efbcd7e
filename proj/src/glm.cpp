#include "tube/glm.hpp"

#include "tube/error.hpp"

#include <algorithm>
#include <cmath>

namespace tube {

double expit(double w) {
  if (w >= 0.0) return 1.0 / (1.0 + std::exp(-w));
  const double e = std::exp(w);
  return e / (1.0 + e);
}

double logit(double p) { return std::log(p) - std::log1p(-p); }

double bernoulli_loglik(double y, double w) {
  constexpr double kClamp = 1e-12;
  // log g(w) and log(1 - g(w)) via log1p so that tiny tails survive.
  double log_p = w >= 0.0 ? -std::log1p(std::exp(-w)) : w - std::log1p(std::exp(w));
  double log_q = w >= 0.0 ? -w - std::log1p(std::exp(-w)) : -std::log1p(std::exp(w));
  log_p = std::clamp(log_p, std::log(kClamp), std::log1p(-kClamp));
  log_q = std::clamp(log_q, std::log(kClamp), std::log1p(-kClamp));
  double out = 0.0;
  if (y > 0.0) out += y * log_p;
  if (y < 1.0) out += (1.0 - y) * log_q;
  return out;
}

namespace {

double softplus(double w) {
  return w > 0.0 ? w + std::log1p(std::exp(-w)) : std::log1p(std::exp(w));
}

double objective_from_eta(const Eigen::VectorXd& y, const Eigen::VectorXd& eta,
                          const Eigen::VectorXd& weights) {
  double total = 0.0;
  const bool unit = weights.size() == 0;
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double term = y[i] * eta[i] - softplus(eta[i]);
    total += unit ? term : weights[i] * term;
  }
  return total;
}

void check_inputs(const Eigen::VectorXd& y, const Eigen::MatrixXd& design,
                  const Eigen::VectorXd& weights) {
  if (y.size() != design.rows())
    throw ValidationError("logistic fit: outcome and design lengths differ");
  if (weights.size() != 0 && weights.size() != y.size())
    throw ValidationError("logistic fit: weight length mismatch");
  for (Eigen::Index i = 0; i < y.size(); ++i) {
    if (!(y[i] >= 0.0 && y[i] <= 1.0))
      throw ValidationError("logistic fit: outcome outside [0, 1]");
  }
  if (weights.size() != 0 && (weights.array() < 0.0).any())
    throw ValidationError("logistic fit: negative weight");
}

}  // namespace

double logistic_objective(const Eigen::VectorXd& y,
                          const Eigen::MatrixXd& design,
                          const Eigen::VectorXd& weights,
                          const Eigen::VectorXd& beta) {
  return objective_from_eta(y, design * beta, weights);
}

Eigen::VectorXd logistic_gradient(const Eigen::VectorXd& y,
                                  const Eigen::MatrixXd& design,
                                  const Eigen::VectorXd& weights,
                                  const Eigen::VectorXd& beta) {
  Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd resid(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    resid[i] = y[i] - expit(eta[i]);
    if (weights.size() != 0) resid[i] *= weights[i];
  }
  return design.transpose() * resid;
}

LogisticFit fit_fractional_logistic(const Eigen::VectorXd& y,
                                    const Eigen::MatrixXd& design,
                                    const Eigen::VectorXd& weights,
                                    const LogisticOptions& options,
                                    const Eigen::VectorXd& start) {
  check_inputs(y, design, weights);
  const Eigen::Index n = design.rows();
  const Eigen::Index d = design.cols();
  const bool unit = weights.size() == 0;

  // One exp and one log1p per row give both the objective and g(eta).
  auto evaluate = [&](const Eigen::VectorXd& eta, Eigen::VectorXd& prob) {
    double total = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = eta[i];
      const double e = std::exp(-std::abs(w));
      const double sp = (w > 0.0 ? w : 0.0) + std::log1p(e);
      prob[i] = w >= 0.0 ? 1.0 / (1.0 + e) : e / (1.0 + e);
      const double term = y[i] * w - sp;
      total += unit ? term : weights[i] * term;
    }
    return total;
  };

  LogisticFit fit;
  fit.coefficients =
      start.size() == d ? start : Eigen::VectorXd(Eigen::VectorXd::Zero(d));
  Eigen::VectorXd eta = design * fit.coefficients;
  Eigen::VectorXd prob(n), candidate_prob(n);
  double objective = evaluate(eta, prob);

  Eigen::VectorXd resid(n), root_curv(n), grad(d);
  Eigen::MatrixXd hessian(d, d), scaled(n, d);
  Eigen::VectorXd candidate, candidate_eta;
  for (int iter = 0; iter < options.max_iterations; ++iter) {
    fit.iterations = iter + 1;
    for (Eigen::Index i = 0; i < n; ++i) {
      const double w = unit ? 1.0 : weights[i];
      resid[i] = w * (y[i] - prob[i]);
      root_curv[i] = std::sqrt(w * prob[i] * (1.0 - prob[i]));
    }
    grad.noalias() = design.transpose() * resid;
    fit.final_gradient_norm = grad.cwiseAbs().maxCoeff();
    if (fit.final_gradient_norm < options.gradient_tol) {
      fit.converged = true;
      break;
    }
    scaled = design.array().colwise() * root_curv.array();
    hessian.setZero();
    hessian.selfadjointView<Eigen::Lower>().rankUpdate(scaled.transpose());
    hessian.diagonal().array() += options.ridge;
    Eigen::LDLT<Eigen::MatrixXd> ldlt(hessian.selfadjointView<Eigen::Lower>());
    if (ldlt.info() != Eigen::Success || !ldlt.isPositive() ||
        ldlt.rcond() < 1e-15) {
      throw SingularityError("logistic fit: Newton system is singular");
    }
    Eigen::VectorXd step = ldlt.solve(grad);
    if (!step.allFinite())
      throw SingularityError("logistic fit: non-finite Newton step");
    // Predicted ascent of the quadratic model (half the Newton decrement).
    const double predicted = 0.5 * grad.dot(step);
    if (predicted <=
        options.relative_objective_tol * std::max(1.0, std::abs(objective))) {
      fit.converged = true;
      break;
    }
    double scale = 1.0;
    bool improved = false;
    double candidate_obj = objective;
    for (int h = 0; h <= options.max_halvings; ++h) {
      candidate = fit.coefficients + scale * step;
      candidate_eta.noalias() = design * candidate;
      candidate_obj = evaluate(candidate_eta, candidate_prob);
      if (std::isfinite(candidate_obj) && candidate_obj >= objective) {
        improved = true;
        break;
      }
      scale *= 0.5;
    }
    if (!improved) {
      fit.converged = false;
      break;
    }
    const double change = candidate_obj - objective;
    fit.coefficients.swap(candidate);
    eta.swap(candidate_eta);
    prob.swap(candidate_prob);
    objective = candidate_obj;
    if (fit.coefficients.norm() > options.separation_norm) {
      fit.converged = false;
      break;
    }
    if (change <= options.relative_objective_tol * std::abs(objective)) {
      fit.converged = true;
      fit.final_gradient_norm =
          logistic_gradient(y, design, weights, fit.coefficients)
              .cwiseAbs()
              .maxCoeff();
      break;
    }
  }
  fit.objective = objective;
  return fit;
}

}  // namespace tube
