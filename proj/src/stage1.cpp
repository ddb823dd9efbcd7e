#include "tube/stage1.hpp"

#include "tube/error.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>

namespace tube {

namespace {

constexpr double kFloor = 1e-300;
constexpr double kLambdaClamp = 1e-6;
constexpr double kMuClamp = 1e-6;

std::atomic<long> g_ascent_violations[2] = {0, 0};

// g(psi' xi) and g(phi_j' zeta_j); everything downstream needs only these.
struct Predictors {
  Eigen::VectorXd genetic;    // N
  Eigen::MatrixXd surrogate;  // N x p
};

void expit_inplace(Eigen::Ref<Eigen::VectorXd> v) {
  for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = expit(v[i]);
}

Predictors predictors(const StageOneParams& theta, const SieveBases& bases) {
  Predictors pr;
  pr.genetic = bases.psi * theta.xi;
  expit_inplace(pr.genetic);
  pr.surrogate.resize(bases.psi.rows(),
                      static_cast<Eigen::Index>(bases.phi.size()));
  for (std::size_t j = 0; j < bases.phi.size(); ++j) {
    const auto col = static_cast<Eigen::Index>(j);
    pr.surrogate.col(col).noalias() = bases.phi[j] * theta.zeta[j];
    expit_inplace(pr.surrogate.col(col));
  }
  return pr;
}

void check_shapes(const StageOneParams& theta, const Dataset& data,
                  const SieveBases& bases) {
  if (theta.xi.size() != bases.psi.cols() ||
      theta.zeta.size() != bases.phi.size() ||
      theta.lambda.rows() != 2 || theta.lambda.cols() != data.K() + 1 ||
      bases.psi.rows() != data.size()) {
    throw ConfigError("stage I parameters do not match the bases/data");
  }
  for (std::size_t j = 0; j < bases.phi.size(); ++j) {
    if (theta.zeta[j].size() != bases.phi[j].cols())
      throw ConfigError("zeta length does not match its basis");
  }
}

double objective(const StageOneParams& theta, const Dataset& data,
                 const Predictors& pr) {
  double total = 0.0;
  for (auto i : data.labeled_rows()) {
    const int k = data.label_level(i);
    const double g1 = pr.genetic[i];
    const double mix = theta.lambda(1, k) * g1 + theta.lambda(0, k) * (1.0 - g1);
    total += std::log(std::max(mix, kFloor));
  }
  const double inv_mu1 = 1.0 / theta.mu;
  const double inv_mu0 = 1.0 / (1.0 - theta.mu);
  for (Eigen::Index j = 0; j < pr.surrogate.cols(); ++j) {
    for (Eigen::Index i = 0; i < pr.genetic.size(); ++i) {
      const double gx = pr.surrogate(i, j);
      const double gg = pr.genetic[i];
      const double mix =
          gx * gg * inv_mu1 + (1.0 - gx) * (1.0 - gg) * inv_mu0;
      total += std::log(std::max(mix, kFloor));
    }
  }
  return total;
}

StageOneImputations impute(const StageOneParams& theta, const Dataset& data,
                           const Predictors& pr) {
  StageOneImputations out;
  out.labeled.resize(data.n_labeled());
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) {
    const int k = data.label_level(i);
    const double g1 = pr.genetic[i];
    const double num = theta.lambda(1, k) * g1;
    const double den = num + theta.lambda(0, k) * (1.0 - g1);
    out.labeled[r++] = std::clamp(num / std::max(den, kFloor), 0.0, 1.0);
  }
  const double inv_mu1 = 1.0 / theta.mu;
  const double inv_mu0 = 1.0 / (1.0 - theta.mu);
  out.surrogate.resize(pr.surrogate.rows(), pr.surrogate.cols());
  for (Eigen::Index j = 0; j < pr.surrogate.cols(); ++j) {
    for (Eigen::Index i = 0; i < pr.surrogate.rows(); ++i) {
      const double gx = pr.surrogate(i, j);
      const double gg = pr.genetic[i];
      const double num = gx * gg * inv_mu1;
      const double den = num + (1.0 - gx) * (1.0 - gg) * inv_mu0;
      out.surrogate(i, j) = std::clamp(num / std::max(den, kFloor), 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace

long em_ascent_violations(EmStage stage) {
  return g_ascent_violations[static_cast<int>(stage) - 1].load();
}
long em_ascent_violations() {
  return em_ascent_violations(EmStage::one) + em_ascent_violations(EmStage::two);
}
void record_ascent_violation(EmStage stage) {
  ++g_ascent_violations[static_cast<int>(stage) - 1];
}

Eigen::MatrixXd initial_lambda(int k) {
  Eigen::MatrixXd lambda(2, k + 1);
  lambda.setConstant(0.15 / k);
  lambda(1, k) = 0.85;
  lambda(0, 0) = 0.85;
  return lambda;
}

Eigen::MatrixXd update_lambda(const Eigen::VectorXd& labeled_posterior,
                              const Dataset& data) {
  const int k_max = data.K();
  Eigen::MatrixXd lambda = Eigen::MatrixXd::Zero(2, k_max + 1);
  double mass1 = 0.0, mass0 = 0.0;
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) {
    const double u = labeled_posterior[r++];
    const int k = data.label_level(i);
    lambda(1, k) += u;
    lambda(0, k) += 1.0 - u;
    mass1 += u;
    mass0 += 1.0 - u;
  }
  if (mass1 <= 0.0 || mass0 <= 0.0) {
    throw DegeneratePosteriorError(
        "label-error update: posterior mass vanished for one class");
  }
  lambda.row(1) /= mass1;
  lambda.row(0) /= mass0;
  for (int y = 0; y < 2; ++y) {
    lambda.row(y) = lambda.row(y).cwiseMax(kLambdaClamp).cwiseMin(1.0 - kLambdaClamp);
    lambda.row(y) /= lambda.row(y).sum();
  }
  return lambda;
}

void pool_outcomes(const Dataset& data, const Eigen::VectorXd& labeled,
                   const Eigen::MatrixXd& per_row, Eigen::VectorXd& y,
                   Eigen::VectorXd& w) {
  const Eigen::Index n = data.size();
  const auto p = static_cast<double>(per_row.cols());
  y = per_row.rowwise().sum();
  w = Eigen::VectorXd::Constant(n, p);
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) {
    y[i] += labeled[r++];
    w[i] += 1.0;
  }
  y = (y.array() / w.array()).cwiseMin(1.0).cwiseMax(0.0);
}

double composite_loglik(const StageOneParams& theta, const Dataset& data,
                        const SieveBases& bases) {
  check_shapes(theta, data, bases);
  return objective(theta, data, predictors(theta, bases));
}

StageOneParams init_theta(const Dataset& data, const SieveBases& bases,
                          const LogisticOptions& glm) {
  const auto& rows = data.labeled_rows();
  const auto n = static_cast<Eigen::Index>(rows.size());
  Eigen::VectorXd dagger(n);
  for (Eigen::Index r = 0; r < n; ++r)
    dagger[r] = data.label_level(rows[r]) == data.K() ? 1.0 : 0.0;
  const double ones = dagger.sum();
  if (ones == 0.0 || ones == static_cast<double>(n)) {
    throw DegenerateInputError(
        "initialization needs labeled rows with both Y* = 1 and Y* != 1");
  }
  auto labeled_rows_of = [&](const Eigen::MatrixXd& m) {
    Eigen::MatrixXd out(n, m.cols());
    for (Eigen::Index r = 0; r < n; ++r) out.row(r) = m.row(rows[r]);
    return out;
  };
  StageOneParams theta;
  theta.mu = ones / static_cast<double>(n);
  theta.xi = fit_fractional_logistic(dagger, labeled_rows_of(bases.psi), {}, glm)
                 .coefficients;
  for (const auto& phi : bases.phi) {
    theta.zeta.push_back(
        fit_fractional_logistic(dagger, labeled_rows_of(phi), {}, glm)
            .coefficients);
  }
  theta.lambda = initial_lambda(data.K());
  return theta;
}

StageOneImputations e_step_stage1(const StageOneParams& theta,
                                  const Dataset& data,
                                  const SieveBases& bases) {
  check_shapes(theta, data, bases);
  return impute(theta, data, predictors(theta, bases));
}

StageOneParams m_step_stage1(const StageOneImputations& imputations,
                             const Dataset& data, const SieveBases& bases,
                             const StageOneParams& previous,
                             const EmConfig& config) {
  const Eigen::Index n_all = data.size();
  const auto p = static_cast<Eigen::Index>(bases.phi.size());
  StageOneParams next = previous;
  if (!config.frozen.mu) {
    const double total = imputations.labeled.sum() + imputations.surrogate.sum();
    const double count = static_cast<double>(n_all * p + data.n_labeled());
    next.mu = std::clamp(total / count, kMuClamp, 1.0 - kMuClamp);
  }
  if (!config.frozen.lambda) next.lambda = update_lambda(imputations.labeled, data);
  if (!config.frozen.xi) {
    Eigen::VectorXd y, w;
    pool_outcomes(data, imputations.labeled, imputations.surrogate, y, w);
    next.xi = fit_fractional_logistic(y, bases.psi, w, config.glm, previous.xi)
                  .coefficients;
  }
  if (!config.frozen.zeta) {
    for (Eigen::Index j = 0; j < p; ++j) {
      next.zeta[j] = fit_fractional_logistic(imputations.surrogate.col(j),
                                             bases.phi[j], {}, config.glm,
                                             previous.zeta[j])
                         .coefficients;
    }
  }
  return next;
}

StageOneFit run_em_stage1(const Dataset& data, const SieveBases& bases,
                          const EmConfig& config) {
  return run_em_stage1(data, bases, config,
                       init_theta(data, bases, config.glm));
}

StageOneFit run_em_stage1(const Dataset& data, const SieveBases& bases,
                          const EmConfig& config, const StageOneParams& start) {
  check_shapes(start, data, bases);
  struct State {
    StageOneParams params;
    Predictors pr;
    double objective = 0.0;
  };
  auto evaluate = [&](StageOneParams params) {
    State s{std::move(params), {}, 0.0};
    s.pr = predictors(s.params, bases);
    s.objective = objective(s.params, data, s.pr);
    return s;
  };
  auto update = [&](const State& s) {
    return evaluate(
        m_step_stage1(impute(s.params, data, s.pr), data, bases, s.params, config));
  };
  const Eigen::Index k1 = data.K() + 1;
  auto pack = [&](const State& s) {
    Eigen::Index size = s.params.xi.size() + 2 * k1 + 1;
    for (const auto& z : s.params.zeta) size += z.size();
    Eigen::VectorXd x(size);
    Eigen::Index at = 0;
    x.segment(at, s.params.xi.size()) = s.params.xi;
    at += s.params.xi.size();
    for (const auto& z : s.params.zeta) {
      x.segment(at, z.size()) = z;
      at += z.size();
    }
    for (int y = 0; y < 2; ++y) {
      x.segment(at, k1) = s.params.lambda.row(y).transpose().array().log();
      at += k1;
    }
    x[at] = logit(s.params.mu);
    return x;
  };
  auto unpack = [&](const Eigen::VectorXd& x, const State& like) {
    StageOneParams p = like.params;
    Eigen::Index at = 0;
    p.xi = x.segment(at, p.xi.size());
    at += p.xi.size();
    for (auto& z : p.zeta) {
      z = x.segment(at, z.size());
      at += z.size();
    }
    for (int y = 0; y < 2; ++y) {
      p.lambda.row(y) = detail::simplex_from_logs(x.segment(at, k1), kLambdaClamp,
                                                  1.0 - kLambdaClamp)
                            .transpose();
      at += k1;
    }
    p.mu = std::clamp(expit(x[at]), kMuClamp, 1.0 - kMuClamp);
    return evaluate(std::move(p));
  };
  State state = evaluate(start);
  StageOneFit fit;
  fit.trace = detail::run_em_loop(state, update, pack, unpack, config, EmStage::one);
  fit.params = std::move(state.params);
  return fit;
}

}  // namespace tube
