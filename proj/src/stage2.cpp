#include "tube/stage2.hpp"

#include "tube/error.hpp"
#include "tube/glm.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tube {

namespace {

constexpr double kFloor = 1e-300;
constexpr double kJumpFloor = 1e-8;
constexpr double kLambdaClamp = 1e-6;

// Distinct sorted scores and each record's position among them.
struct Grid {
  std::vector<double> points;
  std::vector<Eigen::Index> index;
};

Grid make_grid(const Eigen::VectorXd& scores) {
  if (!scores.allFinite()) throw ValidationError("phenotype scores must be finite");
  Grid grid;
  grid.points.assign(scores.data(), scores.data() + scores.size());
  std::sort(grid.points.begin(), grid.points.end());
  grid.points.erase(std::unique(grid.points.begin(), grid.points.end()),
                    grid.points.end());
  grid.index.resize(static_cast<std::size_t>(scores.size()));
  for (Eigen::Index i = 0; i < scores.size(); ++i) {
    auto it = std::lower_bound(grid.points.begin(), grid.points.end(), scores[i]);
    grid.index[static_cast<std::size_t>(i)] = it - grid.points.begin();
  }
  return grid;
}

Eigen::VectorXd jump_sizes(const Grid& grid, const Eigen::VectorXd& masses,
                           double floor) {
  Eigen::VectorXd sizes = Eigen::VectorXd::Zero(
      static_cast<Eigen::Index>(grid.points.size()));
  for (std::size_t i = 0; i < grid.index.size(); ++i)
    sizes[grid.index[i]] += masses[static_cast<Eigen::Index>(i)];
  const double total = sizes.sum();
  if (!(total > 0.0)) {
    throw DegeneratePosteriorError(
        "step survival: class mass is zero for every record");
  }
  sizes /= total;
  sizes = sizes.cwiseMax(floor);
  return sizes / sizes.sum();
}

Eigen::VectorXd class_masses(const Eigen::VectorXd& w, int y) {
  return y == 1 ? w : Eigen::VectorXd((1.0 - w.array()).matrix());
}

StepSurvival to_step(const Grid& grid, const Eigen::VectorXd& sizes) {
  StepSurvival s;
  s.jump_points = grid.points;
  s.jump_sizes.assign(sizes.data(), sizes.data() + sizes.size());
  return s;
}

Eigen::VectorXd sizes_on_grid(const StepSurvival& s, const Grid& grid) {
  if (s.jump_points != grid.points) {
    throw InternalConsistencyError(
        "step survival jump points differ from the score grid");
  }
  return Eigen::Map<const Eigen::VectorXd>(s.jump_sizes.data(),
                                           static_cast<Eigen::Index>(s.jump_sizes.size()));
}

// Working parameters: step sizes stored on the grid.
struct Eta {
  Eigen::VectorXd s0, s1;
  Eigen::MatrixXd lambda;
  Eigen::VectorXd xi;
};

Eigen::VectorXd genetic_prob(const Eigen::VectorXd& xi, const SieveBases& bases) {
  Eigen::VectorXd g1 = bases.psi * xi;
  for (Eigen::Index i = 0; i < g1.size(); ++i) g1[i] = expit(g1[i]);
  return g1;
}

double loglik(const Eta& eta, const Dataset& data, const Grid& grid,
              const Eigen::VectorXd& g1) {
  double total = 0.0;
  for (auto i : data.labeled_rows()) {
    const int k = data.label_level(i);
    const double mix = eta.lambda(1, k) * g1[i] + eta.lambda(0, k) * (1.0 - g1[i]);
    total += std::log(std::max(mix, kFloor));
  }
  for (Eigen::Index i = 0; i < g1.size(); ++i) {
    const auto k = grid.index[static_cast<std::size_t>(i)];
    const double mix = eta.s1[k] * g1[i] + eta.s0[k] * (1.0 - g1[i]);
    total += std::log(std::max(mix, kFloor));
  }
  return total;
}

StageTwoImputations impute(const Eta& eta, const Dataset& data, const Grid& grid,
                           const Eigen::VectorXd& g1) {
  StageTwoImputations out;
  out.labeled.resize(data.n_labeled());
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) {
    const int k = data.label_level(i);
    const double num = eta.lambda(1, k) * g1[i];
    const double den = num + eta.lambda(0, k) * (1.0 - g1[i]);
    out.labeled[r++] = std::clamp(num / std::max(den, kFloor), 0.0, 1.0);
  }
  out.all.resize(g1.size());
  for (Eigen::Index i = 0; i < g1.size(); ++i) {
    const auto k = grid.index[static_cast<std::size_t>(i)];
    const double num = eta.s1[k] * g1[i];
    const double den = num + eta.s0[k] * (1.0 - g1[i]);
    out.all[i] = std::clamp(num / std::max(den, kFloor), 0.0, 1.0);
  }
  return out;
}

Eta from_params(const StageTwoParams& p, const Grid& grid) {
  return {sizes_on_grid(p.s0, grid), sizes_on_grid(p.s1, grid), p.lambda, p.xi};
}

StageTwoParams to_params(const Eta& eta, const Grid& grid) {
  return {to_step(grid, eta.s0), to_step(grid, eta.s1), eta.lambda, eta.xi};
}

void check_shapes(const Eta& eta, const Dataset& data, const SieveBases& bases,
                  const Eigen::VectorXd& scores) {
  if (scores.size() != data.size() || bases.psi.rows() != data.size() ||
      eta.xi.size() != bases.psi.cols() || eta.lambda.rows() != 2 ||
      eta.lambda.cols() != data.K() + 1) {
    throw ConfigError("stage II parameters do not match the bases/data");
  }
}

}  // namespace

double StepSurvival::operator()(double c) const {
  auto it = std::upper_bound(jump_points.begin(), jump_points.end(), c);
  double total = 0.0;
  for (auto k = static_cast<std::size_t>(it - jump_points.begin());
       k < jump_sizes.size(); ++k)
    total += jump_sizes[k];
  return std::min(total, 1.0);
}

std::size_t StepSurvival::index_of(double score) const {
  auto it = std::lower_bound(jump_points.begin(), jump_points.end(), score);
  if (it == jump_points.end() || *it != score) {
    throw InternalConsistencyError("score is not a jump point of the step function");
  }
  return static_cast<std::size_t>(it - jump_points.begin());
}

double compute_alpha_score(const Eigen::VectorXd& x,
                           const std::vector<Eigen::VectorXd>& zeta,
                           const SieveBases& bases) {
  if (x.size() != static_cast<Eigen::Index>(bases.x_specs.size()) ||
      zeta.size() != bases.x_specs.size()) {
    throw ValidationError("surrogate vector length does not match the fit");
  }
  double total = 0.0;
  for (std::size_t j = 0; j < zeta.size(); ++j) {
    Eigen::MatrixXd column(1, 1);
    column(0, 0) = x[static_cast<Eigen::Index>(j)];
    total += evaluate_basis(column, bases.x_specs[j]).row(0).dot(zeta[j]);
  }
  return total;
}

Eigen::VectorXd additive_scores(const std::vector<Eigen::VectorXd>& zeta,
                                const SieveBases& bases) {
  if (zeta.size() != bases.phi.size())
    throw ValidationError("zeta count does not match the surrogate bases");
  Eigen::VectorXd out = Eigen::VectorXd::Zero(bases.psi.rows());
  for (std::size_t j = 0; j < zeta.size(); ++j) out.noalias() += bases.phi[j] * zeta[j];
  return out;
}

Eigen::VectorXd pca_alpha_score(const Eigen::MatrixXd& predictors) {
  if (predictors.cols() < 2) throw ValidationError("PCA score needs p >= 2");
  const Eigen::Index n = predictors.rows();
  if (n < 2) throw DegenerateInputError("PCA score needs at least two records");
  Eigen::MatrixXd centered = predictors.rowwise() - predictors.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered / static_cast<double>(n - 1);
  for (Eigen::Index j = 0; j < cov.rows(); ++j) {
    if (!(cov(j, j) > 1e-14 * std::max(1.0, cov.diagonal().maxCoeff())))
      throw DegenerateInputError("PCA score: a surrogate predictor has zero variance");
  }
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  const Eigen::Index d = cov.rows();
  const Eigen::VectorXd& values = eig.eigenvalues();  // ascending
  const double top = values[d - 1];
  Eigen::Index first = d - 1;
  while (first > 0 && top - values[first - 1] <= 1e-10 * std::abs(top)) --first;
  Eigen::VectorXd axis;
  if (first == d - 1) {
    axis = eig.eigenvectors().col(d - 1);
  } else {
    // Leading eigenspace is not one-dimensional: take the projection of the
    // first coordinate axis that has a nonzero component in it.
    const Eigen::MatrixXd basis = eig.eigenvectors().rightCols(d - first);
    for (Eigen::Index k = 0; k < d; ++k) {
      axis = basis * basis.row(k).transpose();
      if (axis.norm() > 1e-8) break;
    }
    axis.normalize();
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    if (std::abs(axis[k]) > 1e-12) {
      if (axis[k] < 0.0) axis = -axis;
      break;
    }
  }
  Eigen::VectorXd score = centered * axis;
  const Eigen::VectorXd additive = centered.rowwise().sum();
  if (score.dot(additive) < 0.0) score = -score;
  return score;
}

Eigen::VectorXd pca_alpha_score(const Dataset& data,
                                const std::vector<Eigen::VectorXd>& zeta,
                                const SieveBases& bases) {
  if (zeta.size() != bases.phi.size() || bases.psi.rows() != data.size())
    throw ValidationError("zeta count does not match the surrogate bases");
  Eigen::MatrixXd predictors(data.size(), static_cast<Eigen::Index>(zeta.size()));
  for (std::size_t j = 0; j < zeta.size(); ++j)
    predictors.col(static_cast<Eigen::Index>(j)) = bases.phi[j] * zeta[j];
  return pca_alpha_score(predictors);
}

Eigen::VectorXd bin_scores(const Eigen::VectorXd& scores, int bins) {
  if (bins < 1) throw ConfigError("score bins must be positive");
  if (!scores.allFinite()) throw ValidationError("phenotype scores must be finite");
  const Eigen::Index n = scores.size();
  if (bins >= n) return scores;
  std::vector<double> sorted(scores.data(), scores.data() + n);
  std::sort(sorted.begin(), sorted.end());
  Eigen::VectorXd out(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto rank = std::lower_bound(sorted.begin(), sorted.end(), scores[i]) -
                      sorted.begin();
    const long bin = static_cast<long>(rank) * bins / static_cast<long>(n);
    const long last = ((bin + 1) * static_cast<long>(n) + bins - 1) / bins - 1;
    out[i] = sorted[static_cast<std::size_t>(std::min<long>(last, n - 1))];
  }
  return out;
}

StepSurvival step_survival_from_masses(const Eigen::VectorXd& scores,
                                       const Eigen::VectorXd& masses,
                                       double floor) {
  if (scores.size() != masses.size())
    throw ValidationError("step survival: scores and masses differ in length");
  if ((masses.array() < 0.0).any())
    throw ValidationError("step survival: negative mass");
  const Grid grid = make_grid(scores);
  return to_step(grid, jump_sizes(grid, masses, floor));
}

StepSurvival step_survival_mle(const Eigen::VectorXd& scores,
                               const Eigen::VectorXd& class_weights, int y,
                               double floor) {
  if (y != 0 && y != 1) throw ValidationError("class must be 0 or 1");
  if (((class_weights.array() < 0.0) || (class_weights.array() > 1.0)).any())
    throw ValidationError("step survival: class weights outside [0, 1]");
  return step_survival_from_masses(scores, class_masses(class_weights, y), floor);
}

double nonparametric_loglik(const StageTwoParams& eta, const Dataset& data,
                            const SieveBases& bases,
                            const Eigen::VectorXd& scores) {
  const Grid grid = make_grid(scores);
  const Eta working = from_params(eta, grid);
  check_shapes(working, data, bases, scores);
  return loglik(working, data, grid, genetic_prob(working.xi, bases));
}

StageTwoImputations e_step_stage2(const StageTwoParams& eta,
                                  const Dataset& data, const SieveBases& bases,
                                  const Eigen::VectorXd& scores) {
  const Grid grid = make_grid(scores);
  const Eta working = from_params(eta, grid);
  check_shapes(working, data, bases, scores);
  return impute(working, data, grid, genetic_prob(working.xi, bases));
}

StageTwoParams init_eta(const Dataset& data, const Eigen::VectorXd& scores,
                        const StageOneParams& stage1) {
  if (scores.size() != data.size())
    throw ValidationError("one score per record is required");
  const Grid grid = make_grid(scores);
  Eigen::VectorXd m1 = Eigen::VectorXd::Zero(data.size());
  Eigen::VectorXd m0 = Eigen::VectorXd::Zero(data.size());
  for (auto i : data.labeled_rows()) {
    if (data.label_level(i) == data.K()) m1[i] = 1.0;
    else m0[i] = 1.0;
  }
  if (m1.sum() == 0.0 || m0.sum() == 0.0) {
    throw DegenerateInputError(
        "initialization needs labeled rows with both Y* = 1 and Y* != 1");
  }
  Eta eta{jump_sizes(grid, m0, kJumpFloor), jump_sizes(grid, m1, kJumpFloor),
          stage1.lambda, stage1.xi};
  return to_params(eta, grid);
}

StageTwoFit run_em_stage2(const Dataset& data, const SieveBases& bases,
                          const Eigen::VectorXd& scores,
                          const StageOneParams& stage1,
                          const EmConfig& config) {
  const Grid grid = make_grid(scores);
  const Eta start = from_params(init_eta(data, scores, stage1), grid);
  check_shapes(start, data, bases, scores);

  struct State {
    Eta eta;
    Eigen::VectorXd g1;
    double objective = 0.0;
  };
  auto evaluate = [&](Eta eta) {
    State s{std::move(eta), {}, 0.0};
    s.g1 = genetic_prob(s.eta.xi, bases);
    s.objective = loglik(s.eta, data, grid, s.g1);
    return s;
  };
  auto update = [&](const State& s) {
    const StageTwoImputations imp = impute(s.eta, data, grid, s.g1);
    Eta next = s.eta;
    if (!config.frozen.lambda) next.lambda = update_lambda(imp.labeled, data);
    if (!config.frozen.xi) {
      Eigen::VectorXd y, w;
      pool_outcomes(data, imp.labeled, imp.all, y, w);
      next.xi = fit_fractional_logistic(y, bases.psi, w, config.glm, s.eta.xi)
                    .coefficients;
    }
    next.s0 = jump_sizes(grid, class_masses(imp.all, 0), kJumpFloor);
    next.s1 = jump_sizes(grid, class_masses(imp.all, 1), kJumpFloor);
    return evaluate(std::move(next));
  };
  const Eigen::Index k1 = data.K() + 1;
  const auto m = static_cast<Eigen::Index>(grid.points.size());
  auto pack = [&](const State& s) {
    Eigen::VectorXd x(s.eta.xi.size() + 2 * k1 + 2 * m);
    Eigen::Index at = 0;
    x.segment(at, s.eta.xi.size()) = s.eta.xi;
    at += s.eta.xi.size();
    for (int y = 0; y < 2; ++y) {
      x.segment(at, k1) = s.eta.lambda.row(y).transpose().array().log();
      at += k1;
    }
    x.segment(at, m) = s.eta.s0.array().log();
    x.segment(at + m, m) = s.eta.s1.array().log();
    return x;
  };
  auto unpack = [&](const Eigen::VectorXd& x, const State& like) {
    Eta eta = like.eta;
    Eigen::Index at = 0;
    eta.xi = x.segment(at, eta.xi.size());
    at += eta.xi.size();
    for (int y = 0; y < 2; ++y) {
      eta.lambda.row(y) =
          detail::simplex_from_logs(x.segment(at, k1), kLambdaClamp, 1.0 - kLambdaClamp)
              .transpose();
      at += k1;
    }
    eta.s0 = detail::simplex_from_logs(x.segment(at, m), kJumpFloor, 1.0);
    eta.s1 = detail::simplex_from_logs(x.segment(at + m, m), kJumpFloor, 1.0);
    return evaluate(std::move(eta));
  };

  State state = evaluate(start);
  StageTwoFit fit;
  fit.trace = detail::run_em_loop(state, update, pack, unpack, config, EmStage::two);
  fit.imputations = impute(state.eta, data, grid, state.g1);
  fit.params = to_params(state.eta, grid);
  return fit;
}

}  // namespace tube
