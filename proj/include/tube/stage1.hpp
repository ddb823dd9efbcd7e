#pragma once

#include "tube/basis.hpp"
#include "tube/data.hpp"
#include "tube/em.hpp"
#include "tube/glm.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tube {

/// theta = {xi, zeta_1..zeta_p, lambda, mu} of the sieve composite
/// likelihood. lambda(y, k) = Pr(Y* = k/K | Y = y).
struct StageOneParams {
  Eigen::VectorXd xi;
  std::vector<Eigen::VectorXd> zeta;
  Eigen::MatrixXd lambda;
  double mu = 0.5;
};

/// E-step output. `labeled` follows data.labeled_rows(); `surrogate` is
/// N x p.
struct StageOneImputations {
  Eigen::VectorXd labeled;
  Eigen::MatrixXd surrogate;
};

struct StageOneFit {
  StageOneParams params;
  EmTrace trace;
};

/// Initial lambda: 0.85 on the "reliable" cell of each row, 0.15/K spread
/// over the remaining levels.
Eigen::MatrixXd initial_lambda(int k);

double composite_loglik(const StageOneParams& theta, const Dataset& data,
                        const SieveBases& bases);

/// Starting values from logistic fits of I(Y* = 1) on labeled rows.
StageOneParams init_theta(const Dataset& data, const SieveBases& bases,
                          const LogisticOptions& glm = {});

StageOneImputations e_step_stage1(const StageOneParams& theta,
                                  const Dataset& data,
                                  const SieveBases& bases);

/// `previous` supplies warm starts and the values of frozen blocks.
StageOneParams m_step_stage1(const StageOneImputations& imputations,
                             const Dataset& data, const SieveBases& bases,
                             const StageOneParams& previous,
                             const EmConfig& config = {});

/// Alternates E and M steps from `init_theta` (or `start`) until the
/// relative objective change drops below tolerance. Throws
/// InternalConsistencyError if an update decreases the objective beyond the
/// slack.
StageOneFit run_em_stage1(const Dataset& data, const SieveBases& bases,
                          const EmConfig& config = {});
StageOneFit run_em_stage1(const Dataset& data, const SieveBases& bases,
                          const EmConfig& config, const StageOneParams& start);

/// lambda update shared by both EM stages: weighted frequencies of the
/// observed grade under each posterior class, clamped and renormalized.
Eigen::MatrixXd update_lambda(const Eigen::VectorXd& labeled_posterior,
                              const Dataset& data);

/// Pooled outcome/weight pairs that turn "labeled term + sum over j" into a
/// single weighted logistic fit on psi.
void pool_outcomes(const Dataset& data, const Eigen::VectorXd& labeled,
                   const Eigen::MatrixXd& per_row, Eigen::VectorXd& y,
                   Eigen::VectorXd& w);

}  // namespace tube
