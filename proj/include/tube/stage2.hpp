#pragma once

#include "tube/basis.hpp"
#include "tube/data.hpp"
#include "tube/em.hpp"
#include "tube/stage1.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tube {

/// Survival function S(c) = sum of jump sizes at points > c, with jumps
/// only at observed scores.
struct StepSurvival {
  std::vector<double> jump_points;  // strictly increasing
  std::vector<double> jump_sizes;   // nonnegative, sum to 1

  double operator()(double c) const;
  /// Index of `score` among the jump points; throws InternalConsistencyError
  /// if it is not one of them.
  std::size_t index_of(double score) const;
  double jump_at(double score) const { return jump_sizes[index_of(score)]; }
};

struct StageTwoParams {
  StepSurvival s0;
  StepSurvival s1;
  Eigen::MatrixXd lambda;
  Eigen::VectorXd xi;
};

/// Final E-step output: `labeled` follows data.labeled_rows(); `all` has
/// one entry per record.
struct StageTwoImputations {
  Eigen::VectorXd labeled;
  Eigen::VectorXd all;
};

struct StageTwoFit {
  StageTwoParams params;
  EmTrace trace;
  StageTwoImputations imputations;
};

enum class ScoreKind { additive, pca };

/// sum_j phi_j(x_j)' zeta_j for one record.
double compute_alpha_score(const Eigen::VectorXd& x,
                           const std::vector<Eigen::VectorXd>& zeta,
                           const SieveBases& bases);
/// The additive score for every record of the training design.
Eigen::VectorXd additive_scores(const std::vector<Eigen::VectorXd>& zeta,
                                const SieveBases& bases);
/// Projection on the leading principal axis of the centered per-surrogate
/// linear predictors. Ties in the leading eigenvalue resolve to the
/// eigenvector whose first nonzero coordinate is positive; the final sign
/// makes the score correlate positively with the additive score.
Eigen::VectorXd pca_alpha_score(const Dataset& data,
                                const std::vector<Eigen::VectorXd>& zeta,
                                const SieveBases& bases);
Eigen::VectorXd pca_alpha_score(const Eigen::MatrixXd& predictors);

/// Coarsens scores onto `bins` quantile bins: each score is replaced by the
/// largest score in its bin (ties share a bin). Step functions fitted on the
/// result jump at no more than `bins` observed points. bins >= N returns the
/// scores unchanged.
Eigen::VectorXd bin_scores(const Eigen::VectorXd& scores, int bins);

/// Jump sizes from per-record masses, ties merged and floored at `floor`
/// before renormalization.
StepSurvival step_survival_from_masses(const Eigen::VectorXd& scores,
                                       const Eigen::VectorXd& masses,
                                       double floor = 1e-8);
/// Weighted empirical survival of `scores` in class y with masses
/// w^y (1 - w)^(1 - y).
StepSurvival step_survival_mle(const Eigen::VectorXd& scores,
                               const Eigen::VectorXd& class_weights, int y,
                               double floor = 1e-8);

double nonparametric_loglik(const StageTwoParams& eta, const Dataset& data,
                            const SieveBases& bases,
                            const Eigen::VectorXd& scores);

/// E-step formulas evaluated at eta.
StageTwoImputations e_step_stage2(const StageTwoParams& eta,
                                  const Dataset& data, const SieveBases& bases,
                                  const Eigen::VectorXd& scores);

/// Starting point: lambda and xi from Stage I; s0/s1 from the labeled
/// I(Y* = 1) split.
StageTwoParams init_eta(const Dataset& data, const Eigen::VectorXd& scores,
                        const StageOneParams& stage1);

/// `imputations` holds the E-step at the returned parameters. Blocks marked
/// frozen in config (xi, lambda) keep their starting values.
StageTwoFit run_em_stage2(const Dataset& data, const SieveBases& bases,
                          const Eigen::VectorXd& scores,
                          const StageOneParams& stage1,
                          const EmConfig& config = {});

}  // namespace tube
