#pragma once

#include "tube/data.hpp"
#include "tube/glm.hpp"
#include "tube/stage2.hpp"

#include <Eigen/Dense>

#include <vector>

namespace tube {

/// Re-evaluates the Stage II E-step at the fitted parameters.
StageTwoImputations final_imputations(const StageTwoParams& eta,
                                      const Dataset& data,
                                      const SieveBases& bases,
                                      const Eigen::VectorXd& scores);

struct ProjectionFits {
  LogisticFit beta0;  // labeled rows, outcome Y~_i0
  LogisticFit beta1;  // all rows, outcome Y~_i1
};

/// Logistic projections of the imputations on the raw (1, G) design.
ProjectionFits fit_projection(const StageTwoImputations& imputations,
                              const Dataset& data,
                              const LogisticOptions& glm = {});

enum class SignPolicyKind { anchor, prevalence, none };

struct SignPolicy {
  SignPolicyKind kind = SignPolicyKind::anchor;
  /// Coefficient index in the (1, G) design; 1 is the first risk factor.
  Eigen::Index anchor = 1;
  /// Required sign of the anchor coefficient (+1 or -1).
  int anchor_sign = 1;
};

struct AlignedFit {
  LogisticFit fit;
  bool sign_flipped = false;
};

/// Resolves label switching. When the policy calls for a flip, the fit is
/// replaced by the fit to 1 - y (complemented imputations). Near-zero
/// anchors (|b| <= 1e-8) log a warning and are left alone.
AlignedFit sign_align(const LogisticFit& fit, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& design, const SignPolicy& policy,
                      const LogisticOptions& glm = {});
/// True when `policy` asks for the coefficients to be flipped.
bool needs_flip(const Eigen::VectorXd& beta, const Eigen::MatrixXd& design,
                const SignPolicy& policy);

enum class OmegaMode { per_coefficient, scalar };

struct CombinedBeta {
  Eigen::VectorXd omega;  // one weight per coefficient
  Eigen::VectorXd beta;
  Eigen::VectorXd se;
  /// Coefficients whose variance of beta0 - beta1 vanished (omega = 0.5).
  std::vector<Eigen::Index> degenerate;
};

/// Minimizer over [0, 1] of (w, 1 - w) S (w, 1 - w)' for the 2 x 2 block S.
double optimal_omega(double s00, double s11, double s01, bool* degenerate = nullptr);

/// cov_joint is the covariance of the stacked (beta0, beta1).
CombinedBeta combine_beta(const Eigen::VectorXd& beta0,
                          const Eigen::VectorXd& beta1,
                          const Eigen::MatrixXd& cov_joint,
                          OmegaMode mode = OmegaMode::per_coefficient);

struct RocCurve {
  std::vector<double> fpr;
  std::vector<double> tpr;
  double auc = 0.5;
};

/// Curve {(S0(c), S1(c))} for c from +inf down to -inf over the jump points;
/// AUC is the concordance sum_{a,b} m1(a) m0(b) [I(a > b) + I(a = b) / 2].
RocCurve roc_curve(const StepSurvival& s0, const StepSurvival& s1);

/// Weighted concordance of `scores` with class-1 weights w and class-0
/// weights 1 - w; ties count one half.
double score_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& weights);

}  // namespace tube
