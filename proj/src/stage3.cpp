#include "tube/stage3.hpp"

#include "tube/error.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numeric>

namespace tube {

StageTwoImputations final_imputations(const StageTwoParams& eta,
                                      const Dataset& data,
                                      const SieveBases& bases,
                                      const Eigen::VectorXd& scores) {
  return e_step_stage2(eta, data, bases, scores);
}

ProjectionFits fit_projection(const StageTwoImputations& imputations,
                              const Dataset& data, const LogisticOptions& glm) {
  const Eigen::MatrixXd design = data.risk_design();
  if (imputations.all.size() != data.size() ||
      imputations.labeled.size() != data.n_labeled()) {
    throw ValidationError("imputations do not match the dataset");
  }
  Eigen::MatrixXd labeled_design(data.n_labeled(), design.cols());
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) labeled_design.row(r++) = design.row(i);
  ProjectionFits fits;
  fits.beta0 = fit_fractional_logistic(imputations.labeled, labeled_design, {}, glm);
  fits.beta1 = fit_fractional_logistic(imputations.all, design, {}, glm);
  return fits;
}

bool needs_flip(const Eigen::VectorXd& beta, const Eigen::MatrixXd& design,
                const SignPolicy& policy) {
  switch (policy.kind) {
    case SignPolicyKind::none:
      return false;
    case SignPolicyKind::anchor: {
      if (policy.anchor < 0 || policy.anchor >= beta.size())
        throw ConfigError("sign anchor index out of range");
      if (policy.anchor_sign != 1 && policy.anchor_sign != -1)
        throw ConfigError("sign anchor direction must be +1 or -1");
      const double b = beta[policy.anchor];
      if (std::abs(b) <= 1e-8) {
        spdlog::warn("sign anchor coefficient {} is within 1e-8 of zero; not flipping",
                     policy.anchor);
        return false;
      }
      return b * policy.anchor_sign < 0.0;
    }
    case SignPolicyKind::prevalence: {
      Eigen::VectorXd eta = design * beta;
      double mean = 0.0;
      for (Eigen::Index i = 0; i < eta.size(); ++i) mean += expit(eta[i]);
      return mean / static_cast<double>(eta.size()) > 0.5;
    }
  }
  return false;
}

AlignedFit sign_align(const LogisticFit& fit, const Eigen::VectorXd& y,
                      const Eigen::MatrixXd& design, const SignPolicy& policy,
                      const LogisticOptions& glm) {
  AlignedFit out{fit, false};
  if (!needs_flip(fit.coefficients, design, policy)) return out;
  const Eigen::VectorXd complement = (1.0 - y.array()).matrix();
  // Start from the exact mirror image; the refit only polishes it.
  out.fit = fit_fractional_logistic(complement, design, {}, glm, -fit.coefficients);
  out.sign_flipped = true;
  return out;
}

double optimal_omega(double s00, double s11, double s01, bool* degenerate) {
  const double denom = s00 + s11 - 2.0 * s01;
  if (degenerate) *degenerate = false;
  if (!(denom > 1e-12)) {
    if (degenerate) *degenerate = true;
    return 0.5;
  }
  return std::clamp((s11 - s01) / denom, 0.0, 1.0);
}

CombinedBeta combine_beta(const Eigen::VectorXd& beta0,
                          const Eigen::VectorXd& beta1,
                          const Eigen::MatrixXd& cov_joint, OmegaMode mode) {
  const Eigen::Index d = beta0.size();
  if (beta1.size() != d || cov_joint.rows() != 2 * d || cov_joint.cols() != 2 * d)
    throw ValidationError("combine_beta: dimension mismatch");
  CombinedBeta out;
  out.omega.resize(d);
  out.beta.resize(d);
  out.se.resize(d);
  double shared = 0.5;
  if (mode == OmegaMode::scalar) {
    const Eigen::Index k = d > 1 ? 1 : 0;
    bool degenerate = false;
    shared = optimal_omega(cov_joint(k, k), cov_joint(d + k, d + k),
                           cov_joint(k, d + k), &degenerate);
    if (degenerate) {
      spdlog::warn("combine_beta: variance of beta0 - beta1 vanished; omega = 0.5");
      out.degenerate.push_back(k);
    }
  }
  for (Eigen::Index k = 0; k < d; ++k) {
    const double s00 = cov_joint(k, k);
    const double s11 = cov_joint(d + k, d + k);
    const double s01 = cov_joint(k, d + k);
    double w = shared;
    if (mode == OmegaMode::per_coefficient) {
      bool degenerate = false;
      w = optimal_omega(s00, s11, s01, &degenerate);
      if (degenerate) {
        spdlog::warn("combine_beta: variance of beta0 - beta1 vanished for "
                     "coefficient {}; omega = 0.5", k);
        out.degenerate.push_back(k);
      }
    }
    out.omega[k] = w;
    out.beta[k] = w * beta0[k] + (1.0 - w) * beta1[k];
    const double var = w * w * s00 + (1.0 - w) * (1.0 - w) * s11 + 2.0 * w * (1.0 - w) * s01;
    out.se[k] = std::sqrt(std::max(var, 0.0));
  }
  return out;
}

RocCurve roc_curve(const StepSurvival& s0, const StepSurvival& s1) {
  if (s0.jump_points != s1.jump_points)
    throw ValidationError("roc_curve: step functions are on different grids");
  const std::size_t m = s0.jump_points.size();
  RocCurve roc;
  roc.fpr.reserve(m + 1);
  roc.tpr.reserve(m + 1);
  roc.fpr.push_back(0.0);
  roc.tpr.push_back(0.0);
  // Thresholds just below each jump point, from the top down.
  double fpr = 0.0, tpr = 0.0;
  for (std::size_t k = m; k-- > 0;) {
    fpr += s0.jump_sizes[k];
    tpr += s1.jump_sizes[k];
    roc.fpr.push_back(std::min(fpr, 1.0));
    roc.tpr.push_back(std::min(tpr, 1.0));
  }
  roc.fpr.back() = 1.0;
  roc.tpr.back() = 1.0;
  double below0 = 0.0, auc = 0.0;
  for (std::size_t k = 0; k < m; ++k) {
    auc += s1.jump_sizes[k] * (below0 + 0.5 * s0.jump_sizes[k]);
    below0 += s0.jump_sizes[k];
  }
  roc.auc = std::clamp(auc, 0.0, 1.0);
  return roc;
}

double score_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& weights) {
  const Eigen::Index n = scores.size();
  if (weights.size() != n) throw ValidationError("score_auc: length mismatch");
  if (!scores.allFinite()) throw ValidationError("score_auc: scores must be finite");
  std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  std::sort(order.begin(), order.end(),
            [&](Eigen::Index a, Eigen::Index b) { return scores[a] < scores[b]; });
  double total1 = 0.0, total0 = 0.0, below0 = 0.0, concordant = 0.0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i;
    double group1 = 0.0, group0 = 0.0;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      const double w = weights[order[j]];
      group1 += w;
      group0 += 1.0 - w;
      ++j;
    }
    concordant += group1 * (below0 + 0.5 * group0);
    below0 += group0;
    total1 += group1;
    total0 += group0;
    i = j;
  }
  if (!(total1 > 0.0) || !(total0 > 0.0))
    throw DegeneratePosteriorError("score_auc: a class has zero total weight");
  return concordant / (total1 * total0);
}

}  // namespace tube
