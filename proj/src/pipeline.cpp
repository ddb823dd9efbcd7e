#include "tube/pipeline.hpp"

#include "tube/error.hpp"
#include "tube/parallel.hpp"

#include <spdlog/spdlog.h>

#include <cmath>

namespace tube {

int resolved_score_bins(const PipelineConfig& config, Eigen::Index n) {
  if (config.score_grid == ScoreGrid::observed) return static_cast<int>(n);
  return config.score_bins > 0 ? config.score_bins
                               : choose_dimension(static_cast<long>(n));
}

PipelineFit fit_pipeline(const Dataset& data, const PipelineConfig& config) {
  PipelineFit out;
  out.bases = prepare_bases(data.x(), data.g(), config.bases);
  out.stage1 = run_em_stage1(data, out.bases, config.em);
  if (!out.stage1.trace.converged) {
    spdlog::warn("stage I EM stopped at the iteration cap ({} updates)",
                 out.stage1.trace.iterations);
  }
  out.raw_scores = config.score == ScoreKind::pca
                       ? pca_alpha_score(data, out.stage1.params.zeta, out.bases)
                       : additive_scores(out.stage1.params.zeta, out.bases);
  out.scores = config.score_grid == ScoreGrid::quantile
                   ? bin_scores(out.raw_scores, resolved_score_bins(config, data.size()))
                   : out.raw_scores;
  out.stage2 = run_em_stage2(data, out.bases, out.scores, out.stage1.params, config.em);
  if (!out.stage2.trace.converged) {
    spdlog::warn("stage II EM stopped at the iteration cap ({} updates)",
                 out.stage2.trace.iterations);
  }

  const ProjectionFits fits = fit_projection(out.stage2.imputations, data, config.em.glm);
  const Eigen::MatrixXd design = data.risk_design();
  Eigen::MatrixXd labeled_design(data.n_labeled(), design.cols());
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) labeled_design.row(r++) = design.row(i);
  out.beta0 = sign_align(fits.beta0, out.stage2.imputations.labeled, labeled_design,
                         config.sign, config.em.glm);
  out.beta1 = sign_align(fits.beta1, out.stage2.imputations.all, design, config.sign,
                         config.em.glm);
  out.s0 = out.stage2.params.s0;
  out.s1 = out.stage2.params.s1;
  if (out.beta1.sign_flipped) std::swap(out.s0, out.s1);
  out.roc = roc_curve(out.s0, out.s1);
  return out;
}

std::vector<Eigen::Index> stratified_resample(const Dataset& data, Rng& rng) {
  std::vector<Eigen::Index> labeled, unlabeled;
  for (Eigen::Index i = 0; i < data.size(); ++i)
    (data.labeled(i) ? labeled : unlabeled).push_back(i);
  std::vector<Eigen::Index> rows;
  rows.reserve(static_cast<std::size_t>(data.size()));
  for (const auto* stratum : {&labeled, &unlabeled}) {
    if (stratum->empty()) continue;
    std::uniform_int_distribution<std::size_t> pick(0, stratum->size() - 1);
    for (std::size_t k = 0; k < stratum->size(); ++k)
      rows.push_back((*stratum)[pick(rng)]);
  }
  return rows;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& draws) {
  if (draws.rows() < 2) throw BootstrapInstabilityError("covariance needs two draws");
  const Eigen::MatrixXd centered = draws.rowwise() - draws.colwise().mean();
  Eigen::MatrixXd cov = centered.transpose() * centered /
                        static_cast<double>(draws.rows() - 1);
  return 0.5 * (cov + cov.transpose());
}

BootstrapResult bootstrap_cov(const Dataset& data, const PipelineConfig& config,
                              int replicates) {
  if (replicates < 2) throw ConfigError("bootstrap needs at least two replicates");
  const Eigen::Index d = data.q() + 1;
  struct Slot {
    bool ok = false;
    bool converged = true;
    Eigen::VectorXd draw;
    double auc = 0.0;
    int v1 = 0;
    int v2 = 0;
  };
  std::vector<Slot> slots(static_cast<std::size_t>(replicates));
  PipelineConfig inner = config;
  inner.bootstrap = 0;
  parallel_for(replicates, config.threads, [&](long r) {
    Rng rng = derive_rng(config.seed, static_cast<std::uint64_t>(r));
    const auto rows = stratified_resample(data, rng);
    Slot& slot = slots[static_cast<std::size_t>(r)];
    try {
      const PipelineFit fit = fit_pipeline(data.subset(rows), inner);
      slot.draw.resize(2 * d);
      slot.draw << fit.beta0.fit.coefficients, fit.beta1.fit.coefficients;
      if (!slot.draw.allFinite()) throw SingularityError("non-finite replicate estimate");
      slot.auc = fit.roc.auc;
      slot.converged = fit.converged();
      slot.v1 = fit.stage1.trace.ascent_violations;
      slot.v2 = fit.stage2.trace.ascent_violations;
      slot.ok = true;
    } catch (const InternalConsistencyError&) {
      throw;
    } catch (const Error& e) {
      spdlog::warn("bootstrap replicate {} dropped: {}", r, e.what());
    }
  });
  BootstrapResult out;
  out.requested = replicates;
  std::vector<const Slot*> kept;
  for (const auto& s : slots) {
    out.stage1_violations += s.v1;
    out.stage2_violations += s.v2;
    if (s.ok) kept.push_back(&s);
    else ++out.failed;
  }
  if (out.failed > config.max_bootstrap_failure * replicates || kept.size() < 2) {
    throw BootstrapInstabilityError(std::to_string(out.failed) + " of " +
                                    std::to_string(replicates) +
                                    " bootstrap replicates failed");
  }
  out.draws.resize(static_cast<Eigen::Index>(kept.size()), 2 * d);
  for (std::size_t k = 0; k < kept.size(); ++k) {
    out.draws.row(static_cast<Eigen::Index>(k)) = kept[k]->draw.transpose();
    out.auc.push_back(kept[k]->auc);
    if (!kept[k]->converged) ++out.nonconverged;
  }
  out.cov_joint = sample_covariance(out.draws);
  out.se0 = out.cov_joint.diagonal().head(d).cwiseMax(0.0).cwiseSqrt();
  out.se1 = out.cov_joint.diagonal().tail(d).cwiseMax(0.0).cwiseSqrt();
  return out;
}

long TubeResult::stage1_violations() const {
  return fit.stage1.trace.ascent_violations + (bootstrap ? bootstrap->stage1_violations : 0);
}

long TubeResult::stage2_violations() const {
  return fit.stage2.trace.ascent_violations + (bootstrap ? bootstrap->stage2_violations : 0);
}

TubeResult run_tube(const Dataset& data, const PipelineConfig& config) {
  TubeResult out;
  out.fit = fit_pipeline(data, config);
  RiskModel& risk = out.risk;
  risk.beta0 = out.fit.beta0.fit.coefficients;
  risk.beta1 = out.fit.beta1.fit.coefficients;
  risk.sign_flipped0 = out.fit.beta0.sign_flipped;
  risk.sign_flipped1 = out.fit.beta1.sign_flipped;
  const Eigen::Index d = risk.beta0.size();
  if (config.bootstrap > 0) {
    out.bootstrap = bootstrap_cov(data, config, config.bootstrap);
    risk.cov_joint = out.bootstrap->cov_joint;
    risk.se0 = out.bootstrap->se0;
    risk.se1 = out.bootstrap->se1;
    risk.has_covariance = true;
    risk.combined = combine_beta(risk.beta0, risk.beta1, risk.cov_joint, config.omega);
    const auto& auc = out.bootstrap->auc;
    if (auc.size() >= 2) {
      double mean = 0.0;
      for (double a : auc) mean += a;
      mean /= static_cast<double>(auc.size());
      double ss = 0.0;
      for (double a : auc) ss += (a - mean) * (a - mean);
      out.auc_se = std::sqrt(ss / static_cast<double>(auc.size() - 1));
    }
  } else {
    risk.combined.omega = Eigen::VectorXd::Constant(d, 0.5);
    risk.combined.beta = 0.5 * (risk.beta0 + risk.beta1);
  }
  return out;
}

}  // namespace tube
