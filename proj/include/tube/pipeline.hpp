#pragma once

#include "tube/basis.hpp"
#include "tube/data.hpp"
#include "tube/em.hpp"
#include "tube/parallel.hpp"
#include "tube/stage1.hpp"
#include "tube/stage2.hpp"
#include "tube/stage3.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <vector>

namespace tube {

enum class ScoreGrid { quantile, observed };

struct PipelineConfig {
  BasisConfig bases;
  EmConfig em;
  ScoreKind score = ScoreKind::additive;
  /// Where the Stage II step functions may jump: `quantile` coarsens the
  /// phenotype score to `score_bins` quantile bins (<= 0: ceil(N^{1/3}));
  /// `observed` allows a jump at every distinct score.
  ScoreGrid score_grid = ScoreGrid::quantile;
  int score_bins = 0;
  SignPolicy sign;
  OmegaMode omega = OmegaMode::per_coefficient;
  /// Bootstrap replicates for the covariance of (beta0, beta1); 0 skips the
  /// bootstrap (omega then defaults to 0.5 and no SEs are reported).
  int bootstrap = 200;
  /// Fraction of failed replicates tolerated before giving up.
  double max_bootstrap_failure = 0.10;
  std::uint64_t seed = 1;
  int threads = 1;
};

/// Point estimate from one pass through Stages I-III.
struct PipelineFit {
  SieveBases bases;
  StageOneFit stage1;
  Eigen::VectorXd raw_scores;  // alpha-hat per record
  Eigen::VectorXd scores;      // scores on the Stage II grid
  StageTwoFit stage2;
  AlignedFit beta0;
  AlignedFit beta1;
  /// Step functions with classes swapped when beta1 was flipped.
  StepSurvival s0;
  StepSurvival s1;
  RocCurve roc;

  bool converged() const {
    return stage1.trace.converged && stage2.trace.converged &&
           beta0.fit.converged && beta1.fit.converged;
  }
};

PipelineFit fit_pipeline(const Dataset& data, const PipelineConfig& config);

struct BootstrapResult {
  /// Rows: replicates that succeeded, in replicate order; columns: stacked
  /// (beta0, beta1).
  Eigen::MatrixXd draws;
  std::vector<double> auc;
  Eigen::MatrixXd cov_joint;
  Eigen::VectorXd se0;
  Eigen::VectorXd se1;
  int requested = 0;
  int failed = 0;
  /// Replicates whose internal fits hit an iteration cap.
  int nonconverged = 0;
  /// EM ascent violations summed over all replicates (failed ones included).
  long stage1_violations = 0;
  long stage2_violations = 0;
};

/// Resamples labeled and unlabeled rows separately (sizes preserved) and
/// reruns the pipeline on each replicate. Replicate r draws from
/// derive_rng(seed, r), so results do not depend on `threads`.
BootstrapResult bootstrap_cov(const Dataset& data, const PipelineConfig& config,
                              int replicates);

/// Row indices of one stratified resample.
std::vector<Eigen::Index> stratified_resample(const Dataset& data, Rng& rng);

/// Empirical covariance (divisor rows - 1) of the rows of `draws`.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& draws);

struct RiskModel {
  Eigen::VectorXd beta0;
  Eigen::VectorXd beta1;
  Eigen::VectorXd se0;  // empty without bootstrap
  Eigen::VectorXd se1;
  Eigen::MatrixXd cov_joint;
  CombinedBeta combined;
  bool sign_flipped0 = false;
  bool sign_flipped1 = false;
  bool has_covariance = false;
};

struct TubeResult {
  PipelineFit fit;
  std::optional<BootstrapResult> bootstrap;
  RiskModel risk;
  double auc_se = 0.0;  // bootstrap SE of the ROC AUC (0 without bootstrap)

  /// Ascent violations of the point fit plus every bootstrap replicate.
  long stage1_violations() const;
  long stage2_violations() const;
};

/// fit_pipeline, then (if config.bootstrap > 0) bootstrap_cov and the
/// combined estimator.
TubeResult run_tube(const Dataset& data, const PipelineConfig& config);

/// Number of score bins used for a cohort of size n under `config`.
int resolved_score_bins(const PipelineConfig& config, Eigen::Index n);

}  // namespace tube
