#pragma once

#include "tube/data.hpp"
#include "tube/glm.hpp"
#include "tube/pipeline.hpp"

#include <Eigen/Dense>

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace tube {

/// Simulation design. name: 'a' (logistic in G), 'b' and 'c' (nonlinear in
/// G1; 'c' also lets X depend weakly on G1).
struct SimSetting {
  char name = 'a';
  long N = 10000;
  long n = 500;
  std::uint64_t seed = 1;
  int replications = 100;
};

struct SimulatedData {
  Dataset data;
  Eigen::VectorXd y_true;  // hidden disease status, for oracle use only
};

/// Throws ConfigError for an unknown setting name or n outside [1, N).
void validate_setting(const SimSetting& setting);

/// Draws one cohort; the first n rows are labeled. Bitwise reproducible for
/// a given setting.seed.
SimulatedData generate_dataset(const SimSetting& setting);

/// sum_j (mean_j(Y=1) - mean_j(Y=0)) X_j: the population additive score
/// (up to a monotone map) for the simulated surrogate model.
Eigen::VectorXd population_score(const Eigen::MatrixXd& x);

/// Empirical AUC of `scores` against binary `y` (ties count one half).
double empirical_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& y);

struct PopulationOracle {
  Eigen::VectorXd beta_bar;
  double auc_bar = 0.0;
  Eigen::MatrixXd lambda_bar;  // 2 x 3, rows y = 0, 1
  double prevalence = 0.0;
  long draws = 0;
};

/// Monte Carlo over M >= 1e6 records (unlabeled draws from the setting).
PopulationOracle population_oracle(const SimSetting& setting, long m = 1000000,
                                   int threads = 1);

/// Logistic fit of Y* (values k/K) on (1, G) over labeled rows.
LogisticFit naive_logistic(const Dataset& data, const LogisticOptions& glm = {});

/// Model-based standard errors (inverse observed information) of a
/// logistic fit on `design`.
Eigen::VectorXd logistic_standard_errors(const Eigen::VectorXd& beta,
                                         const Eigen::MatrixXd& design);

/// The TUBE pipeline with every basis forced to linear.
TubeResult parametric_baseline(const Dataset& data, PipelineConfig config);

struct ReferenceMetrics {
  double mspe = 0.0;
  double deviance_delta = 0.0;
  bool has_deviance = false;
  double class_cor = 0.0;
  bool class_cor_defined = true;
  double false_class = 0.0;
};

/// Compares a fitted risk model with a reference on `design` (rows of
/// (1, G)); `labels` (optional) enables the deviance difference, reported
/// as mean NLL(beta_hat) - mean NLL(beta_ref).
ReferenceMetrics eval_against_reference(const Eigen::VectorXd& beta_hat,
                                        const Eigen::VectorXd& beta_ref,
                                        const Eigen::MatrixXd& design,
                                        const std::optional<Eigen::VectorXd>& labels = {});

enum class SimMethod { naive_logistic, parametric_baseline, tube };
const char* to_string(SimMethod method);
SimMethod sim_method_from_string(const std::string& name);

struct SimConfig {
  PipelineConfig pipeline;
  /// Bootstrap replicates for the parametric baseline; < 0 uses
  /// pipeline.bootstrap.
  int baseline_bootstrap = -1;
  std::vector<SimMethod> methods{SimMethod::naive_logistic,
                                 SimMethod::parametric_baseline, SimMethod::tube};
  /// Monte Carlo size of the population oracle.
  long oracle_draws = 1000000;
  int threads = 1;
  /// Replace pipeline.sign by default_sign_policy(setting.name).
  bool auto_sign = true;
};

/// Label-switching anchor matched to each design's projection parameter:
/// G1 positive for 'a' and 'b'; G2 negative for 'c', whose G1 coefficient
/// is small.
SignPolicy default_sign_policy(char setting);

/// Aggregates for one parameter of one method.
struct MetricRow {
  std::string parameter;
  double truth = 0.0;
  double mean = 0.0;
  double bias = 0.0;
  double mse = 0.0;
  double percent_bias = 0.0;
  std::optional<double> cp;  // coverage of the nominal 95% interval
  int count = 0;
};

struct MethodReport {
  SimMethod method;
  std::vector<MetricRow> rows;
  int failures = 0;
  /// Per replication: estimates (beta..., auc if any); empty when failed.
  std::vector<std::vector<double>> estimates;
  std::vector<std::vector<double>> standard_errors;
};

struct SimReport {
  SimSetting setting;
  PopulationOracle oracle;
  std::vector<std::string> parameters;  // beta0..beta_q, auc
  std::vector<MethodReport> methods;
  /// lambda-hat (Stage I) and lambda-tilde (Stage II) of the TUBE fits,
  /// averaged over successful replications.
  Eigen::MatrixXd mean_lambda_stage1;
  Eigen::MatrixXd mean_lambda_stage2;
  /// EM ascent violations over every fit of every replication (bootstrap
  /// replicates included).
  long stage1_violations = 0;
  long stage2_violations = 0;
};

/// Replication r uses the cohort seed derive_seed(setting.seed, r); any
/// bootstrap inside uses derive_seed(setting.seed ^ tag, r). Tables are
/// identical for every thread count.
SimReport run_replications(const SimSetting& setting, const SimConfig& config);

/// As above with a precomputed oracle.
SimReport run_replications(const SimSetting& setting, const SimConfig& config,
                           const PopulationOracle& oracle);

}  // namespace tube
