#include "tube/simlab.hpp"

#include "tube/error.hpp"
#include "tube/parallel.hpp"
#include "tube/stage1.hpp"

#include <spdlog/spdlog.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

namespace tube {

namespace {

constexpr std::uint64_t kBootstrapTag = 0xB007'57A9'0000'0001ULL;
constexpr std::uint64_t kBaselineTag = 0xB45E'11AE'0000'0002ULL;
constexpr std::uint64_t kOracleTag = 0x0AC1'E000'0000'0003ULL;

// Uniform on [0, 1) from the top 53 bits; platform independent.
double uniform(Rng& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Box-Muller, one draw per call (the sine branch is discarded so the
// stream position depends only on the number of draws).
double normal(Rng& rng) {
  double u1 = uniform(rng);
  while (u1 <= 0.0) u1 = uniform(rng);
  const double u2 = uniform(rng);
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

int binomial2(Rng& rng, double p) {
  return (uniform(rng) < p ? 1 : 0) + (uniform(rng) < p ? 1 : 0);
}

struct Draw {
  double g[4];
  double x[3];
  int y;
  int b;  // Y* = b / 2
};

Draw draw_record(char setting, Rng& rng) {
  Draw d{};
  d.g[0] = normal(rng);
  for (int k = 1; k < 4; ++k) d.g[k] = binomial2(rng, 0.6);
  const double g1 = d.g[0];
  const double rest = d.g[1] + d.g[2] + d.g[3];
  double eta = 0.0;
  switch (setting) {
    case 'a': eta = -4.6 + 1.6 * (g1 + rest); break;
    case 'b': eta = g1 + g1 * g1 - std::cos(g1) - rest + 2.0; break;
    case 'c': eta = -g1 + g1 * g1 + std::sin(g1) - rest + 1.0; break;
    default: throw ConfigError(std::string("unknown simulation setting '") + setting + "'");
  }
  d.y = uniform(rng) < expit(eta) ? 1 : 0;
  const double y = d.y;
  const double shift = setting == 'c' ? 0.005 * g1 : 0.0;
  d.x[0] = y + 0.5 * (1.0 - y) + normal(rng) + shift;
  d.x[1] = y + 0.5 * (1.0 - y) + normal(rng) + shift;
  d.x[2] = 0.5 * y + 0.25 * (1.0 - y) + normal(rng) + shift;
  d.b = binomial2(rng, expit(-2.0 + 4.0 * y + 0.1 * (d.x[0] + d.x[1] + d.x[2])));
  return d;
}

struct Aggregator {
  std::vector<double> sum, sum_sq, hits;
  std::vector<int> count, ci_count;
  explicit Aggregator(std::size_t k)
      : sum(k), sum_sq(k), hits(k), count(k), ci_count(k) {}
};

}  // namespace

void validate_setting(const SimSetting& setting) {
  if (setting.name != 'a' && setting.name != 'b' && setting.name != 'c')
    throw ConfigError(std::string("unknown simulation setting '") + setting.name + "'");
  if (setting.n < 1 || setting.n >= setting.N)
    throw ConfigError("simulation needs 1 <= n < N");
  if (setting.replications < 0) throw ConfigError("replications must be >= 0");
}

SimulatedData generate_dataset(const SimSetting& setting) {
  validate_setting(setting);
  Rng rng = derive_rng(setting.seed, 0);
  const Eigen::Index n_all = setting.N;
  Eigen::MatrixXd x(n_all, 3), g(n_all, 4);
  Eigen::VectorXd y(n_all);
  std::vector<std::optional<double>> y_star(static_cast<std::size_t>(n_all));
  for (Eigen::Index i = 0; i < n_all; ++i) {
    const Draw d = draw_record(setting.name, rng);
    for (int k = 0; k < 4; ++k) g(i, k) = d.g[k];
    for (int k = 0; k < 3; ++k) x(i, k) = d.x[k];
    y[i] = d.y;
    if (i < setting.n) y_star[static_cast<std::size_t>(i)] = d.b / 2.0;
  }
  SimulatedData out{Dataset(std::move(x), std::move(g), std::move(y_star), 2),
                    std::move(y)};
  return out;
}

Eigen::VectorXd population_score(const Eigen::MatrixXd& x) {
  if (x.cols() != 3) throw ValidationError("population score expects three surrogates");
  return 0.5 * x.col(0) + 0.5 * x.col(1) + 0.25 * x.col(2);
}

double empirical_auc(const Eigen::VectorXd& scores, const Eigen::VectorXd& y) {
  return score_auc(scores, y);
}

PopulationOracle population_oracle(const SimSetting& setting, long m, int threads) {
  validate_setting(setting);
  if (m < 1000000) throw ConfigError("population oracle needs at least 1e6 draws");
  constexpr long kChunk = 100000;
  const long chunks = (m + kChunk - 1) / kChunk;
  Eigen::MatrixXd design(m, 5), x(m, 3);
  Eigen::VectorXd y(m);
  std::vector<Eigen::Matrix<double, 2, 3>> counts(static_cast<std::size_t>(chunks));
  parallel_for(chunks, threads, [&](long c) {
    Rng rng = derive_rng(setting.seed ^ kOracleTag, static_cast<std::uint64_t>(c));
    auto& cell = counts[static_cast<std::size_t>(c)];
    cell.setZero();
    const long end = std::min(m, (c + 1) * kChunk);
    for (long i = c * kChunk; i < end; ++i) {
      const Draw d = draw_record(setting.name, rng);
      design(i, 0) = 1.0;
      for (int k = 0; k < 4; ++k) design(i, k + 1) = d.g[k];
      for (int k = 0; k < 3; ++k) x(i, k) = d.x[k];
      y[i] = d.y;
      cell(d.y, d.b) += 1.0;
    }
  });
  PopulationOracle out;
  out.draws = m;
  out.beta_bar = fit_fractional_logistic(y, design).coefficients;
  out.auc_bar = empirical_auc(population_score(x), y);
  Eigen::Matrix<double, 2, 3> total = Eigen::Matrix<double, 2, 3>::Zero();
  for (const auto& c : counts) total += c;
  out.lambda_bar = total;
  for (int r = 0; r < 2; ++r) out.lambda_bar.row(r) /= total.row(r).sum();
  out.prevalence = y.mean();
  return out;
}

LogisticFit naive_logistic(const Dataset& data, const LogisticOptions& glm) {
  if (data.n_labeled() == 0) throw DegenerateInputError("naive fit needs labeled rows");
  const Eigen::MatrixXd design = data.risk_design();
  Eigen::MatrixXd labeled(data.n_labeled(), design.cols());
  Eigen::VectorXd y(data.n_labeled());
  Eigen::Index r = 0;
  for (auto i : data.labeled_rows()) {
    labeled.row(r) = design.row(i);
    y[r++] = *data.y_star(i);
  }
  return fit_fractional_logistic(y, labeled, {}, glm);
}

Eigen::VectorXd logistic_standard_errors(const Eigen::VectorXd& beta,
                                         const Eigen::MatrixXd& design) {
  const Eigen::VectorXd eta = design * beta;
  Eigen::VectorXd root(eta.size());
  for (Eigen::Index i = 0; i < eta.size(); ++i) {
    const double p = expit(eta[i]);
    root[i] = std::sqrt(p * (1.0 - p));
  }
  const Eigen::MatrixXd scaled = design.array().colwise() * root.array();
  const Eigen::MatrixXd info = scaled.transpose() * scaled;
  Eigen::LDLT<Eigen::MatrixXd> ldlt(info);
  if (ldlt.info() != Eigen::Success || !ldlt.isPositive())
    throw SingularityError("information matrix is singular");
  const Eigen::MatrixXd inv =
      ldlt.solve(Eigen::MatrixXd::Identity(info.rows(), info.cols()));
  return inv.diagonal().cwiseMax(0.0).cwiseSqrt();
}

TubeResult parametric_baseline(const Dataset& data, PipelineConfig config) {
  config.bases.force_linear = true;
  return run_tube(data, config);
}

ReferenceMetrics eval_against_reference(const Eigen::VectorXd& beta_hat,
                                        const Eigen::VectorXd& beta_ref,
                                        const Eigen::MatrixXd& design,
                                        const std::optional<Eigen::VectorXd>& labels) {
  if (beta_hat.size() != design.cols() || beta_ref.size() != design.cols())
    throw ValidationError("coefficient length does not match the design");
  const Eigen::Index n = design.rows();
  if (n == 0) throw ValidationError("evaluation data is empty");
  if (labels && labels->size() != n) throw ValidationError("label length mismatch");
  const Eigen::VectorXd eta_ref = design * beta_ref;
  const Eigen::VectorXd eta_hat = design * beta_hat;
  Eigen::VectorXd p_ref(n), p_hat(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    p_ref[i] = expit(eta_ref[i]);
    p_hat[i] = expit(eta_hat[i]);
  }
  ReferenceMetrics out;
  out.mspe = (p_ref - p_hat).squaredNorm() / static_cast<double>(n);
  const double cutoff = p_ref.mean();
  Eigen::VectorXd a(n), b(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    a[i] = p_ref[i] > cutoff ? 1.0 : 0.0;
    b[i] = p_hat[i] > cutoff ? 1.0 : 0.0;
  }
  out.false_class = (a - b).cwiseAbs().sum() / static_cast<double>(n);
  const Eigen::VectorXd ac = a.array() - a.mean();
  const Eigen::VectorXd bc = b.array() - b.mean();
  const double denom = std::sqrt(ac.squaredNorm() * bc.squaredNorm());
  if (denom > 0.0) {
    out.class_cor = ac.dot(bc) / denom;
  } else {
    out.class_cor = 0.0;
    out.class_cor_defined = false;
  }
  if (labels) {
    double diff = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      diff += bernoulli_loglik((*labels)[i], eta_ref[i]) -
              bernoulli_loglik((*labels)[i], eta_hat[i]);
    }
    out.deviance_delta = diff / static_cast<double>(n);
    out.has_deviance = true;
  }
  return out;
}

const char* to_string(SimMethod method) {
  switch (method) {
    case SimMethod::naive_logistic: return "naive_logistic";
    case SimMethod::parametric_baseline: return "parametric_baseline";
    case SimMethod::tube: return "tube";
  }
  return "unknown";
}

SimMethod sim_method_from_string(const std::string& name) {
  if (name == "naive_logistic") return SimMethod::naive_logistic;
  if (name == "parametric_baseline") return SimMethod::parametric_baseline;
  if (name == "tube") return SimMethod::tube;
  throw ConfigError("unknown method '" + name + "'");
}

SignPolicy default_sign_policy(char setting) {
  SignPolicy policy;
  if (setting == 'c') {
    policy.anchor = 2;
    policy.anchor_sign = -1;
  }
  return policy;
}

SimReport run_replications(const SimSetting& setting, const SimConfig& config) {
  validate_setting(setting);
  if (setting.replications == 0) {
    SimReport empty;
    empty.setting = setting;
    return empty;
  }
  return run_replications(setting, config,
                          population_oracle(setting, config.oracle_draws, config.threads));
}

SimReport run_replications(const SimSetting& setting, const SimConfig& config,
                           const PopulationOracle& oracle) {
  validate_setting(setting);
  SimReport report;
  report.setting = setting;
  report.oracle = oracle;
  const int reps = setting.replications;
  const std::size_t n_beta = 5;
  for (std::size_t k = 0; k < n_beta; ++k) report.parameters.push_back("beta" + std::to_string(k));
  report.parameters.push_back("auc");
  const std::size_t n_par = report.parameters.size();
  if (reps == 0) return report;
  if (oracle.beta_bar.size() != static_cast<Eigen::Index>(n_beta))
    throw ConfigError("population oracle is missing or has the wrong size");

  struct Outcome {
    bool ok = false;
    std::vector<double> est, se;  // se empty when unavailable
    Eigen::MatrixXd lambda1, lambda2;
    long v1 = 0, v2 = 0;
  };
  const std::size_t n_methods = config.methods.size();
  std::vector<std::vector<Outcome>> outcomes(static_cast<std::size_t>(reps),
                                             std::vector<Outcome>(n_methods));
  const int inner_threads = reps > 1 ? 1 : config.threads;

  parallel_for(reps, reps > 1 ? config.threads : 1, [&](long r) {
    SimSetting local = setting;
    local.seed = derive_seed(setting.seed, static_cast<std::uint64_t>(r));
    const SimulatedData sim = generate_dataset(local);
    for (std::size_t m = 0; m < n_methods; ++m) {
      Outcome& out = outcomes[static_cast<std::size_t>(r)][m];
      const SimMethod method = config.methods[m];
      try {
        if (method == SimMethod::naive_logistic) {
          const LogisticFit fit = naive_logistic(sim.data, config.pipeline.em.glm);
          out.est.assign(fit.coefficients.data(), fit.coefficients.data() + n_beta);
          Eigen::MatrixXd labeled(sim.data.n_labeled(), 5);
          const Eigen::MatrixXd design = sim.data.risk_design();
          Eigen::Index row = 0;
          for (auto i : sim.data.labeled_rows()) labeled.row(row++) = design.row(i);
          const Eigen::VectorXd se = logistic_standard_errors(fit.coefficients, labeled);
          out.se.assign(se.data(), se.data() + n_beta);
        } else {
          PipelineConfig pc = config.pipeline;
          pc.threads = inner_threads;
          if (config.auto_sign) pc.sign = default_sign_policy(setting.name);
          const bool baseline = method == SimMethod::parametric_baseline;
          pc.seed = derive_seed(setting.seed ^ (baseline ? kBaselineTag : kBootstrapTag),
                                static_cast<std::uint64_t>(r));
          if (baseline && config.baseline_bootstrap >= 0)
            pc.bootstrap = config.baseline_bootstrap;
          const TubeResult res =
              baseline ? parametric_baseline(sim.data, pc) : run_tube(sim.data, pc);
          const auto& beta = res.risk.combined.beta;
          out.est.assign(beta.data(), beta.data() + n_beta);
          out.est.push_back(res.fit.roc.auc);
          if (res.risk.has_covariance) {
            const auto& se = res.risk.combined.se;
            out.se.assign(se.data(), se.data() + n_beta);
            out.se.push_back(res.auc_se);
          }
          out.lambda1 = res.fit.stage1.params.lambda;
          out.lambda2 = res.fit.stage2.params.lambda;
          out.v1 = res.stage1_violations();
          out.v2 = res.stage2_violations();
        }
        out.ok = true;
      } catch (const InternalConsistencyError&) {
        throw;
      } catch (const Error& e) {
        spdlog::warn("replication {} method {} failed: {}", r, to_string(method), e.what());
      }
    }
  });

  std::vector<double> truth(oracle.beta_bar.data(), oracle.beta_bar.data() + n_beta);
  truth.push_back(oracle.auc_bar);
  for (std::size_t m = 0; m < n_methods; ++m) {
    MethodReport mr;
    mr.method = config.methods[m];
    Aggregator agg(n_par);
    for (int r = 0; r < reps; ++r) {
      const Outcome& out = outcomes[static_cast<std::size_t>(r)][m];
      if (!out.ok) {
        ++mr.failures;
        mr.estimates.emplace_back();
        mr.standard_errors.emplace_back();
        continue;
      }
      mr.estimates.push_back(out.est);
      mr.standard_errors.push_back(out.se);
      for (std::size_t k = 0; k < out.est.size(); ++k) {
        const double err = out.est[k] - truth[k];
        agg.sum[k] += out.est[k];
        agg.sum_sq[k] += err * err;
        ++agg.count[k];
        if (k < out.se.size()) {
          ++agg.ci_count[k];
          if (std::abs(err) <= 1.959963984540054 * out.se[k]) agg.hits[k] += 1.0;
        }
      }
    }
    for (std::size_t k = 0; k < n_par; ++k) {
      if (agg.count[k] == 0) continue;
      MetricRow row;
      row.parameter = report.parameters[k];
      row.truth = truth[k];
      row.count = agg.count[k];
      row.mean = agg.sum[k] / agg.count[k];
      row.bias = row.mean - truth[k];
      row.mse = agg.sum_sq[k] / agg.count[k];
      row.percent_bias = row.mse > 0.0 ? std::min(1.0, std::abs(row.bias) / std::sqrt(row.mse)) : 0.0;
      if (agg.ci_count[k] > 0) row.cp = agg.hits[k] / agg.ci_count[k];
      mr.rows.push_back(row);
    }
    if (mr.method == SimMethod::tube) {
      Eigen::MatrixXd l1 = Eigen::MatrixXd::Zero(2, 3), l2 = Eigen::MatrixXd::Zero(2, 3);
      int used = 0;
      for (int r = 0; r < reps; ++r) {
        const Outcome& out = outcomes[static_cast<std::size_t>(r)][m];
        if (!out.ok) continue;
        l1 += out.lambda1;
        l2 += out.lambda2;
        ++used;
      }
      if (used > 0) {
        report.mean_lambda_stage1 = l1 / used;
        report.mean_lambda_stage2 = l2 / used;
      }
    }
    report.methods.push_back(std::move(mr));
  }
  for (const auto& row : outcomes) {
    for (const auto& out : row) {
      report.stage1_violations += out.v1;
      report.stage2_violations += out.v2;
    }
  }
  return report;
}

}  // namespace tube
