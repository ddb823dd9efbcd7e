#pragma once

#include "tube/basis.hpp"
#include "tube/data.hpp"
#include "tube/em.hpp"
#include "tube/pipeline.hpp"
#include "tube/simlab.hpp"

#include <nlohmann/json.hpp>

#include <optional>
#include <string>

namespace tube {

using Json = nlohmann::ordered_json;

inline constexpr const char* kBundleSchema = "tube.bundle";
inline constexpr int kBundleVersion = 1;

/// Everything a command needs. Readers overlay a JSON document onto an
/// existing value, so absent keys keep their defaults; unknown keys are
/// rejected.
struct RunConfig {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string data;
  CsvSchema schema;
  PipelineConfig pipeline;
  SimSetting setting;
  SimConfig simulation;
  /// simulate: also write the first replication's cohort as CSV.
  bool write_data = false;
  /// validate: the two bundles to compare.
  std::string bundle;
  std::string reference;
  std::string out = "tube_out";
};

/// Defaults for a subcommand: `simulate` uses df = 4 splines and B = 100.
RunConfig default_run_config(const std::string& command);

/// Copies seed/threads into the nested pipeline, setting and simulation
/// blocks.
void propagate_shared(RunConfig& config);

/// Throws ConfigError on out-of-range values.
void validate_run_config(const RunConfig& config);

Json to_json(const BasisSpec& spec);
BasisSpec basis_spec_from_json(const Json& j);
Json to_json(const BasisConfig& config);
Json to_json(const EmConfig& config);
Json to_json(const PipelineConfig& config);
Json to_json(const RunConfig& config);

void merge(BasisConfig& config, const Json& j);
void merge(EmConfig& config, const Json& j);
void merge(PipelineConfig& config, const Json& j);
void merge(RunConfig& config, const Json& j);

Json read_json_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& text);

/// Versioned parameter bundle: resolved bases, Stage I and II parameters,
/// the risk model. Everything `validate` needs to score new records.
Json parameter_bundle(const TubeResult& result, const Dataset& data,
                      const PipelineConfig& config);

/// Risk model, ROC curve and convergence flags.
Json risk_report(const TubeResult& result);
std::string roc_csv(const RocCurve& roc);

struct BundleRisk {
  int q = 0;
  Eigen::VectorXd beta;  // combined coefficients on (1, G)
};
/// Throws SchemaError for a wrong schema name, version or shape.
BundleRisk read_bundle_risk(const Json& bundle);

Json to_json(const ReferenceMetrics& metrics);

Json to_json(const SimReport& report);
/// Long form: one row per (method, parameter) with truth, mean, bias, mse,
/// percent_bias, cp, count.
std::string sim_report_csv(const SimReport& report);
/// Wide form of one metric (bias, mse, percent_bias, cp): a row per method,
/// a column per parameter; empty cells where the metric is unavailable.
std::string sim_table_csv(const SimReport& report, const std::string& metric);
/// Fixed-width summary (method x parameter bias / MSE / CP).
std::string sim_summary_table(const SimReport& report);

/// Shortest round-trip decimal form of a double ("nan", "inf" spelled out).
std::string format_double(double value);

}  // namespace tube
