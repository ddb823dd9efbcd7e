#include "tube/serialize.hpp"

#include "tube/error.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>

namespace tube {

namespace {

Json vec(const Eigen::VectorXd& v) {
  Json a = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Json vec(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

Json mat(const Eigen::MatrixXd& m) {
  Json a = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) a.push_back(vec(Eigen::VectorXd(m.row(r).transpose())));
  return a;
}

Eigen::VectorXd read_vec(const Json& j, const std::string& what) {
  if (!j.is_array()) throw SchemaError(what + ": expected an array of numbers");
  Eigen::VectorXd v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw SchemaError(what + ": expected an array of numbers");
    v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  }
  return v;
}

void check_keys(const Json& j, std::initializer_list<const char*> allowed,
                const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected a JSON object");
  const std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& item : j.items()) {
    if (!ok.count(item.key()))
      throw ConfigError(where + ": unknown key '" + item.key() + "'");
  }
}

template <class T>
void get(const Json& j, const char* key, T& out, const std::string& where) {
  const auto it = j.find(key);
  if (it == j.end()) return;
  try {
    out = it->template get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError(where + "." + key + ": wrong type");
  }
}

std::string get_string(const Json& j, const char* key, const std::string& fallback,
                       const std::string& where) {
  std::string value = fallback;
  get(j, key, value, where);
  return value;
}

ScoreKind score_kind_from(const std::string& s) {
  if (s == "additive") return ScoreKind::additive;
  if (s == "pca") return ScoreKind::pca;
  throw ConfigError("unknown score kind '" + s + "'");
}
const char* name_of(ScoreKind k) { return k == ScoreKind::pca ? "pca" : "additive"; }

ScoreGrid score_grid_from(const std::string& s) {
  if (s == "quantile") return ScoreGrid::quantile;
  if (s == "observed") return ScoreGrid::observed;
  throw ConfigError("unknown score grid '" + s + "'");
}
const char* name_of(ScoreGrid g) { return g == ScoreGrid::observed ? "observed" : "quantile"; }

OmegaMode omega_from(const std::string& s) {
  if (s == "per_coefficient") return OmegaMode::per_coefficient;
  if (s == "scalar") return OmegaMode::scalar;
  throw ConfigError("unknown omega mode '" + s + "'");
}
const char* name_of(OmegaMode m) { return m == OmegaMode::scalar ? "scalar" : "per_coefficient"; }

SignPolicyKind sign_kind_from(const std::string& s) {
  if (s == "anchor") return SignPolicyKind::anchor;
  if (s == "prevalence") return SignPolicyKind::prevalence;
  if (s == "none") return SignPolicyKind::none;
  throw ConfigError("unknown sign policy '" + s + "'");
}
const char* name_of(SignPolicyKind k) {
  switch (k) {
    case SignPolicyKind::anchor: return "anchor";
    case SignPolicyKind::prevalence: return "prevalence";
    case SignPolicyKind::none: return "none";
  }
  return "anchor";
}

EmAcceleration acceleration_from(const std::string& s) {
  if (s == "none") return EmAcceleration::none;
  if (s == "squarem") return EmAcceleration::squarem;
  throw ConfigError("unknown EM acceleration '" + s + "'");
}
const char* name_of(EmAcceleration a) { return a == EmAcceleration::none ? "none" : "squarem"; }

Json trace_json(const EmTrace& t) {
  Json j;
  j["iterations"] = t.iterations;
  j["converged"] = t.converged;
  j["objective"] = t.objective_per_iteration.empty() ? 0.0 : t.objective_per_iteration.back();
  j["accepted_extrapolations"] = t.accepted_extrapolations;
  j["ascent_violations"] = t.ascent_violations;
  return j;
}

Json step_json(const StepSurvival& s) {
  Json j;
  j["points"] = vec(s.jump_points);
  j["sizes"] = vec(s.jump_sizes);
  return j;
}

Json term_json(const BasisTerm& t) {
  Json j;
  Json cols = Json::array();
  for (auto c : t.columns) cols.push_back(c);
  j["columns"] = cols;
  j["spec"] = to_json(t.spec);
  return j;
}

BasisTerm term_from_json(const Json& j) {
  check_keys(j, {"columns", "spec"}, "g_terms[]");
  BasisTerm t;
  std::vector<long> cols;
  get(j, "columns", cols, "g_terms[]");
  for (long c : cols) t.columns.push_back(static_cast<Eigen::Index>(c));
  if (j.contains("spec")) t.spec = basis_spec_from_json(j.at("spec"));
  return t;
}

std::string csv_cell(const std::optional<double>& v) {
  return v ? format_double(*v) : std::string();
}

}  // namespace

std::string format_double(double value) {
  if (std::isnan(value)) return "nan";
  if (std::isinf(value)) return value > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, value);
  return std::string(buf, res.ptr);
}

RunConfig default_run_config(const std::string& command) {
  RunConfig c;
  if (command == "simulate") {
    c.pipeline.bases.default_df = 4;
    c.pipeline.bootstrap = 100;
  }
  return c;
}

void propagate_shared(RunConfig& c) {
  c.pipeline.seed = c.seed;
  c.pipeline.threads = c.threads;
  c.setting.seed = c.seed;
  c.simulation.pipeline = c.pipeline;
  c.simulation.threads = c.threads;
}

void validate_run_config(const RunConfig& c) {
  if (c.threads < 0) throw ConfigError("threads must be >= 0");
  const auto& em = c.pipeline.em;
  if (!(em.relative_tolerance > 0.0) || !(em.ascent_slack >= 0.0))
    throw ConfigError("EM tolerances must be positive");
  if (em.max_iterations < 1) throw ConfigError("em.max_iterations must be >= 1");
  if (!(em.glm.gradient_tol > 0.0) || !(em.glm.relative_objective_tol > 0.0))
    throw ConfigError("GLM tolerances must be positive");
  if (c.pipeline.bootstrap == 1 || c.pipeline.bootstrap < 0)
    throw ConfigError("bootstrap must be 0 (off) or >= 2");
  if (c.simulation.baseline_bootstrap == 1)
    throw ConfigError("baseline_bootstrap must be 0, >= 2, or negative (inherit)");
  if (!(c.pipeline.max_bootstrap_failure >= 0.0 && c.pipeline.max_bootstrap_failure <= 1.0))
    throw ConfigError("max_bootstrap_failure must lie in [0, 1]");
  if (c.simulation.oracle_draws < 1000000) throw ConfigError("oracle_draws must be >= 1e6");
}

Json to_json(const BasisSpec& spec) {
  Json j;
  j["kind"] = to_string(spec.kind);
  j["df"] = spec.df;
  if (!spec.knots.empty()) j["knots"] = vec(spec.knots);
  if (!spec.levels.empty()) j["levels"] = vec(spec.levels);
  if (!spec.combos.empty()) j["combos"] = spec.combos;
  return j;
}

BasisSpec basis_spec_from_json(const Json& j) {
  const std::string where = "basis spec";
  check_keys(j, {"kind", "df", "knots", "levels", "combos"}, where);
  BasisSpec s;
  s.kind = basis_kind_from_string(get_string(j, "kind", "linear", where));
  get(j, "df", s.df, where);
  get(j, "knots", s.knots, where);
  get(j, "levels", s.levels, where);
  get(j, "combos", s.combos, where);
  if (!std::is_sorted(s.knots.begin(), s.knots.end()))
    throw ConfigError("basis spec: knots must be sorted");
  return s;
}

Json to_json(const BasisConfig& c) {
  Json j;
  j["default_df"] = c.default_df;
  j["force_linear"] = c.force_linear;
  Json xs = Json::array();
  for (const auto& s : c.x_specs) xs.push_back(to_json(s));
  j["x_specs"] = xs;
  Json gs = Json::array();
  for (const auto& t : c.g_terms) gs.push_back(term_json(t));
  j["g_terms"] = gs;
  return j;
}

void merge(BasisConfig& c, const Json& j) {
  const std::string where = "pipeline.bases";
  check_keys(j, {"default_df", "force_linear", "x_specs", "g_terms"}, where);
  get(j, "default_df", c.default_df, where);
  get(j, "force_linear", c.force_linear, where);
  if (j.contains("x_specs")) {
    c.x_specs.clear();
    for (const auto& s : j.at("x_specs")) c.x_specs.push_back(basis_spec_from_json(s));
  }
  if (j.contains("g_terms")) {
    c.g_terms.clear();
    for (const auto& t : j.at("g_terms")) c.g_terms.push_back(term_from_json(t));
  }
}

Json to_json(const EmConfig& c) {
  Json j;
  j["relative_tolerance"] = c.relative_tolerance;
  j["max_iterations"] = c.max_iterations;
  j["ascent_slack"] = c.ascent_slack;
  j["strict_ascent"] = c.strict_ascent;
  j["acceleration"] = name_of(c.acceleration);
  j["glm"] = {{"gradient_tol", c.glm.gradient_tol},
              {"relative_objective_tol", c.glm.relative_objective_tol},
              {"max_iterations", c.glm.max_iterations},
              {"ridge", c.glm.ridge},
              {"max_halvings", c.glm.max_halvings},
              {"separation_norm", c.glm.separation_norm}};
  j["frozen"] = {{"xi", c.frozen.xi},
                 {"zeta", c.frozen.zeta},
                 {"lambda", c.frozen.lambda},
                 {"mu", c.frozen.mu}};
  return j;
}

void merge(EmConfig& c, const Json& j) {
  const std::string where = "pipeline.em";
  check_keys(j, {"relative_tolerance", "max_iterations", "ascent_slack", "strict_ascent", "acceleration",
                 "glm", "frozen"},
             where);
  get(j, "relative_tolerance", c.relative_tolerance, where);
  get(j, "max_iterations", c.max_iterations, where);
  get(j, "ascent_slack", c.ascent_slack, where);
  get(j, "strict_ascent", c.strict_ascent, where);
  c.acceleration = acceleration_from(get_string(j, "acceleration", name_of(c.acceleration), where));
  if (j.contains("glm")) {
    const Json& g = j.at("glm");
    const std::string w = where + ".glm";
    check_keys(g, {"gradient_tol", "relative_objective_tol", "max_iterations", "ridge",
                   "max_halvings", "separation_norm"},
               w);
    get(g, "gradient_tol", c.glm.gradient_tol, w);
    get(g, "relative_objective_tol", c.glm.relative_objective_tol, w);
    get(g, "max_iterations", c.glm.max_iterations, w);
    get(g, "ridge", c.glm.ridge, w);
    get(g, "max_halvings", c.glm.max_halvings, w);
    get(g, "separation_norm", c.glm.separation_norm, w);
  }
  if (j.contains("frozen")) {
    const Json& f = j.at("frozen");
    const std::string w = where + ".frozen";
    check_keys(f, {"xi", "zeta", "lambda", "mu"}, w);
    get(f, "xi", c.frozen.xi, w);
    get(f, "zeta", c.frozen.zeta, w);
    get(f, "lambda", c.frozen.lambda, w);
    get(f, "mu", c.frozen.mu, w);
  }
}

Json to_json(const PipelineConfig& c) {
  Json j;
  j["bases"] = to_json(c.bases);
  j["em"] = to_json(c.em);
  j["score"] = name_of(c.score);
  j["score_grid"] = name_of(c.score_grid);
  j["score_bins"] = c.score_bins;
  j["sign"] = {{"kind", name_of(c.sign.kind)},
               {"anchor", c.sign.anchor},
               {"anchor_sign", c.sign.anchor_sign}};
  j["omega"] = name_of(c.omega);
  j["bootstrap"] = c.bootstrap;
  j["max_bootstrap_failure"] = c.max_bootstrap_failure;
  return j;
}

void merge(PipelineConfig& c, const Json& j) {
  const std::string where = "pipeline";
  check_keys(j, {"bases", "em", "score", "score_grid", "score_bins", "sign", "omega",
                 "bootstrap", "max_bootstrap_failure"},
             where);
  if (j.contains("bases")) merge(c.bases, j.at("bases"));
  if (j.contains("em")) merge(c.em, j.at("em"));
  c.score = score_kind_from(get_string(j, "score", name_of(c.score), where));
  c.score_grid = score_grid_from(get_string(j, "score_grid", name_of(c.score_grid), where));
  get(j, "score_bins", c.score_bins, where);
  if (j.contains("sign")) {
    const Json& s = j.at("sign");
    const std::string w = where + ".sign";
    check_keys(s, {"kind", "anchor", "anchor_sign"}, w);
    c.sign.kind = sign_kind_from(get_string(s, "kind", name_of(c.sign.kind), w));
    get(s, "anchor", c.sign.anchor, w);
    get(s, "anchor_sign", c.sign.anchor_sign, w);
  }
  c.omega = omega_from(get_string(j, "omega", name_of(c.omega), where));
  get(j, "bootstrap", c.bootstrap, where);
  get(j, "max_bootstrap_failure", c.max_bootstrap_failure, where);
}

Json to_json(const RunConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["threads"] = c.threads;
  j["out"] = c.out;
  Json data;
  data["path"] = c.data;
  data["y_star_column"] = c.schema.y_star_column;
  data["x_columns"] = c.schema.x_columns;
  data["g_columns"] = c.schema.g_columns;
  data["k"] = c.schema.k ? Json(*c.schema.k) : Json(nullptr);
  j["data"] = data;
  j["pipeline"] = to_json(c.pipeline);
  Json sim;
  sim["setting"] = std::string(1, c.setting.name);
  sim["N"] = c.setting.N;
  sim["n"] = c.setting.n;
  sim["replications"] = c.setting.replications;
  Json methods = Json::array();
  for (auto m : c.simulation.methods) methods.push_back(to_string(m));
  sim["methods"] = methods;
  sim["baseline_bootstrap"] = c.simulation.baseline_bootstrap;
  sim["oracle_draws"] = c.simulation.oracle_draws;
  sim["auto_sign"] = c.simulation.auto_sign;
  sim["write_data"] = c.write_data;
  j["simulation"] = sim;
  j["validate"] = {{"bundle", c.bundle}, {"reference", c.reference}};
  return j;
}

void merge(RunConfig& c, const Json& j) {
  const std::string where = "config";
  check_keys(j, {"seed", "threads", "out", "data", "pipeline", "simulation", "validate"}, where);
  get(j, "seed", c.seed, where);
  get(j, "threads", c.threads, where);
  get(j, "out", c.out, where);
  if (j.contains("data")) {
    const Json& d = j.at("data");
    const std::string w = "data";
    check_keys(d, {"path", "y_star_column", "x_columns", "g_columns", "k"}, w);
    get(d, "path", c.data, w);
    get(d, "y_star_column", c.schema.y_star_column, w);
    get(d, "x_columns", c.schema.x_columns, w);
    get(d, "g_columns", c.schema.g_columns, w);
    if (d.contains("k")) {
      if (d.at("k").is_null()) c.schema.k.reset();
      else {
        int k = 0;
        get(d, "k", k, w);
        c.schema.k = k;
      }
    }
  }
  if (j.contains("pipeline")) merge(c.pipeline, j.at("pipeline"));
  if (j.contains("simulation")) {
    const Json& s = j.at("simulation");
    const std::string w = "simulation";
    check_keys(s, {"setting", "N", "n", "replications", "methods", "baseline_bootstrap",
                   "oracle_draws", "auto_sign", "write_data"},
               w);
    const std::string name = get_string(s, "setting", std::string(1, c.setting.name), w);
    if (name.size() != 1) throw ConfigError("simulation.setting must be one of a, b, c");
    c.setting.name = name[0];
    get(s, "N", c.setting.N, w);
    get(s, "n", c.setting.n, w);
    get(s, "replications", c.setting.replications, w);
    if (s.contains("methods")) {
      std::vector<std::string> names;
      get(s, "methods", names, w);
      c.simulation.methods.clear();
      for (const auto& m : names) c.simulation.methods.push_back(sim_method_from_string(m));
    }
    get(s, "baseline_bootstrap", c.simulation.baseline_bootstrap, w);
    get(s, "oracle_draws", c.simulation.oracle_draws, w);
    get(s, "auto_sign", c.simulation.auto_sign, w);
    get(s, "write_data", c.write_data, w);
  }
  if (j.contains("validate")) {
    const Json& v = j.at("validate");
    check_keys(v, {"bundle", "reference"}, "validate");
    get(v, "bundle", c.bundle, "validate");
    get(v, "reference", c.reference, "validate");
  }
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError("'" + path + "': " + e.what());
  }
}

void write_text_file(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ConfigError("cannot write '" + path + "'");
  out << text;
  if (!out) throw ConfigError("write failed for '" + path + "'");
}

namespace {

Json risk_json(const RiskModel& r) {
  Json j;
  j["beta0"] = vec(r.beta0);
  j["beta1"] = vec(r.beta1);
  j["omega"] = vec(r.combined.omega);
  j["beta"] = vec(r.combined.beta);
  if (r.has_covariance) {
    j["se0"] = vec(r.se0);
    j["se1"] = vec(r.se1);
    j["se"] = vec(r.combined.se);
  }
  j["sign_flipped0"] = r.sign_flipped0;
  j["sign_flipped1"] = r.sign_flipped1;
  return j;
}

}  // namespace

Json parameter_bundle(const TubeResult& result, const Dataset& data,
                      const PipelineConfig& config) {
  const PipelineFit& fit = result.fit;
  Json j;
  j["schema"] = kBundleSchema;
  j["version"] = kBundleVersion;
  j["dataset"] = {{"N", data.size()},
                  {"n", data.n_labeled()},
                  {"K", data.K()},
                  {"p", data.p()},
                  {"q", data.q()},
                  {"x_names", data.x_names},
                  {"g_names", data.g_names}};
  Json xs = Json::array();
  for (const auto& s : fit.bases.x_specs) xs.push_back(to_json(s));
  Json gs = Json::array();
  for (const auto& t : fit.bases.g_terms) gs.push_back(term_json(t));
  j["bases"] = {{"x_specs", xs}, {"g_terms", gs}};
  j["score"] = {{"kind", name_of(config.score)},
                {"grid", name_of(config.score_grid)},
                {"bins", resolved_score_bins(config, data.size())}};
  const StageOneParams& p1 = fit.stage1.params;
  Json zeta = Json::array();
  for (const auto& z : p1.zeta) zeta.push_back(vec(z));
  j["stage1"] = {{"xi", vec(p1.xi)},
                 {"zeta", zeta},
                 {"lambda", mat(p1.lambda)},
                 {"mu", p1.mu},
                 {"trace", trace_json(fit.stage1.trace)}};
  const StageTwoParams& p2 = fit.stage2.params;
  j["stage2"] = {{"s0", step_json(p2.s0)},
                 {"s1", step_json(p2.s1)},
                 {"lambda", mat(p2.lambda)},
                 {"xi", vec(p2.xi)},
                 {"trace", trace_json(fit.stage2.trace)}};
  j["risk"] = risk_json(result.risk);
  j["auc"] = fit.roc.auc;
  return j;
}

Json risk_report(const TubeResult& result) {
  const PipelineFit& fit = result.fit;
  Json j;
  j["schema"] = "tube.report";
  j["version"] = kBundleVersion;
  j["converged"] = fit.converged();
  j["stage1"] = {{"lambda", mat(fit.stage1.params.lambda)},
                 {"mu", fit.stage1.params.mu},
                 {"trace", trace_json(fit.stage1.trace)}};
  j["stage2"] = {{"lambda", mat(fit.stage2.params.lambda)},
                 {"trace", trace_json(fit.stage2.trace)}};
  Json risk = risk_json(result.risk);
  if (result.risk.has_covariance) risk["cov_joint"] = mat(result.risk.cov_joint);
  Json degenerate = Json::array();
  for (auto k : result.risk.combined.degenerate) degenerate.push_back(k);
  risk["omega_degenerate"] = degenerate;
  j["risk"] = risk;
  j["roc"] = {{"auc", fit.roc.auc}, {"fpr", vec(fit.roc.fpr)}, {"tpr", vec(fit.roc.tpr)}};
  if (result.bootstrap) {
    j["roc"]["auc_se"] = result.auc_se;
    j["bootstrap"] = {{"requested", result.bootstrap->requested},
                      {"failed", result.bootstrap->failed},
                      {"nonconverged", result.bootstrap->nonconverged}};
  }
  j["ascent_violations"] = {{"stage1", result.stage1_violations()},
                            {"stage2", result.stage2_violations()}};
  return j;
}

std::string roc_csv(const RocCurve& roc) {
  std::string out = "fpr,tpr\n";
  for (std::size_t k = 0; k < roc.fpr.size(); ++k)
    out += format_double(roc.fpr[k]) + "," + format_double(roc.tpr[k]) + "\n";
  return out;
}

BundleRisk read_bundle_risk(const Json& bundle) {
  if (!bundle.is_object() || bundle.value("schema", std::string()) != kBundleSchema)
    throw SchemaError("not a parameter bundle (schema != tube.bundle)");
  if (bundle.value("version", 0) != kBundleVersion)
    throw SchemaError("unsupported bundle version");
  BundleRisk out;
  try {
    out.q = bundle.at("dataset").at("q").get<int>();
    out.beta = read_vec(bundle.at("risk").at("beta"), "risk.beta");
  } catch (const nlohmann::json::exception& e) {
    throw SchemaError(std::string("malformed bundle: ") + e.what());
  }
  if (out.beta.size() != out.q + 1) throw SchemaError("risk.beta length != q + 1");
  return out;
}

Json to_json(const ReferenceMetrics& m) {
  Json j;
  j["mspe"] = m.mspe;
  j["deviance_delta"] = m.has_deviance ? Json(m.deviance_delta) : Json(nullptr);
  j["class_cor"] = m.class_cor;
  j["class_cor_defined"] = m.class_cor_defined;
  j["false_class"] = m.false_class;
  return j;
}

Json to_json(const SimReport& r) {
  Json j;
  j["schema"] = "tube.simulation";
  j["version"] = kBundleVersion;
  j["setting"] = {{"name", std::string(1, r.setting.name)},
                  {"N", r.setting.N},
                  {"n", r.setting.n},
                  {"seed", r.setting.seed},
                  {"replications", r.setting.replications}};
  j["oracle"] = {{"beta_bar", vec(r.oracle.beta_bar)},
                 {"auc_bar", r.oracle.auc_bar},
                 {"lambda_bar", mat(r.oracle.lambda_bar)},
                 {"prevalence", r.oracle.prevalence},
                 {"draws", r.oracle.draws}};
  j["parameters"] = r.parameters;
  Json methods = Json::array();
  for (const auto& m : r.methods) {
    Json mj;
    mj["method"] = to_string(m.method);
    if (m.method == SimMethod::parametric_baseline) mj["label"] = "approximate baseline";
    mj["failures"] = m.failures;
    Json rows = Json::array();
    for (const auto& row : m.rows) {
      rows.push_back({{"parameter", row.parameter},
                      {"truth", row.truth},
                      {"mean", row.mean},
                      {"bias", row.bias},
                      {"mse", row.mse},
                      {"percent_bias", row.percent_bias},
                      {"cp", row.cp ? Json(*row.cp) : Json(nullptr)},
                      {"count", row.count}});
    }
    mj["rows"] = rows;
    Json est = Json::array(), se = Json::array();
    for (const auto& e : m.estimates) est.push_back(vec(e));
    for (const auto& s : m.standard_errors) se.push_back(vec(s));
    mj["estimates"] = est;
    mj["standard_errors"] = se;
    methods.push_back(mj);
  }
  j["methods"] = methods;
  if (r.mean_lambda_stage1.size() > 0) {
    j["mean_lambda_stage1"] = mat(r.mean_lambda_stage1);
    j["mean_lambda_stage2"] = mat(r.mean_lambda_stage2);
  }
  j["ascent_violations"] = {{"stage1", r.stage1_violations}, {"stage2", r.stage2_violations}};
  return j;
}

std::string sim_report_csv(const SimReport& r) {
  std::string out = "method,parameter,truth,mean,bias,mse,percent_bias,cp,count\n";
  for (const auto& m : r.methods) {
    for (const auto& row : m.rows) {
      out += std::string(to_string(m.method)) + "," + row.parameter + "," +
             format_double(row.truth) + "," + format_double(row.mean) + "," +
             format_double(row.bias) + "," + format_double(row.mse) + "," +
             format_double(row.percent_bias) + "," + csv_cell(row.cp) + "," +
             std::to_string(row.count) + "\n";
    }
  }
  return out;
}

std::string sim_table_csv(const SimReport& r, const std::string& metric) {
  if (metric != "bias" && metric != "mse" && metric != "percent_bias" && metric != "cp")
    throw ConfigError("unknown metric '" + metric + "'");
  std::string out = "method";
  for (const auto& p : r.parameters) out += "," + p;
  out += "\n";
  for (const auto& m : r.methods) {
    out += to_string(m.method);
    for (const auto& p : r.parameters) {
      out += ",";
      for (const auto& row : m.rows) {
        if (row.parameter != p) continue;
        if (metric == "bias") out += format_double(row.bias);
        else if (metric == "mse") out += format_double(row.mse);
        else if (metric == "percent_bias") out += format_double(row.percent_bias);
        else out += csv_cell(row.cp);
      }
    }
    out += "\n";
  }
  return out;
}

std::string sim_summary_table(const SimReport& r) {
  std::ostringstream os;
  os << "setting " << r.setting.name << "  N=" << r.setting.N << "  n=" << r.setting.n
     << "  replications=" << r.setting.replications << "\n";
  os << std::left << std::setw(22) << "method" << std::setw(8) << "param" << std::right
     << std::setw(10) << "truth" << std::setw(10) << "bias" << std::setw(10) << "mse"
     << std::setw(8) << "cp" << "\n";
  os << std::fixed;
  for (const auto& m : r.methods) {
    for (const auto& row : m.rows) {
      os << std::left << std::setw(22) << to_string(m.method) << std::setw(8) << row.parameter
         << std::right << std::setprecision(3) << std::setw(10) << row.truth
         << std::setw(10) << row.bias << std::setw(10) << row.mse;
      if (row.cp) os << std::setw(8) << *row.cp;
      else os << std::setw(8) << "-";
      os << "\n";
    }
    if (m.failures > 0) os << "  (" << m.failures << " failed replications)\n";
  }
  return os.str();
}

}  // namespace tube
