// tube: fit, simulate, validate, roc.
//
// Exit status: 0 success, 1 error, 2 finished with warnings (an EM stage or
// GLM hit its cap, bootstrap replicates were dropped, a method failed in
// some replication).

#include "tube/error.hpp"
#include "tube/pipeline.hpp"
#include "tube/serialize.hpp"
#include "tube/simlab.hpp"

#include <CLI11.hpp>
#include <spdlog/spdlog.h>

#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

namespace {

using namespace tube;

struct Flags {
  std::string config;
  std::string data;
  std::string out;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<int> reps;
  std::string setting;
  std::optional<long> n_labeled;
  std::optional<int> bootstrap;
  std::string bundle;
  std::string reference;
  bool print_config = false;
};

RunConfig resolve(const std::string& command, const Flags& f) {
  RunConfig c = default_run_config(command);
  if (!f.config.empty()) merge(c, read_json_file(f.config));
  if (!f.data.empty()) c.data = f.data;
  if (!f.out.empty()) c.out = f.out;
  if (f.seed) c.seed = *f.seed;
  if (f.threads) c.threads = *f.threads;
  if (f.reps) c.setting.replications = *f.reps;
  if (!f.setting.empty()) {
    if (f.setting.size() != 1) throw ConfigError("--setting must be one of a, b, c");
    c.setting.name = f.setting[0];
  }
  if (f.n_labeled) c.setting.n = *f.n_labeled;
  if (f.bootstrap) c.pipeline.bootstrap = *f.bootstrap;
  if (!f.bundle.empty()) c.bundle = f.bundle;
  if (!f.reference.empty()) c.reference = f.reference;
  propagate_shared(c);
  validate_run_config(c);
  return c;
}

std::filesystem::path out_dir(const RunConfig& c) {
  std::filesystem::path dir(c.out);
  std::filesystem::create_directories(dir);
  return dir;
}

Dataset load_data(const RunConfig& c) {
  if (c.data.empty()) throw ConfigError("no data file given (--data)");
  Dataset data = load_csv(c.data, c.schema);
  return data;
}

int cmd_fit(const RunConfig& c) {
  const Dataset data = load_data(c);
  const TubeResult result = run_tube(data, c.pipeline);
  const auto dir = out_dir(c);
  write_text_file((dir / "bundle.json").string(),
                  parameter_bundle(result, data, c.pipeline).dump(2) + "\n");
  write_text_file((dir / "report.json").string(), risk_report(result).dump(2) + "\n");
  write_text_file((dir / "roc.csv").string(), roc_csv(result.fit.roc));
  bool warn = !result.fit.converged();
  if (result.bootstrap) warn = warn || result.bootstrap->failed > 0 || result.bootstrap->nonconverged > 0;
  if (!result.risk.combined.degenerate.empty()) warn = true;
  std::cout << "AUC " << format_double(result.fit.roc.auc) << "\nbeta";
  for (Eigen::Index k = 0; k < result.risk.combined.beta.size(); ++k)
    std::cout << " " << format_double(result.risk.combined.beta[k]);
  std::cout << "\n";
  return warn ? 2 : 0;
}

int cmd_simulate(const RunConfig& c) {
  const SimReport report = run_replications(c.setting, c.simulation);
  const auto dir = out_dir(c);
  write_text_file((dir / "simulation.json").string(), to_json(report).dump(2) + "\n");
  write_text_file((dir / "simulation.csv").string(), sim_report_csv(report));
  for (const char* metric : {"bias", "mse", "percent_bias", "cp"})
    write_text_file((dir / (std::string(metric) + ".csv")).string(), sim_table_csv(report, metric));
  if (c.write_data && c.setting.replications > 0) {
    SimSetting first = c.setting;
    first.seed = derive_seed(c.setting.seed, 0);
    const SimulatedData sim = generate_dataset(first);
    write_csv((dir / "replication0.csv").string(), sim.data, {{"y_true", sim.y_true}});
  }
  std::cout << sim_summary_table(report);
  bool warn = false;
  for (const auto& m : report.methods) warn = warn || m.failures > 0;
  return warn ? 2 : 0;
}

BundleRisk load_bundle(const std::string& path, const char* what) {
  if (path.empty()) throw ConfigError(std::string("no ") + what + " bundle given");
  return read_bundle_risk(read_json_file(path));
}

int cmd_validate(const RunConfig& c) {
  const BundleRisk hat = load_bundle(c.bundle, "fitted (--bundle)");
  const BundleRisk ref = load_bundle(c.reference.empty() ? c.bundle : c.reference,
                                     "reference (--reference)");
  if (hat.q != ref.q) throw SchemaError("bundles have different numbers of risk factors");
  const Dataset data = load_data(c);
  if (data.q() != hat.q) throw SchemaError("evaluation data do not match the bundle's risk factors");
  std::optional<Eigen::VectorXd> labels;
  if (data.n_labeled() == data.size()) {
    labels = Eigen::VectorXd(data.size());
    for (Eigen::Index i = 0; i < data.size(); ++i) (*labels)[i] = *data.y_star(i);
  }
  const ReferenceMetrics m = eval_against_reference(hat.beta, ref.beta, data.risk_design(), labels);
  const std::string text = to_json(m).dump(2) + "\n";
  write_text_file((out_dir(c) / "validation.json").string(), text);
  std::cout << text;
  return m.class_cor_defined ? 0 : 2;
}

int cmd_roc(const RunConfig& c) {
  RocCurve roc;
  bool warn = false;
  if (!c.bundle.empty()) {
    const Json b = read_json_file(c.bundle);
    read_bundle_risk(b);
    auto step = [&](const char* key) {
      StepSurvival s;
      try {
        s.jump_points = b.at("stage2").at(key).at("points").get<std::vector<double>>();
        s.jump_sizes = b.at("stage2").at(key).at("sizes").get<std::vector<double>>();
      } catch (const nlohmann::json::exception& e) {
        throw SchemaError(std::string("malformed bundle: ") + e.what());
      }
      return s;
    };
    StepSurvival s0 = step("s0"), s1 = step("s1");
    if (b.at("risk").value("sign_flipped1", false)) std::swap(s0, s1);
    roc = roc_curve(s0, s1);
  } else {
    const Dataset data = load_data(c);
    const PipelineFit fit = fit_pipeline(data, c.pipeline);
    roc = fit.roc;
    warn = !fit.converged();
  }
  const auto dir = out_dir(c);
  write_text_file((dir / "roc.csv").string(), roc_csv(roc));
  Json j;
  j["auc"] = roc.auc;
  write_text_file((dir / "roc.json").string(), j.dump(2) + "\n");
  std::cout << "AUC " << format_double(roc.auc) << "\n";
  return warn ? 2 : 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"TUBE: three-stage unsupervised risk estimation from noisy labels"};
  app.require_subcommand(1);
  Flags f;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--config", f.config, "JSON configuration file");
    sub->add_option("--data", f.data, "CSV cohort file");
    sub->add_option("--out", f.out, "Output directory");
    sub->add_option("--seed", f.seed, "Master random seed");
    sub->add_option("--threads", f.threads, "Worker threads (0 = all cores)");
    sub->add_option("--reps", f.reps, "Simulation replications");
    sub->add_option("--setting", f.setting, "Simulation setting: a, b or c");
    sub->add_option("--n-labeled", f.n_labeled, "Labeled records per simulated cohort");
    sub->add_option("--bootstrap", f.bootstrap, "Bootstrap replicates (0 disables)");
    sub->add_option("--bundle", f.bundle, "Parameter bundle (validate, roc)");
    sub->add_option("--reference", f.reference, "Reference parameter bundle (validate)");
    sub->add_flag("--print-config", f.print_config, "Print the resolved config and exit");
  };
  CLI::App* fit = app.add_subcommand("fit", "Run Stages I-III and the bootstrap on a cohort");
  CLI::App* sim = app.add_subcommand("simulate", "Replication study on a simulated setting");
  CLI::App* val = app.add_subcommand("validate", "Compare a fitted bundle with a reference");
  CLI::App* roc = app.add_subcommand("roc", "ROC curve from a bundle or a fresh fit");
  for (CLI::App* sub : {fit, sim, val, roc}) add_common(sub);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }
  const std::string command = app.get_subcommands().front()->get_name();
  spdlog::set_level(spdlog::level::warn);
  try {
    const RunConfig config = resolve(command, f);
    if (f.print_config) {
      std::cout << to_json(config).dump(2) << "\n";
      return 0;
    }
    if (command == "fit") return cmd_fit(config);
    if (command == "simulate") return cmd_simulate(config);
    if (command == "validate") return cmd_validate(config);
    return cmd_roc(config);
  } catch (const std::exception& e) {
    std::cerr << "tube " << command << ": " << e.what() << "\n";
    return 1;
  }
}
