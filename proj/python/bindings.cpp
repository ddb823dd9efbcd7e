#include "tube/error.hpp"
#include "tube/glm.hpp"
#include "tube/pipeline.hpp"
#include "tube/serialize.hpp"
#include "tube/simlab.hpp"

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <cmath>
#include <limits>

namespace py = pybind11;
using namespace tube;

namespace {

// NaN marks an unreviewed record on the Python side.
std::vector<std::optional<double>> labels_from(const Eigen::VectorXd& y_star) {
  std::vector<std::optional<double>> out(static_cast<std::size_t>(y_star.size()));
  for (Eigen::Index i = 0; i < y_star.size(); ++i)
    if (!std::isnan(y_star[i])) out[static_cast<std::size_t>(i)] = y_star[i];
  return out;
}

Eigen::VectorXd labels_to(const Dataset& d) {
  Eigen::VectorXd out(d.size());
  for (Eigen::Index i = 0; i < d.size(); ++i)
    out[i] = d.labeled(i) ? *d.y_star(i) : std::numeric_limits<double>::quiet_NaN();
  return out;
}

PipelineConfig pipeline_config(const std::string& config_json, int bootstrap, std::uint64_t seed,
                               int threads) {
  PipelineConfig pc;
  if (!config_json.empty()) merge(pc, Json::parse(config_json));
  if (bootstrap >= 0) pc.bootstrap = bootstrap;
  pc.seed = seed;
  pc.threads = threads;
  return pc;
}

py::dict fit(const Eigen::MatrixXd& x, const Eigen::MatrixXd& g, const Eigen::VectorXd& y_star,
             const std::string& config_json, int bootstrap, std::uint64_t seed, int threads) {
  const Dataset data(x, g, labels_from(y_star));
  const PipelineConfig pc = pipeline_config(config_json, bootstrap, seed, threads);
  TubeResult r;
  {
    py::gil_scoped_release release;
    r = run_tube(data, pc);
  }
  py::dict out;
  out["beta"] = r.risk.combined.beta;
  out["beta0"] = r.risk.beta0;
  out["beta1"] = r.risk.beta1;
  out["omega"] = r.risk.combined.omega;
  out["se"] = r.risk.combined.se;
  out["auc"] = r.fit.roc.auc;
  out["fpr"] = r.fit.roc.fpr;
  out["tpr"] = r.fit.roc.tpr;
  out["lambda_stage1"] = r.fit.stage1.params.lambda;
  out["lambda_stage2"] = r.fit.stage2.params.lambda;
  out["imputations"] = r.fit.stage2.imputations.all;
  out["scores"] = r.fit.raw_scores;
  out["converged"] = r.fit.converged();
  out["stage1_violations"] = r.stage1_violations();
  out["stage2_violations"] = r.stage2_violations();
  out["bundle"] = parameter_bundle(r, data, pc).dump();
  return out;
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "Three-stage unsupervised risk estimation from noisy labels";

  py::register_exception<Error>(m, "TubeError", PyExc_RuntimeError);

  m.def("expit", &expit, py::arg("w"));
  m.def("logit", &logit, py::arg("p"));

  m.def(
      "fit_fractional_logistic",
      [](const Eigen::VectorXd& y, const Eigen::MatrixXd& design, const Eigen::VectorXd& weights) {
        return fit_fractional_logistic(y, design, weights).coefficients;
      },
      py::arg("y"), py::arg("design"), py::arg("weights") = Eigen::VectorXd(),
      "Maximum-likelihood logistic coefficients for outcomes in [0, 1].");

  m.def("score_auc", &score_auc, py::arg("scores"), py::arg("weights"),
        "Weighted concordance: class-1 weights w, class-0 weights 1 - w, ties count 1/2.");

  m.def(
      "generate_dataset",
      [](char setting, long n_all, long n, std::uint64_t seed) {
        SimSetting s;
        s.name = setting;
        s.N = n_all;
        s.n = n;
        s.seed = seed;
        const SimulatedData sim = generate_dataset(s);
        py::dict out;
        out["x"] = sim.data.x();
        out["g"] = sim.data.g();
        out["y_star"] = labels_to(sim.data);
        out["y_true"] = sim.y_true;
        return out;
      },
      py::arg("setting") = 'a', py::arg("N") = 10000, py::arg("n") = 500, py::arg("seed") = 1,
      "Simulated cohort; y_star is NaN on unreviewed rows, y_true is the hidden status.");

  m.def(
      "population_oracle",
      [](char setting, long draws) {
        SimSetting s;
        s.name = setting;
        const PopulationOracle o = population_oracle(s, draws);
        py::dict out;
        out["beta"] = o.beta_bar;
        out["auc"] = o.auc_bar;
        out["lambda"] = o.lambda_bar;
        out["prevalence"] = o.prevalence;
        return out;
      },
      py::arg("setting") = 'a', py::arg("draws") = 1000000);

  m.def("fit", &fit, py::arg("x"), py::arg("g"), py::arg("y_star"), py::arg("config") = "",
        py::arg("bootstrap") = -1, py::arg("seed") = 1, py::arg("threads") = 1,
        "Stages I-III (plus the bootstrap unless bootstrap = 0). `config` is the JSON "
        "`pipeline` block accepted by the command-line tool.");
}
