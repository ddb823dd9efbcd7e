#include "fixtures.hpp"
#include "tube/error.hpp"
#include "tube/serialize.hpp"

#include <doctest.h>

using namespace tube;

TEST_CASE("config json round trip") {
  for (const char* cmd : {"fit", "simulate", "validate", "roc"}) {
    RunConfig c = default_run_config(cmd);
    c.pipeline.score = ScoreKind::pca;
    c.pipeline.em.frozen.lambda = true;
    c.pipeline.bases.x_specs.push_back(BasisSpec{BasisKind::natural_spline, 5, {}, {}, {}});
    const Json j = to_json(c);
    RunConfig d = default_run_config(cmd);
    merge(d, j);
    CHECK(to_json(d).dump() == j.dump());
  }
}

TEST_CASE("config overlay and errors") {
  RunConfig c = default_run_config("fit");
  merge(c, Json::parse(R"({"pipeline": {"bootstrap": 7}})"));
  CHECK(c.pipeline.bootstrap == 7);
  CHECK(c.pipeline.em.max_iterations == EmConfig{}.max_iterations);
  CHECK_THROWS_AS(merge(c, Json::parse(R"({"pipline": {}})")), ConfigError);
  CHECK_THROWS_AS(merge(c, Json::parse(R"({"pipeline": {"score": "median"}})")), ConfigError);
  RunConfig bad = default_run_config("fit");
  bad.pipeline.bootstrap = -1;
  CHECK_THROWS_AS(validate_run_config(bad), ConfigError);
  CHECK(default_run_config("simulate").pipeline.bootstrap == 100);
  CHECK(default_run_config("simulate").pipeline.bases.default_df == 4);
}

TEST_CASE("bundle round trip") {
  const auto sim = fixture::small_cohort(1200, 120, 5);
  PipelineConfig pc;
  pc.bases.default_df = 4;
  pc.bootstrap = 0;
  const TubeResult r = run_tube(sim.data, pc);
  const Json b = parameter_bundle(r, sim.data, pc);
  const BundleRisk back = read_bundle_risk(Json::parse(b.dump()));
  CHECK(back.q == 4);
  CHECK(back.beta == r.risk.combined.beta);
  Json wrong = b;
  wrong["schema"] = "other";
  CHECK_THROWS_AS(read_bundle_risk(wrong), SchemaError);
  wrong = b;
  wrong["version"] = kBundleVersion + 1;
  CHECK_THROWS_AS(read_bundle_risk(wrong), SchemaError);
  const Json rep = risk_report(r);
  CHECK(rep.contains("ascent_violations"));
  CHECK(rep["ascent_violations"]["stage1"].get<long>() == r.stage1_violations());
}

TEST_CASE("number formatting") {
  CHECK(format_double(0.1) == "0.1");
  CHECK(format_double(-4.6) == "-4.6");
  CHECK(format_double(std::nan("")) == "nan");
  CHECK(std::stod(format_double(1.0 / 3.0)) == 1.0 / 3.0);
}
