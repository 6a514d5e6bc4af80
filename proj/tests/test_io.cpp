#include <cmath>
#include <sstream>
#include <string>

#include "doctest.h"
#include "mcrm/config.hpp"
#include "mcrm/csv.hpp"
#include "mcrm/errors.hpp"
#include "mcrm/portfolio_io.hpp"
#include "mcrm/reports.hpp"
#include "mcrm/simulate.hpp"

using namespace mcrm;

namespace {

Portfolio load(const std::string& policy_years, const std::string& claims, const RunConfig& cfg = {}) {
  std::istringstream py(policy_years), cl(claims);
  return load_portfolio(py, cl, cfg);
}

std::string load_error(const std::string& policy_years, const std::string& claims, const RunConfig& cfg = {}) {
  try {
    load(policy_years, claims, cfg);
  } catch (const ValidationError& e) {
    return e.what();
  }
  return "";
}

bool contains(const std::string& text, const std::string& part) { return text.find(part) != std::string::npos; }

}  // namespace

TEST_CASE("csv quoting and number formatting") {
  std::ostringstream out;
  csv::write_row(out, {"plain", "with,comma", "with \"quote\"", ""});
  CHECK(out.str() == "plain,\"with,comma\",\"with \"\"quote\"\"\",\r\n");
  std::istringstream in("a,b\r\n\"x,1\",\"say \"\"hi\"\"\"\r\n2,\"multi\nline\"\n");
  const csv::Table t = csv::read(in);
  CHECK(t.header == std::vector<std::string>{"a", "b"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[0] == std::vector<std::string>{"x,1", "say \"hi\""});
  CHECK(t.rows[1][1] == "multi\nline");
  CHECK(t.lines == std::vector<std::size_t>{2, 3});
  CHECK(t.column("b") == 1);
  CHECK(t.column("c") == -1);
  for (double v : {0.1, 1.0 / 3.0, 2980.9579870417283, -1e-300, 123456789.0})
    CHECK(csv::parse_double(csv::format_double(v), "v") == v);
  CHECK(csv::format_fixed(2.0 / 3.0, 4) == "0.6667");
  CHECK_THROWS_AS(csv::parse_double("1.5x", "amount"), ValidationError);
  CHECK_THROWS_AS(csv::parse_int("2.5", "count"), ValidationError);
}

TEST_CASE("a small portfolio loads grouped, in first-appearance order, with years sorted") {
  const std::string py = "policy_id,year,count\nB,2,0\nA,1,0\nA,2,1\nB,1,2\n";
  const std::string cl = "policy_id,year,claim_index,amount\nB,1,2,20.5\nA,2,1,7\nB,1,1,10\n";
  const Portfolio p = load(py, cl);
  REQUIRE(p.policies.size() == 2);
  CHECK(p.policies[0].id == "B");
  CHECK(p.policies[1].id == "A");
  for (const auto& pol : p.policies) {
    REQUIRE(pol.years.size() == 2);
    CHECK(pol.years[0].year == 1);
    CHECK(pol.years[1].year == 2);
  }
  CHECK(p.policies[1].years[1].severities == std::vector<double>{7.0});
  CHECK(p.policies[0].years[0].severities == std::vector<double>{10.0, 20.5});
  CHECK(p.policies[0].years[1].count == 0);
  CHECK(p.frequency_terms == std::vector<std::string>{"(Intercept)"});
  CHECK(p.policies[0].years[0].freq_covariates.size() == 1);
}

TEST_CASE("covariates and categorical levels") {
  RunConfig cfg = parse_config(R"({
    "frequency": {"covariates": ["region", "age"]},
    "severity": {"covariates": ["age"]},
    "categorical": {"region": {"levels": ["north", "south", "east"], "reference": "south"}}
  })");
  CHECK(design_terms(cfg.frequency_covariates, cfg) ==
        std::vector<std::string>{"(Intercept)", "regionnorth", "regioneast", "age"});
  const std::string py = "policy_id,year,count,region,age\nA,1,0,east,0.5\nA,2,0,south,0.75\n";
  const std::string cl = "policy_id,year,claim_index,amount\n";
  const Portfolio p = load(py, cl, cfg);
  CHECK(p.policies[0].years[0].freq_covariates == Eigen::Vector4d(1.0, 0.0, 1.0, 0.5));
  CHECK(p.policies[0].years[1].freq_covariates == Eigen::Vector4d(1.0, 0.0, 0.0, 0.75));
  CHECK(p.policies[0].years[1].sev_covariates == Eigen::Vector2d(1.0, 0.75));
  const std::string bad = "policy_id,year,count,region,age\nA,1,0,west,0.5\n";
  CHECK(contains(load_error(bad, cl, cfg), "level 'west'"));
  cfg.frequency_covariates.push_back("income");
  CHECK(contains(load_error(py, cl, cfg), "unknown column 'income'"));
}

TEST_CASE("loader diagnostics name the offending row") {
  const std::string py = "policy_id,year,count\nA,1,1\nB,1,0\n";
  const std::string header = "policy_id,year,claim_index,amount\n";
  SUBCASE("claim index beyond the count") {
    const std::string e = load_error(py, header + "A,1,1,5\nA,1,2,6\n");
    CHECK(contains(e, "(A, 1)"));
    CHECK(contains(e, "line 3"));
  }
  SUBCASE("missing claim") { CHECK(contains(load_error(py, header), "count/claims mismatch for (A, 1)")); }
  SUBCASE("orphan claim") { CHECK(contains(load_error(py, header + "A,1,1,5\nC,1,1,5\n"), "orphan claim (C, 1)")); }
  SUBCASE("duplicate policy-year") {
    CHECK(contains(load_error(py + "A,1,1\n", header + "A,1,1,5\n"), "duplicate policy-year (A, 1)"));
  }
  SUBCASE("duplicate claim") {
    CHECK(contains(load_error(py, header + "A,1,1,5\nA,1,1,5\n"), "duplicate claim (A, 1) index 1"));
  }
  SUBCASE("non-positive amount") { CHECK(contains(load_error(py, header + "A,1,1,0\n"), "amount")); }
  SUBCASE("negative count") { CHECK(contains(load_error("policy_id,year,count\nA,1,-1\n", header), "negative count")); }
  SUBCASE("unknown claims column") {
    CHECK(contains(load_error(py, "policy_id,year,claim_index,amount,note\nA,1,1,5,x\n"), "unknown column 'note'"));
  }
  SUBCASE("missing column") { CHECK(contains(load_error("policy_id,count\nA,1\n", header), "'year'")); }
}

TEST_CASE("simulate, write and load give back the same portfolio") {
  ScenarioConfig c = scenario_preset(4);
  c.policies = 200;
  c.seed = 8;
  Portfolio original;
  original.policies = simulate_portfolio(c).policies;
  std::ostringstream py, cl;
  write_portfolio(original, py, cl);
  const Portfolio back = load(py.str(), cl.str());
  REQUIRE(back.policies.size() == original.policies.size());
  for (std::size_t i = 0; i < back.policies.size(); ++i) {
    const auto& a = original.policies[i];
    const auto& b = back.policies[i];
    CHECK(a.id == b.id);
    REQUIRE(a.years.size() == b.years.size());
    for (std::size_t t = 0; t < a.years.size(); ++t) {
      CHECK(a.years[t].year == b.years[t].year);
      CHECK(a.years[t].count == b.years[t].count);
      CHECK(a.years[t].severities == b.years[t].severities);
      CHECK(a.years[t].freq_covariates == b.years[t].freq_covariates);
      CHECK(a.years[t].sev_covariates == b.years[t].sev_covariates);
    }
  }
  std::ostringstream py2, cl2;
  write_portfolio(back, py2, cl2);
  CHECK(py2.str() == py.str());
  CHECK(cl2.str() == cl.str());
}

TEST_CASE("covariate columns survive a write and load") {
  RunConfig cfg = parse_config(R"({"frequency": {"covariates": ["age"]}, "severity": {"covariates": ["age", "car"]}})");
  const std::string py = "policy_id,year,count,age,car\nA,1,1,0.25,3\nA,2,0,0.5,1.5\n";
  const std::string cl = "policy_id,year,claim_index,amount\nA,1,1,12.5\n";
  const Portfolio p = load(py, cl, cfg);
  std::ostringstream py2, cl2;
  write_portfolio(p, py2, cl2);
  const Portfolio back = load(py2.str(), cl2.str(), cfg);
  CHECK(back.policies[0].years[0].sev_covariates == p.policies[0].years[0].sev_covariates);
  CHECK(back.policies[0].years[1].freq_covariates == p.policies[0].years[1].freq_covariates);
}

TEST_CASE("configuration parsing") {
  const RunConfig d = parse_config("{}");
  CHECK(d.factor_nodes == 32);
  CHECK(d.prediction_samples == 5000);
  CHECK(d.variant == NestedVariant::full);
  const RunConfig back = parse_config(config_to_json(d));
  CHECK(config_to_json(back) == config_to_json(d));

  const RunConfig c = parse_config(R"({"copula": {"family": "t", "nu_df": 6}, "variant": "nested2",
    "quadrature": {"factor_nodes": 40, "mixing_nodes": 24}, "seed": 99, "test_year": 3,
    "prediction": {"samples": 100}})");
  CHECK(c.copula == CopulaFamily::t);
  CHECK(c.nu_df == 6.0);
  CHECK(c.fit_options().variant == NestedVariant::within_only);
  CHECK(c.quadrature().factor.nodes.size() == 40);
  CHECK(c.quadrature().mixing.nodes.size() == 24);
  CHECK(c.prediction_config().seed == 99);
  CHECK(c.prediction_config().samples == 100);
  CHECK(c.test_year == 3);
  CHECK(parse_config(config_to_json(c)).fit_options().variant == NestedVariant::within_only);

  CHECK_THROWS_AS(parse_config(R"({"sead": 1})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"seed": "one"})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"quadrature": {"factor_nodes": 1}})"), ValidationError);
  CHECK_THROWS_AS(parse_config(R"({"prediction": {"samples": 0}})"), ValidationError);
  CHECK_THROWS_AS(parse_config("{not json"), ValidationError);
}

TEST_CASE("parameter files round-trip exactly") {
  ParamsFile p;
  p.params.marginal.beta = Eigen::Vector2d(0.1234567890123, -2.5);
  p.params.marginal.gamma = Eigen::Vector2d(8.0, 1.0 / 3.0);
  p.params.marginal.nu_sev = 0.7;
  p.params.copula.theta = {0.263, 0.057, 0.409, 0.445};
  p.frequency_terms = {"(Intercept)", "urban"};
  p.severity_terms = {"(Intercept)", "urban"};
  p.variant = NestedVariant::shared_only;
  Eigen::Matrix4d cov = Eigen::Matrix4d::Identity() * 1e-3;
  cov(0, 1) = cov(1, 0) = 2e-4;
  p.theta_covariance = cov;
  p.log_likelihood = -1234.5678;
  const ParamsFile back = parse_params(params_to_json(p));
  CHECK(back.params.marginal.beta == p.params.marginal.beta);
  CHECK(back.params.marginal.gamma == p.params.marginal.gamma);
  CHECK(back.params.marginal.nu_sev == p.params.marginal.nu_sev);
  CHECK(back.params.copula.theta.as_array() == p.params.copula.theta.as_array());
  CHECK(back.frequency_terms == p.frequency_terms);
  CHECK(back.variant == p.variant);
  REQUIRE(back.theta_covariance);
  CHECK(*back.theta_covariance == cov);
  CHECK(back.log_likelihood == p.log_likelihood);
  CHECK(params_to_json(back) == params_to_json(p));

  ParamsFile bad = p;
  bad.params.copula.theta = {0.9, 0.1, 0.5, 0.1};
  CHECK_THROWS_AS(parse_params(params_to_json(bad)), ValidationError);
  bad = p;
  bad.frequency_terms = {"(Intercept)"};
  CHECK_THROWS_AS(parse_params(params_to_json(bad)), ValidationError);
}

TEST_CASE("summary totals equal the input row counts") {
  ScenarioConfig c = scenario_preset(1);
  c.policies = 150;
  c.seed = 4;
  Portfolio p;
  p.policies = simulate_portfolio(c).policies;
  std::ostringstream py, cl;
  write_portfolio(p, py, cl);
  const auto count_lines = [](const std::string& s) {
    return static_cast<long>(std::count(s.begin(), s.end(), '\n')) - 1;
  };
  const PortfolioSummary s = summarize(p);
  CHECK(s.policy_years == count_lines(py.str()));
  CHECK(s.claims == count_lines(cl.str()));
  CHECK(s.policies == 150);
  CHECK(s.years == std::vector<int>{1, 2, 3});
  long obs = 0, sev_claims = 0;
  for (const auto& row : s.observations)
    for (long v : row) obs += v;
  for (const auto& row : s.severity_claims)
    for (long v : row) sev_claims += v;
  CHECK(obs == s.policy_years);
  CHECK(sev_claims == s.claims);
  double total = 0, sev_total = 0;
  for (const auto& pol : p.policies)
    for (const auto& y : pol.years)
      for (double v : y.severities) total += v;
  for (const auto& row : s.severity_sum)
    for (double v : row) sev_total += v;
  CHECK(sev_total == doctest::Approx(total).epsilon(1e-12));
  CHECK(!summary_text(s).empty());
  CHECK(summary_csv(s).rfind("table,frequency,year,value\r\n", 0) == 0);
}

TEST_CASE("year split") {
  const std::string py = "policy_id,year,count\nA,1,0\nA,2,0\nA,3,0\nB,1,0\nB,2,0\n";
  const Portfolio p = load(py, "policy_id,year,claim_index,amount\n");
  const YearSplit last = split_by_year(p, std::nullopt);
  CHECK(last.test_year == 3);
  REQUIRE(last.holdout.size() == 1);
  CHECK(last.holdout[0].id == "A");
  CHECK(last.train.policies.size() == 2);
  const YearSplit two = split_by_year(p, 2);
  CHECK(two.holdout.size() == 2);
  for (const auto& pol : two.train.policies) CHECK(pol.years.size() == 1);
  CHECK_THROWS_AS(split_by_year(p, 1), ValidationError);
  CHECK_THROWS_AS(split_by_year(p, 7), ValidationError);
}

TEST_CASE("report formatting") {
  CHECK(format_p_value(5e-5) == "<.0001");
  CHECK(format_p_value(0.01234) == "0.0123");
  CHECK(significance_marker(0.04) == "*");
  CHECK(significance_marker(0.06).empty());
  const ValidationReport rows[2] = {{"full", 2.0, 4.0, 1.5, 30.0}, {"nested3", 3.0, 9.0, 2.5, 20.0}};
  const std::string text = validation_report_text(rows);
  CHECK(contains(text, "RMSE"));
  CHECK(contains(text, "Gini"));
  const std::string csv_text = validation_report_csv(rows);
  std::istringstream in(csv_text);
  const csv::Table t = csv::read(in);
  CHECK(t.header == std::vector<std::string>{"model", "rmse", "mse", "mae", "gini"});
  REQUIRE(t.rows.size() == 2);
  CHECK(t.rows[1][0] == "nested3");
  CHECK(csv::parse_double(t.rows[1][2], "mse") == 9.0);
}
