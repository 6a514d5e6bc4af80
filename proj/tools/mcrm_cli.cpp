// Command-line front end: simulate, fit, rho, predict, validate, density,
// pdcheck, summarize.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure.

#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"
#include "mcrm/config.hpp"
#include "mcrm/csv.hpp"
#include "mcrm/errors.hpp"
#include "mcrm/parallel.hpp"
#include "mcrm/portfolio_io.hpp"
#include "mcrm/reports.hpp"
#include "mcrm/simulate.hpp"

namespace {

using namespace mcrm;

std::vector<double> parse_list(const std::string& text, const std::string& flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(csv::parse_double(item, flag));
  return out;
}

ThetaParams parse_theta(const std::string& text) {
  auto v = parse_list(text, "--theta");
  if (v.size() != 4) throw ValidationError("--theta: expected 4 comma-separated values, got " + std::to_string(v.size()));
  return ThetaParams{v[0], v[1], v[2], v[3]};
}

std::string fmt12(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.12g", v);
  return buf;
}

RunConfig config_or_default(const std::string& path) { return path.empty() ? RunConfig{} : load_config(path); }

// --- simulate -------------------------------------------------------------

struct SimulateArgs {
  int scenario = 0;
  std::string theta;
  int policies = 500;
  int years = 3;
  double lambda0 = 2.0;
  double xi0 = std::exp(8.0);
  double nu_sev = 0.7;
  std::string copula = "gaussian";
  double nu_df = 4.0;
  std::uint64_t seed = 1;
  std::string policy_years, claims, latents;
};

void write_latents(const std::string& path, const SimulatedPortfolio& sim) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  csv::write_row(out, {"policy_id", "year", "component", "index", "value"});
  for (std::size_t i = 0; i < sim.policies.size(); ++i) {
    const auto& pol = sim.policies[i];
    const auto& lat = sim.latents[i];
    csv::write_row(out, {pol.id, "", "factor", "", csv::format_double(lat.factor)});
    for (std::size_t t = 0; t < pol.years.size(); ++t) {
      const std::string year = std::to_string(pol.years[t].year);
      csv::write_row(out, {pol.id, year, "year_factor", "", csv::format_double(lat.year_factor[t])});
      csv::write_row(out, {pol.id, year, "count", "", csv::format_double(lat.count_latent[t])});
      for (std::size_t j = 0; j < lat.severity_latent[t].size(); ++j)
        csv::write_row(out, {pol.id, year, "severity", std::to_string(j + 1),
                             csv::format_double(lat.severity_latent[t][j])});
    }
  }
}

int run_simulate(const SimulateArgs& a, CLI::App& cmd) {
  ScenarioConfig cfg;
  if (a.scenario != 0) {
    cfg = scenario_preset(a.scenario);
  } else if (a.theta.empty()) {
    throw ValidationError("simulate: one of --scenario or --theta is required");
  }
  if (!a.theta.empty()) cfg.theta = parse_theta(a.theta);
  auto given = [&](const char* flag) { return cmd.count(flag) > 0 || a.scenario == 0; };
  if (given("--policies")) cfg.policies = a.policies;
  if (given("--years")) cfg.years = a.years;
  if (given("--lambda0")) cfg.lambda0 = a.lambda0;
  if (given("--xi0")) cfg.xi0 = a.xi0;
  if (given("--nu-sev")) cfg.nu_sev = a.nu_sev;
  cfg.family = copula_family_from_string(a.copula);
  cfg.nu_df = a.nu_df;
  cfg.seed = a.seed;
  cfg.keep_latents = !a.latents.empty();
  if (!(cfg.lambda0 > 0) || !(cfg.xi0 > 0) || !(cfg.nu_sev > 0))
    throw ValidationError("simulate: --lambda0, --xi0 and --nu-sev must be positive");
  if (cfg.family == CopulaFamily::t && !(cfg.nu_df > 0)) throw ValidationError("simulate: --nu-df must be positive");

  const SimulatedPortfolio sim = simulate_portfolio(cfg);
  Portfolio portfolio;
  portfolio.policies = sim.policies;
  write_portfolio(portfolio, a.policy_years, a.claims);
  if (!a.latents.empty()) write_latents(a.latents, sim);
  long claims = 0;
  for (const auto& p : sim.policies)
    for (const auto& y : p.years) claims += y.count;
  std::cout << "simulated " << cfg.policies << " policies x " << cfg.years << " years, " << claims << " claims\n";
  return 0;
}

// --- fit / rho --------------------------------------------------------------

struct FitArgs {
  std::string policy_years, claims, config, variant, out = "fit";
};

int run_fit(const FitArgs& a) {
  RunConfig cfg = config_or_default(a.config);
  if (!a.variant.empty()) cfg.variant = nested_variant_from_string(a.variant);
  const Portfolio portfolio = load_portfolio(a.policy_years, a.claims, cfg);
  FitOptions opts = cfg.fit_options();
  std::optional<ModelParams> init;
  if (cfg.copula == CopulaFamily::t) {
    ModelParams p;
    p.marginal = fit_independent_marginals(portfolio);
    p.copula.family = CopulaFamily::t;
    p.copula.nu_df = cfg.nu_df;
    init = p;
  }
  const FitResult res = fit(portfolio, init, opts);
  write_text_file(a.out + "_report.txt", fit_report_text(res));
  write_text_file(a.out + "_report.csv", fit_report_csv(res));
  write_text_file(a.out + "_params.json", params_to_json(params_from_fit(res, portfolio)));
  std::cout << fit_report_text(res);
  return res.converged ? 0 : 2;
}

struct RhoArgs {
  std::string params, out = "rho";
};

int run_rho(const RhoArgs& a) {
  const ParamsFile p = load_params(a.params);
  if (!p.theta_covariance) throw ValidationError(a.params + ": no theta_covariance (run `fit` first)");
  const RhoInference rho = rho_inference(p.params.copula.theta, *p.theta_covariance);
  write_text_file(a.out + "_report.txt", rho_report_text(rho));
  write_text_file(a.out + "_report.csv", rho_report_csv(rho));
  std::cout << rho_report_text(rho);
  return 0;
}

// --- predict / validate -----------------------------------------------------

struct PredictArgs {
  std::string policy_years, claims, config, params, out = "predictions.csv";
  int samples = 0;
  std::uint64_t seed = 0;
  bool seed_given = false;
};

void check_terms(const Portfolio& portfolio, const ParamsFile& p) {
  if (portfolio.frequency_terms != p.frequency_terms || portfolio.severity_terms != p.severity_terms)
    throw ValidationError("params terms do not match the design built from the config");
}

int run_predict(const PredictArgs& a) {
  RunConfig cfg = config_or_default(a.config);
  const ParamsFile p = load_params(a.params);
  const Portfolio portfolio = load_portfolio(a.policy_years, a.claims, cfg);
  check_terms(portfolio, p);
  // Hold-out year: the configured test year, else each policy's last year.
  std::vector<PolicyHistory> holdout;
  for (const auto& pol : portfolio.policies) {
    if (pol.years.empty()) continue;
    if (cfg.test_year) {
      for (const auto& y : pol.years)
        if (y.year == *cfg.test_year) holdout.push_back(PolicyHistory{pol.id, {y}});
    } else {
      holdout.push_back(PolicyHistory{pol.id, {pol.years.back()}});
    }
  }
  if (holdout.empty()) throw ValidationError("predict: no policy-years to predict");
  PredictionConfig pc = cfg.prediction_config();
  if (a.samples > 0) pc.samples = a.samples;
  if (a.seed_given) pc.seed = a.seed;
  pc.variant = p.variant;
  const auto predicted = predict_portfolio(holdout, p.params, pc, cfg.threads);
  const auto actual = observed_losses(holdout);
  write_text_file(a.out, predictions_csv(holdout, actual, predicted));
  const ValidationReport r = validation_metrics(actual, predicted);
  std::cout << "predicted " << holdout.size() << " policies -> " << a.out << "\n";
  std::cout << "RMSE " << csv::format_fixed(r.rmse, 3) << "  MAE " << csv::format_fixed(r.mae, 3) << "  Gini "
            << csv::format_fixed(r.gini, 3) << "\n";
  return 0;
}

struct ValidateArgs {
  std::string policy_years, claims, config, variants = "full,nested1,nested2,nested3", out = "validation";
  int samples = 0;
};

int run_validate(const ValidateArgs& a) {
  RunConfig cfg = config_or_default(a.config);
  const Portfolio portfolio = load_portfolio(a.policy_years, a.claims, cfg);
  const YearSplit split = split_by_year(portfolio, cfg.test_year);
  std::vector<NestedVariant> variants;
  std::stringstream ss(a.variants);
  std::string item;
  while (std::getline(ss, item, ',')) variants.push_back(nested_variant_from_string(item));
  if (variants.empty()) throw ValidationError("--variants: empty list");
  PredictionConfig pc = cfg.prediction_config();
  if (a.samples > 0) pc.samples = a.samples;
  const auto results = nested_model_comparison(split.train, split.holdout, variants, cfg.fit_options(), pc);
  std::vector<ValidationReport> reports;
  const auto actual = observed_losses(split.holdout);
  for (const auto& r : results) {
    reports.push_back(r.report);
    write_text_file(a.out + "_predictions_" + r.report.model + ".csv",
                    predictions_csv(split.holdout, actual, r.predicted));
    write_text_file(a.out + "_fit_" + r.report.model + ".txt", fit_report_text(r.fit));
  }
  const std::string text = "Hold-out year " + std::to_string(split.test_year) + ", " +
                           std::to_string(split.holdout.size()) + " policies\n\n" + validation_report_text(reports);
  write_text_file(a.out + "_metrics.txt", text);
  write_text_file(a.out + "_metrics.csv", validation_report_csv(reports));
  std::cout << text;
  return 0;
}

// --- density ------------------------------------------------------------------

struct DensityArgs {
  std::string history, params;
};

int run_density(const DensityArgs& a) {
  const ParamsFile p = load_params(a.params);
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(a.history));
  } catch (const nlohmann::json::parse_error& e) {
    throw ValidationError(a.history + ": " + e.what());
  }
  PolicyHistory h;
  std::vector<YearMargins> margins;
  const auto& m = p.params.marginal;
  try {
    if (!j.contains("years") || !j["years"].is_array() || j["years"].empty())
      throw ValidationError(a.history + ": 'years' must be a non-empty array");
    h.id = j.value("policy_id", std::string("history"));
    int next_year = 1;
    for (const auto& y : j["years"]) {
      YearClaim yc;
      yc.year = y.value("year", next_year);
      next_year = yc.year + 1;
      yc.severities = y.value("severities", std::vector<double>{});
      yc.count = y.value("count", static_cast<int>(yc.severities.size()));
      if (yc.count < 0 || static_cast<std::size_t>(yc.count) != yc.severities.size())
        throw ValidationError(a.history + ": year " + std::to_string(yc.year) + " count does not match its severities");
      for (double v : yc.severities)
        if (!(v > 0)) throw ValidationError(a.history + ": severities must be positive");
      YearMargins mg;
      if (y.contains("lambda") || y.contains("xi")) {
        mg.lambda = y.at("lambda").get<double>();
        mg.xi = y.at("xi").get<double>();
      } else {
        auto x = y.value("x", std::vector<double>{1.0});
        auto w = y.value("w", std::vector<double>{1.0});
        if (x.size() != static_cast<std::size_t>(m.beta.size()) || w.size() != static_cast<std::size_t>(m.gamma.size()))
          throw ValidationError(a.history + ": covariate rows x/w do not match the parameter dimensions");
        yc.freq_covariates = Eigen::Map<Eigen::VectorXd>(x.data(), static_cast<Eigen::Index>(x.size()));
        yc.sev_covariates = Eigen::Map<Eigen::VectorXd>(w.data(), static_cast<Eigen::Index>(w.size()));
        mg.lambda = std::exp(yc.freq_covariates.dot(m.beta));
        mg.xi = std::exp(yc.sev_covariates.dot(m.gamma));
      }
      if (!(mg.lambda > 0) || !(mg.xi > 0)) throw ValidationError(a.history + ": lambda and xi must be positive");
      h.years.push_back(std::move(yc));
      margins.push_back(mg);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(a.history + ": " + e.what());
  }
  const MarginalLaws laws = MarginalLaws::from(m);
  const LogDensity ld = log_density(h, margins, laws, p.params.copula, DensityQuadrature{});
  double indep = 0.0;
  for (std::size_t t = 0; t < h.years.size(); ++t) {
    indep += laws.count->log_pmf(h.years[t].count, margins[t].lambda);
    for (double v : h.years[t].severities) indep += laws.severity->log_pdf(v, margins[t].xi, m.nu_sev);
  }
  std::cout << "log_density " << fmt12(ld.value) << "\n";
  std::cout << "density " << fmt12(std::exp(ld.value)) << "\n";
  std::cout << "independence_log_density " << fmt12(indep) << "\n";
  std::cout << "independence_density " << fmt12(std::exp(indep)) << "\n";
  if (ld.diagnostics.clamped_counts || ld.diagnostics.clamped_severities || ld.diagnostics.floored_variances)
    std::cout << "clamped_counts " << ld.diagnostics.clamped_counts << " clamped_severities "
              << ld.diagnostics.clamped_severities << " floored_variances " << ld.diagnostics.floored_variances
              << "\n";
  if (!std::isfinite(ld.value)) throw NumericalError("density is not finite for this history");
  return 0;
}

// --- pdcheck -------------------------------------------------------------------

struct PdcheckArgs {
  std::string theta, n;
};

int run_pdcheck(const PdcheckArgs& a) {
  const ThetaParams theta = parse_theta(a.theta);
  std::vector<int> n;
  for (double v : parse_list(a.n, "--n")) {
    if (v < 0 || v != std::floor(v)) throw ValidationError("--n: counts must be non-negative integers");
    n.push_back(static_cast<int>(v));
  }
  if (n.empty()) throw ValidationError("--n: at least one year is required");
  const bool admissible = check_admissible(theta);
  const RhoParams rho = rho_from_theta(theta);
  const StructuredCorrMatrix sigma = build_sigma(n, rho);
  const bool pd = is_positive_definite(sigma);
  std::cout << "admissible=" << (admissible ? "true" : "false") << "\n";
  std::cout << "rho=" << fmt12(rho.rho1) << "," << fmt12(rho.rho2) << "," << fmt12(rho.rho3) << ","
            << fmt12(rho.rho4) << "," << fmt12(rho.rho5) << "\n";
  std::cout << "dim=" << sigma.dim() << "\n";
  std::cout << "PD=" << (pd ? "true" : "false") << "\n";
  if (admissible) {
    const StructuredCorrMatrix aug = build_augmented_sigma(n, rho, theta.theta1, theta.theta2);
    std::cout << "augmented_PD=" << (is_positive_definite(aug) ? "true" : "false") << "\n";
    std::cout << "schur_max_off_block=" << csv::format_double(max_off_block_entry(schur_complement_factor(aug)))
              << "\n";
  }
  return 0;
}

// --- summarize -----------------------------------------------------------------

struct SummarizeArgs {
  std::string policy_years, claims, config, out;
};

int run_summarize(const SummarizeArgs& a) {
  const RunConfig cfg = config_or_default(a.config);
  const Portfolio portfolio = load_portfolio(a.policy_years, a.claims, cfg);
  const PortfolioSummary s = summarize(portfolio);
  const std::string text = summary_text(s);
  if (!a.out.empty()) {
    write_text_file(a.out + "_summary.txt", text);
    write_text_file(a.out + "_summary.csv", summary_csv(s));
  }
  std::cout << text;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-year frequency-severity factor copula model: simulation, estimation, validation"};
  app.require_subcommand(1);
  app.footer("Environment: MCRM_THREADS sets the default worker count.\n"
             "Exit codes: 0 success, 1 invalid input, 2 numerical failure.\n\n"
             "Configuration file (JSON) with all defaults:\n" +
             config_to_json(RunConfig{}));

  SimulateArgs sim;
  auto* c_sim = app.add_subcommand("simulate", "Simulate a portfolio from a scenario or explicit loadings");
  c_sim->add_option("--scenario", sim.scenario, "Preset 1..8 (I=500, tau=3, lambda0=2, xi0=exp(8), nu=0.7)")
      ->check(CLI::Range(1, 8));
  c_sim->add_option("--theta", sim.theta, "Loadings theta1,theta2,theta3,theta4");
  c_sim->add_option("--policies", sim.policies, "Number of policies")->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--years", sim.years, "Years per policy")->capture_default_str()->check(CLI::PositiveNumber);
  c_sim->add_option("--lambda0", sim.lambda0, "Poisson mean")->capture_default_str();
  c_sim->add_option("--xi0", sim.xi0, "Weibull mean")->capture_default_str();
  c_sim->add_option("--nu-sev", sim.nu_sev, "Weibull shape")->capture_default_str();
  c_sim->add_option("--copula", sim.copula, "gaussian | t")->capture_default_str();
  c_sim->add_option("--nu-df", sim.nu_df, "Degrees of freedom of the t copula")->capture_default_str();
  c_sim->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
  c_sim->add_option("--policy-years", sim.policy_years, "Output policy-year CSV")->required();
  c_sim->add_option("--claims", sim.claims, "Output claims CSV")->required();
  c_sim->add_option("--latents", sim.latents, "Optional output CSV of the latent normals");

  FitArgs fa;
  auto* c_fit = app.add_subcommand("fit", "Maximum-likelihood fit; writes <out>_report.txt/.csv and <out>_params.json");
  c_fit->add_option("--policy-years", fa.policy_years, "Policy-year CSV")->required();
  c_fit->add_option("--claims", fa.claims, "Claims CSV")->required();
  c_fit->add_option("--config", fa.config, "Run configuration (JSON)");
  c_fit->add_option("--variant", fa.variant, "full | nested1 | nested2 | nested3 (overrides the config)");
  c_fit->add_option("--out", fa.out, "Output prefix")->capture_default_str();

  RhoArgs ra;
  auto* c_rho = app.add_subcommand("rho", "Delta-method inference for rho; writes <out>_report.txt/.csv");
  c_rho->add_option("--params", ra.params, "Parameter file written by `fit`")->required();
  c_rho->add_option("--out", ra.out, "Output prefix")->capture_default_str();

  PredictArgs pa;
  auto* c_pred = app.add_subcommand("predict", "Monte-Carlo aggregate-loss predictions for each policy's hold-out year");
  c_pred->add_option("--policy-years", pa.policy_years, "Policy-year CSV")->required();
  c_pred->add_option("--claims", pa.claims, "Claims CSV")->required();
  c_pred->add_option("--params", pa.params, "Parameter file")->required();
  c_pred->add_option("--config", pa.config, "Run configuration (JSON)");
  c_pred->add_option("--samples", pa.samples, "Monte-Carlo samples per policy (overrides the config)");
  auto* seed_opt = c_pred->add_option("--seed", pa.seed, "Random seed (overrides the config)");
  c_pred->add_option("--out", pa.out, "Output CSV (policy_id,actual,predicted)")->capture_default_str();

  ValidateArgs va;
  auto* c_val = app.add_subcommand("validate", "Fit nested models on the training years and score the hold-out year");
  c_val->add_option("--policy-years", va.policy_years, "Policy-year CSV")->required();
  c_val->add_option("--claims", va.claims, "Claims CSV")->required();
  c_val->add_option("--config", va.config, "Run configuration (JSON)");
  c_val->add_option("--variants", va.variants, "Comma-separated model variants")->capture_default_str();
  c_val->add_option("--samples", va.samples, "Monte-Carlo samples per policy (overrides the config)");
  c_val->add_option("--out", va.out, "Output prefix")->capture_default_str();

  DensityArgs da;
  auto* c_den = app.add_subcommand("density", "Joint density of one policy history");
  c_den->add_option("--history", da.history,
                    "JSON {\"years\": [{\"count\", \"severities\", \"lambda\", \"xi\"} or {..., \"x\", \"w\"}]}")
      ->required();
  c_den->add_option("--params", da.params, "Parameter file")->required();

  PdcheckArgs pd;
  auto* c_pd = app.add_subcommand("pdcheck", "Derived correlations and positive definiteness of the structured matrix");
  c_pd->add_option("--theta", pd.theta, "theta1,theta2,theta3,theta4")->required();
  c_pd->add_option("--n", pd.n, "Yearly claim counts n1,...,n_tau")->required();

  SummarizeArgs sa;
  auto* c_sum = app.add_subcommand("summarize", "Observations by frequency and year; average severity by frequency and year");
  c_sum->add_option("--policy-years", sa.policy_years, "Policy-year CSV")->required();
  c_sum->add_option("--claims", sa.claims, "Claims CSV")->required();
  c_sum->add_option("--config", sa.config, "Run configuration (JSON)");
  c_sum->add_option("--out", sa.out, "Optional output prefix for <out>_summary.txt/.csv");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    std::cerr << "usage error: " << e.what() << "\n";
    return 1;
  }

  try {
    if (c_sim->parsed()) return run_simulate(sim, *c_sim);
    if (c_fit->parsed()) return run_fit(fa);
    if (c_rho->parsed()) return run_rho(ra);
    if (c_pred->parsed()) {
      pa.seed_given = seed_opt->count() > 0;
      return run_predict(pa);
    }
    if (c_val->parsed()) return run_validate(va);
    if (c_den->parsed()) return run_density(da);
    if (c_pd->parsed()) return run_pdcheck(pd);
    if (c_sum->parsed()) return run_summarize(sa);
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  } catch (const std::invalid_argument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "numerical error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
