#pragma once

// Run configuration (JSON) and the fitted-parameter file exchanged between
// the `fit`, `rho`, `predict` and `density` commands.

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcrm/predict.hpp"

namespace mcrm {

struct CategoricalSpec {
  std::vector<std::string> levels;
  /// Level absorbed by the intercept; defaults to the first declared level.
  std::string reference;
};

struct RunConfig {
  /// Data columns entering x (frequency) and w (severity); an intercept is always added.
  std::vector<std::string> frequency_covariates;
  std::vector<std::string> severity_covariates;
  std::map<std::string, CategoricalSpec> categorical;
  std::string count_family = "poisson";
  std::string severity_family = "weibull";
  CopulaFamily copula = CopulaFamily::gaussian;
  double nu_df = 4.0;
  NestedVariant variant = NestedVariant::full;
  int factor_nodes = 32;
  int mixing_nodes = 32;
  BfgsOptions optimizer;
  double hessian_step = 1e-4;
  double theta_start = 0.1;
  std::uint64_t seed = 1;
  /// Hold-out year for `validate`; the last year present when absent.
  std::optional<int> test_year;
  int prediction_samples = 5000;
  unsigned threads = 0;

  DensityQuadrature quadrature() const;
  FitOptions fit_options() const;
  PredictionConfig prediction_config() const;
};

/// Parses a JSON document; unknown keys are rejected.
RunConfig parse_config(const std::string& json_text);
RunConfig load_config(const std::string& path);
/// Canonical JSON rendering of every setting (used for `--help` defaults).
std::string config_to_json(const RunConfig& config);

/// Fitted (or user-supplied) parameters with the term names they belong to.
struct ParamsFile {
  ModelParams params;
  std::vector<std::string> frequency_terms{"(Intercept)"};
  std::vector<std::string> severity_terms{"(Intercept)"};
  NestedVariant variant = NestedVariant::full;
  /// Covariance of (theta1..theta4), present for fitted parameters.
  std::optional<Eigen::Matrix4d> theta_covariance;
  std::optional<double> log_likelihood;
};

ParamsFile params_from_fit(const FitResult& fit, const Portfolio& portfolio);
std::string params_to_json(const ParamsFile& params);
ParamsFile parse_params(const std::string& json_text);
ParamsFile load_params(const std::string& path);

std::string read_text_file(const std::string& path);
void write_text_file(const std::string& path, const std::string& content);

}  // namespace mcrm
