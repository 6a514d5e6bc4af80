#pragma once

// Maximum likelihood for the marginal regressions and the factor loadings,
// with observed-information standard errors and delta-method inference for
// the derived correlations.

#include <array>
#include <optional>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcrm/copula_density.hpp"
#include "mcrm/optimizer.hpp"

namespace mcrm {

/// Which loadings are estimated; the others are fixed at zero.
enum class NestedVariant {
  full,         // theta1..theta4
  shared_only,  // theta3 = theta4 = 0
  within_only,  // theta1 = theta2 = 0
  independent,  // all theta = 0
};

std::string to_string(NestedVariant v);
NestedVariant nested_variant_from_string(const std::string& name);
/// Free-parameter mask over (theta1, theta2, theta3, theta4).
std::array<bool, 4> free_thetas(NestedVariant v);

struct ModelParams {
  MarginalParams marginal;
  CopulaSpec copula;
};

/// Histories plus the names of the regression terms behind the covariate rows.
struct Portfolio {
  std::vector<PolicyHistory> policies;
  std::vector<std::string> frequency_terms{"(Intercept)"};
  std::vector<std::string> severity_terms{"(Intercept)"};
};

struct ParameterRow {
  std::string block;  // "frequency", "severity", "copula"
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct FitOptions {
  NestedVariant variant = NestedVariant::full;
  DensityQuadrature quadrature;
  BfgsOptions optimizer;
  /// Starting loading for every free theta.
  double theta_start = 0.1;
  /// Central-difference Hessian step, h_i = hessian_step * (1 + |p_i|).
  double hessian_step = 1e-4;
  bool compute_standard_errors = true;
  unsigned threads = 0;
};

struct FitResult {
  ModelParams estimates;
  NestedVariant variant = NestedVariant::full;
  /// Natural-scale free parameters, in the order of `table`.
  std::vector<std::string> parameter_names;
  Eigen::MatrixXd covariance;
  std::vector<ParameterRow> table;
  double log_likelihood = 0.0;
  int iterations = 0;
  int evaluations = 0;
  double gradient_norm = 0.0;
  bool converged = false;
  DensityDiagnostics diagnostics;
  std::vector<std::string> warnings;

  /// 4x4 covariance of (theta1..theta4); rows of fixed loadings are zero.
  Eigen::Matrix4d theta_covariance() const;
};

struct RhoRow {
  std::string name;
  double estimate = 0.0;
  double std_error = 0.0;
  double t_stat = 0.0;
  double p_value = 1.0;
};

struct RhoInference {
  std::array<RhoRow, 5> rows;
  Eigen::Matrix<double, 5, 5> covariance;
};

/// Sum of per-policy log densities with fixed-order reduction.
struct LikelihoodValue {
  double log_likelihood = 0.0;
  DensityDiagnostics diagnostics;
  /// Index of the first policy whose log density is not finite.
  std::optional<std::size_t> bad_policy;
};

LikelihoodValue evaluate_log_likelihood(const ModelParams& params, const std::vector<PolicyHistory>& data,
                                        const DensityQuadrature& quad, unsigned threads = 0);

/// -sum log density. Throws NumericalError naming the offending policy when a
/// term is not finite.
double neg_log_likelihood(const ModelParams& params, const std::vector<PolicyHistory>& data,
                          const DensityQuadrature& quad = {}, unsigned threads = 0);

/// Maps between natural parameters and the unconstrained optimizer vector
/// [beta, gamma, log nu_sev, free loading coordinates]. Loading pairs
/// (theta1, theta3) and (theta2, theta4) use
/// (a, b) -> (tanh a, tanh b * sqrt(1 - tanh^2 a)), which keeps both pairs
/// strictly inside the unit disc.
class ParameterMap {
 public:
  ParameterMap(NestedVariant variant, const ModelParams& base);

  Eigen::VectorXd to_unconstrained(const ModelParams& p) const;
  ModelParams from_unconstrained(const Eigen::VectorXd& u) const;

  /// Natural-scale vector [beta, gamma, nu_sev, free thetas] and its inverse.
  Eigen::VectorXd to_natural(const ModelParams& p) const;
  ModelParams from_natural(const Eigen::VectorXd& v) const;

  std::vector<std::string> natural_names(const Portfolio& portfolio) const;
  Eigen::Index size() const { return size_; }
  /// Position of theta_k (0-based k) in the natural vector, or -1 when fixed.
  int theta_position(int k) const { return theta_pos_[k]; }

 private:
  NestedVariant variant_;
  ModelParams base_;
  Eigen::Index p_ = 0, q_ = 0, size_ = 0;
  std::array<bool, 4> free_{};
  std::array<int, 4> theta_pos_{-1, -1, -1, -1};
};

/// Independent marginal fits (theta = 0): Poisson regression by Newton-Raphson
/// and Weibull regression by quasi-Newton on its closed-form likelihood.
MarginalParams fit_independent_marginals(const Portfolio& data);

FitResult fit(const Portfolio& data, const std::optional<ModelParams>& init, const FitOptions& options);

RhoInference rho_inference(const FitResult& fit);
RhoInference rho_inference(const ThetaParams& theta, const Eigen::Matrix4d& theta_covariance);

}  // namespace mcrm
