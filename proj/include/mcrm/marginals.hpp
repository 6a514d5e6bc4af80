#pragma once

// Marginal laws for claim counts and individual claim amounts. Counts and
// severities are both parameterized by their mean; the severity law carries an
// additional shape parameter.

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace mcrm {

/// Count law parameterized by its mean.
class CountLaw {
 public:
  virtual ~CountLaw() = default;
  virtual std::string_view name() const = 0;
  virtual double log_pmf(int n, double mean) const = 0;
  /// P(N <= n); zero for n < 0.
  virtual double cdf(int n, double mean) const = 0;
  /// P(N > n); one for n < 0.
  virtual double sf(int n, double mean) const = 0;
  /// Smallest n >= 0 with cdf(n) >= u.
  virtual int inverse_cdf(double u, double mean) const = 0;
};

/// Positive continuous law parameterized by (mean, shape).
class SeverityLaw {
 public:
  virtual ~SeverityLaw() = default;
  virtual std::string_view name() const = 0;
  virtual double log_pdf(double y, double mean, double shape) const = 0;
  virtual double cdf(double y, double mean, double shape) const = 0;
  virtual double sf(double y, double mean, double shape) const = 0;
  /// Inverse cdf given the probability and its complement (either may carry
  /// the precision; the smaller one is used).
  virtual double quantile_pair(double lower, double upper, double mean, double shape) const = 0;
};

/// Registry keyed by family name. "poisson" and "weibull" are built in.
const CountLaw& count_law(std::string_view name);
const SeverityLaw& severity_law(std::string_view name);
void register_count_law(std::unique_ptr<CountLaw> law);
void register_severity_law(std::unique_ptr<SeverityLaw> law);
std::vector<std::string> registered_count_laws();
std::vector<std::string> registered_severity_laws();

// Poisson frequency.
double freq_pmf(int n, double lambda);
double freq_log_pmf(int n, double lambda);
double freq_cdf(int n, double lambda);
int freq_inverse_cdf(double u, double lambda);

// Weibull severity with mean xi and shape nu_sev; scale = xi / Gamma(1 + 1/nu_sev).
double weibull_scale(double xi, double nu_sev);
double sev_pdf(double y, double xi, double nu_sev);
double sev_log_pdf(double y, double xi, double nu_sev);
double sev_cdf(double y, double xi, double nu_sev);
double sev_quantile(double u, double xi, double nu_sev);

/// Regression coefficients for both margins. Means use a log link:
/// lambda = exp(x . beta), xi = exp(w . gamma).
struct MarginalParams {
  Eigen::VectorXd beta;
  Eigen::VectorXd gamma;
  double nu_sev = 1.0;
  std::string count_family = "poisson";
  std::string severity_family = "weibull";
};

struct MarginalSpec {
  std::vector<std::string> frequency_terms;
  std::vector<std::string> severity_terms;
  std::string count_family = "poisson";
  std::string severity_family = "weibull";
};

/// Per-year means of the two margins after applying the regression.
struct YearMargins {
  double lambda = 1.0;
  double xi = 1.0;
};

}  // namespace mcrm
