#pragma once

// Joint density of a multi-year claim history under the Gaussian and t factor
// copulas. Years are conditionally independent given the shared factor R, so
// the density is a one-dimensional integral over R (two-dimensional for the t
// copula, which adds the chi-square mixing variable W).

#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "mcrm/dependence.hpp"
#include "mcrm/marginals.hpp"
#include "mcrm/quadrature.hpp"

namespace mcrm {

struct YearClaim {
  int year = 0;
  int count = 0;
  std::vector<double> severities;
  /// Design rows for the frequency and severity regressions (may be empty when
  /// margins are supplied directly).
  Eigen::VectorXd freq_covariates;
  Eigen::VectorXd sev_covariates;
};

struct PolicyHistory {
  std::string id;
  std::vector<YearClaim> years;
};

enum class CopulaFamily { gaussian, t };

std::string to_string(CopulaFamily family);
CopulaFamily copula_family_from_string(const std::string& name);

struct CopulaSpec {
  ThetaParams theta;
  CopulaFamily family = CopulaFamily::gaussian;
  /// Degrees of freedom of the t copula; ignored for the Gaussian family.
  double nu_df = 0.0;
};

/// Count and severity laws plus the shared severity shape.
struct MarginalLaws {
  const CountLaw* count = nullptr;
  const SeverityLaw* severity = nullptr;
  double nu_sev = 1.0;

  static MarginalLaws poisson_weibull(double nu_sev);
  static MarginalLaws from(const MarginalParams& params);
};

struct DensityDiagnostics {
  /// Count cdf values pushed into [1e-12, 1 - 1e-12] before the normal quantile.
  int clamped_counts = 0;
  /// Severity cdf values at the clamp boundary; the density is then reported as -inf.
  int clamped_severities = 0;
  /// Conditional count variances floored at 1e-12.
  int floored_variances = 0;

  DensityDiagnostics& operator+=(const DensityDiagnostics& o) {
    clamped_counts += o.clamped_counts;
    clamped_severities += o.clamped_severities;
    floored_variances += o.floored_variances;
    return *this;
  }
};

struct LogDensity {
  double value = 0.0;
  DensityDiagnostics diagnostics;
};

/// Per-year margins exp(x.beta), exp(w.gamma) from the covariate rows.
std::vector<YearMargins> year_margins(const PolicyHistory& history, const MarginalParams& params);

/// Log of the joint density of the year's severities given R = r (normal-scale
/// multivariate density plus the marginal Jacobian terms). Requires count >= 1.
/// Returns -inf and sets `diag.clamped_severities` when a severity cdf sits on
/// the clamp boundary.
double cond_sev_logdensity(const YearClaim& year, double r, const ThetaParams& theta,
                           const YearMargins& margins, const MarginalLaws& laws,
                           DensityDiagnostics* diag = nullptr);

/// P(N_t = n_t | severities, R = r), clamped to [0, 1].
double cond_freq_prob(const YearClaim& year, double r, const ThetaParams& theta,
                      const YearMargins& margins, const MarginalLaws& laws,
                      DensityDiagnostics* diag = nullptr);

/// Conditional law of the count's latent normal given R = r and the year's
/// severity latents.
struct ConditionalFrequencyLaw {
  double mu = 0.0;
  double sigma = 1.0;
};
ConditionalFrequencyLaw conditional_frequency_law(std::span<const double> severity_latents, double r,
                                                  const ThetaParams& theta);

LogDensity log_density_gaussian(const PolicyHistory& history, std::span<const YearMargins> margins,
                                const MarginalLaws& laws, const ThetaParams& theta,
                                const QuadratureRule& factor_rule);

LogDensity log_density_t(const PolicyHistory& history, std::span<const YearMargins> margins,
                         const MarginalLaws& laws, const ThetaParams& theta, double nu_df,
                         const DensityQuadrature& quad);

/// Dispatches on `spec.family`.
LogDensity log_density(const PolicyHistory& history, std::span<const YearMargins> margins,
                       const MarginalLaws& laws, const CopulaSpec& spec,
                       const DensityQuadrature& quad);

/// Single-year density of (N = count, Y_1..Y_k) where k = severities.size() is
/// free of `count`: the first k severities of the infinitely extended year.
/// With k = count this is the ordinary one-year density.
double extended_year_log_density(int count, std::span<const double> severities,
                                 const YearMargins& margins, const MarginalLaws& laws,
                                 const ThetaParams& theta, const QuadratureRule& factor_rule);

/// Density by generic matrix conditioning on the full structured correlation
/// matrix: severities analytically, then the signed sum over count vertices of
/// tau-dimensional normal cdfs. Limited to tau <= 3 and at most 5 claims.
double oracle_density(const PolicyHistory& history, std::span<const YearMargins> margins,
                      const MarginalLaws& laws, const ThetaParams& theta);

}  // namespace mcrm
