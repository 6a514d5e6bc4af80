#pragma once

#include <cstddef>
#include <span>

namespace mcrm {

inline constexpr double kLogSqrtTwoPi = 0.91893853320467274178;

/// Standard normal density, distribution and quantile.
double norm_pdf(double x);
double norm_log_pdf(double x);
double norm_cdf(double x);
/// Upper tail 1 - Phi(x), accurate for large positive x.
double norm_sf(double x);
double norm_quantile(double p);

/// Phi^{-1}(u) where the caller supplies both u and 1-u so that values close
/// to one keep full precision. Uses the smaller of the two.
double norm_quantile_pair(double lower, double upper);

/// Phi(b) - Phi(a) for a <= b, evaluated on whichever tail avoids cancellation.
double norm_interval(double a, double b);

/// Student t with `nu` degrees of freedom.
double t_log_pdf(double x, double nu);
double t_quantile_pair(double lower, double upper, double nu);
double t_cdf(double x, double nu);

/// log(sum(exp(values))) with the usual max shift; -inf for an empty or all -inf input.
double log_sum_exp(std::span<const double> values);

}  // namespace mcrm
