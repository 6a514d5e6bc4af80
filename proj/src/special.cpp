#include "mcrm/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <boost/math/special_functions/gamma.hpp>

namespace mcrm {

namespace {
constexpr double kSqrt2 = 1.41421356237309504880;
}

double norm_pdf(double x) { return std::exp(norm_log_pdf(x)); }

double norm_log_pdf(double x) { return -0.5 * x * x - kLogSqrtTwoPi; }

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double norm_sf(double x) { return 0.5 * std::erfc(x / kSqrt2); }

double norm_quantile(double p) {
  if (p <= 0.0) return -std::numeric_limits<double>::infinity();
  if (p >= 1.0) return std::numeric_limits<double>::infinity();
  return -kSqrt2 * boost::math::erfc_inv(2.0 * p);
}

double norm_quantile_pair(double lower, double upper) {
  if (lower <= upper) return norm_quantile(lower);
  return -norm_quantile(upper);
}

double norm_interval(double a, double b) {
  if (!(a < b)) return 0.0;
  if (a > 0.0) return std::max(0.0, norm_sf(a) - norm_sf(b));
  return std::max(0.0, norm_cdf(b) - norm_cdf(a));
}

double t_log_pdf(double x, double nu) {
  using boost::math::lgamma;
  return lgamma(0.5 * (nu + 1.0)) - lgamma(0.5 * nu) - 0.5 * std::log(nu * M_PI) -
         0.5 * (nu + 1.0) * std::log1p(x * x / nu);
}

double t_quantile_pair(double lower, double upper, double nu) {
  boost::math::students_t dist(nu);
  if (lower <= upper) {
    if (lower <= 0.0) return -std::numeric_limits<double>::infinity();
    return boost::math::quantile(dist, lower);
  }
  if (upper <= 0.0) return std::numeric_limits<double>::infinity();
  return -boost::math::quantile(dist, upper);
}

double t_cdf(double x, double nu) {
  if (std::isinf(x)) return x > 0 ? 1.0 : 0.0;
  return boost::math::cdf(boost::math::students_t(nu), x);
}

double log_sum_exp(std::span<const double> values) {
  double m = -std::numeric_limits<double>::infinity();
  for (double v : values) m = std::max(m, v);
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double v : values) s += std::exp(v - m);
  return m + std::log(s);
}

}  // namespace mcrm
