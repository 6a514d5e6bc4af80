#include "mcrm/copula_density.hpp"

#include <boost/math/quadrature/gauss.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "mcrm/errors.hpp"
#include "mcrm/mvn_rectangle.hpp"
#include "mcrm/special.hpp"

namespace mcrm {

namespace {

constexpr double kClampLow = 1e-12;
constexpr double kClampHigh = 1.0 - 1e-12;
constexpr double kVarianceFloor = 1e-12;
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kLog2Pi = 1.8378770664093454836;

enum class LatentScale { normal, student };

// Year quantities that do not depend on the factor value.
struct PreparedYear {
  int count = 0;
  std::vector<double> latents;  // severities on the latent scale
  double upper = 0.0;           // latent threshold for N <= n
  double lower = kNegInf;       // latent threshold for N <= n - 1
  double jacobian = 0.0;        // sum_j log g(y_j) - log latent pdf
  bool severity_clamped = false;
};

double latent_quantile(double lower, double upper, LatentScale scale, double nu) {
  return scale == LatentScale::normal ? norm_quantile_pair(lower, upper)
                                      : t_quantile_pair(lower, upper, nu);
}

double latent_log_pdf(double x, LatentScale scale, double nu) {
  return scale == LatentScale::normal ? norm_log_pdf(x) : t_log_pdf(x, nu);
}

// Count threshold: the latent quantile of F(n), using the complement near one.
// An upper threshold whose cdf clamps high is left unbounded so that a count far
// in the tail keeps the clamped mass instead of an empty interval.
double count_threshold(int n, double lambda, const CountLaw& law, LatentScale scale, double nu,
                       DensityDiagnostics& diag, bool is_upper = false) {
  if (n < 0) return kNegInf;
  double cdf = law.cdf(n, lambda);
  double sf = law.sf(n, lambda);
  if (cdf < kClampLow) {
    cdf = kClampLow;
    sf = 1.0 - kClampLow;
    ++diag.clamped_counts;
  } else if (sf < 1.0 - kClampHigh) {
    sf = 1.0 - kClampHigh;
    cdf = kClampHigh;
    ++diag.clamped_counts;
    if (is_upper) return INFINITY;
  }
  return latent_quantile(cdf, sf, scale, nu);
}

PreparedYear prepare_year(int count, std::span<const double> severities, const YearMargins& m,
                          const MarginalLaws& laws, LatentScale scale, double nu,
                          DensityDiagnostics& diag) {
  PreparedYear p;
  p.count = count;
  p.upper = count_threshold(count, m.lambda, *laws.count, scale, nu, diag, true);
  p.lower = count_threshold(count - 1, m.lambda, *laws.count, scale, nu, diag);
  p.latents.reserve(severities.size());
  for (double y : severities) {
    if (!(y > 0.0) || !std::isfinite(y)) throw ValidationError("severities must be positive and finite");
    const double cdf = laws.severity->cdf(y, m.xi, laws.nu_sev);
    const double sf = laws.severity->sf(y, m.xi, laws.nu_sev);
    if (cdf < kClampLow || sf < 1.0 - kClampHigh) {
      p.severity_clamped = true;
      ++diag.clamped_severities;
      p.latents.push_back(0.0);
      continue;
    }
    const double z = latent_quantile(cdf, sf, scale, nu);
    p.latents.push_back(z);
    p.jacobian += laws.severity->log_pdf(y, m.xi, laws.nu_sev) - latent_log_pdf(z, scale, nu);
  }
  return p;
}

// Factor-dependent part of one year given latent scale factor `root_w`
// (sqrt of the mixing variable; 1 for the Gaussian copula). Returns the log of
// [normal density of the scaled severity latents given r] * P(count | ...),
// excluding the marginal Jacobian.
struct YearKernel {
  // Sums over the scaled latents.
  double s1 = 0.0;
  double s2 = 0.0;
  int k = 0;
  double upper = 0.0;
  double lower = kNegInf;
  double log_scale = 0.0;  // k * log(root_w)

  // Dependence constants.
  double theta1 = 0.0, theta2 = 0.0;
  double a = 1.0;  // 1 - rho2
  double b = 0.0;  // rho2 - theta2^2
  double c = 0.0;  // rho1 - theta1 theta2
  double denom = 1.0;         // a + k b
  double log_det = 0.0;       // log det of the conditional severity covariance
  double sigma = 1.0;
  bool floored = false;

  YearKernel(const PreparedYear& p, double root_w, const ThetaParams& theta) {
    const RhoParams rho = rho_from_theta(theta);
    theta1 = theta.theta1;
    theta2 = theta.theta2;
    k = static_cast<int>(p.latents.size());
    for (double z : p.latents) {
      s1 += root_w * z;
      s2 += root_w * root_w * z * z;
    }
    upper = std::isfinite(p.upper) ? root_w * p.upper : p.upper;
    lower = std::isfinite(p.lower) ? root_w * p.lower : p.lower;
    log_scale = k * std::log(root_w);
    a = 1.0 - rho.rho2;
    b = rho.rho2 - theta2 * theta2;
    c = rho.rho1 - theta1 * theta2;
    double var = 1.0 - theta1 * theta1;
    if (k > 0) {
      denom = a + k * b;
      log_det = (k - 1) * std::log(a) + std::log(denom);
      var -= c * c * k / denom;
    }
    if (var < kVarianceFloor) {
      var = kVarianceFloor;
      floored = true;
    }
    sigma = std::sqrt(var);
  }

  double log_severity(double r) const {
    if (k == 0) return 0.0;
    const double sd = s1 - k * theta2 * r;
    const double sdd = s2 - 2.0 * theta2 * r * s1 + k * theta2 * theta2 * r * r;
    const double quad = (sdd - b * sd * sd / denom) / a;
    return -0.5 * (k * kLog2Pi + log_det + quad) + log_scale;
  }

  double mean(double r) const {
    double mu = theta1 * r;
    if (k > 0) mu += c * (s1 - k * theta2 * r) / denom;
    return mu;
  }

  // mean(r) = intercept() + slope() * r.
  double intercept() const { return k > 0 ? c * s1 / denom : 0.0; }
  double slope() const { return k > 0 ? theta1 - c * k * theta2 / denom : theta1; }

  double prob(double r) const {
    const double mu = mean(r);
    const double hi = upper == INFINITY ? INFINITY : (upper - mu) / sigma;
    const double lo = lower == kNegInf ? kNegInf : (lower - mu) / sigma;
    return std::clamp(norm_interval(lo, hi), 0.0, 1.0);
  }

  double log_value(double r) const {
    const double pr = prob(r);
    return log_severity(r) + (pr > 0.0 ? std::log(pr) : kNegInf);
  }
};

void check_year(const YearClaim& y) {
  if (y.count < 0) throw ValidationError("claim count must be non-negative");
  if (static_cast<int>(y.severities.size()) != y.count)
    throw ValidationError("year " + std::to_string(y.year) + " has count " + std::to_string(y.count) +
                          " but " + std::to_string(y.severities.size()) + " severities");
}

void check_inputs(const PolicyHistory& h, std::span<const YearMargins> margins, const MarginalLaws& laws,
                  const ThetaParams& theta) {
  if (h.years.empty()) throw ValidationError("policy '" + h.id + "' has no years");
  if (margins.size() != h.years.size())
    throw ValidationError("policy '" + h.id + "': margins do not match the number of years");
  if (!laws.count || !laws.severity) throw ValidationError("marginal laws not set");
  if (!check_admissible(theta)) throw ValidationError("inadmissible dependence parameters");
  for (const auto& y : h.years) check_year(y);
}

// log of the integral of exp(h(x)) over the real line for a unimodal,
// roughly log-concave h.
//
// A safeguarded Newton search locates the mode and the standard normal rule is
// recentred there and rescaled by the curvature, so the nodes follow the
// integrand wherever it sits and however narrow it is.
template <class LogIntegrand>
double adaptive_log_integral(LogIntegrand&& h, const QuadratureRule& rule, double step_cap,
                             std::vector<double>& scratch) {
  double x = 0.0;
  double hx = h(x);
  double scale = 1.0;
  if (std::isfinite(hx)) {
    constexpr double e = 1e-4;
    for (int it = 0; it < 60; ++it) {
      const double hp = h(x + e), hm = h(x - e);
      if (!std::isfinite(hp) || !std::isfinite(hm)) break;
      const double grad = (hp - hm) / (2.0 * e);
      double curv = (hp - 2.0 * hx + hm) / (e * e);
      if (!(curv < -1e-8)) curv = -1.0;
      double step = std::clamp(-grad / curv, -step_cap, step_cap);
      double xn = x + step;
      double hn = h(xn);
      for (int bt = 0; bt < 40 && !(hn >= hx); ++bt) {
        step *= 0.5;
        xn = x + step;
        hn = h(xn);
      }
      if (!(hn >= hx)) break;
      x = xn;
      hx = hn;
      if (std::abs(step) < 1e-10) break;
    }
    constexpr double ec = 1e-3;
    const double curv = (h(x + ec) - 2.0 * hx + h(x - ec)) / (ec * ec);
    if (curv < 0.0 && std::isfinite(curv)) scale = 1.0 / std::sqrt(-curv);
  } else {
    x = 0.0;
  }
  const double log_scale = std::log(scale);
  scratch.resize(rule.size());
  for (std::size_t q = 0; q < rule.size(); ++q) {
    const double z = rule.nodes[q];
    scratch[q] = std::log(rule.weights[q]) + h(x + scale * z) - norm_log_pdf(z) + log_scale;
  }
  return log_sum_exp(scratch);
}

// A count probability whose limits move across r faster than this fraction of
// the width of the Gaussian part is treated as a step.
constexpr double kSharpStep = 1.0;
constexpr double kFactorHalfRange = 12.0;

struct Step {
  double centre;
  double width;
};

// Composite Gauss-Legendre over centre +- kFactorHalfRange * scale: uniform
// panels for the bulk plus knots graded geometrically towards every step, so a
// step of any width is resolved. Knots move continuously with the parameters.
double integrate_factor_composite(std::span<const YearKernel> kernels, double centre, double scale,
                                  std::span<const Step> steps, std::vector<double>& scratch) {
  using Legendre = boost::math::quadrature::gauss<double, 15>;
  constexpr int kBulkPanels = 16;
  const double lo = centre - kFactorHalfRange * scale;
  const double hi = centre + kFactorHalfRange * scale;
  const double bulk = (hi - lo) / kBulkPanels;
  std::vector<double> knots;
  for (int j = 0; j <= kBulkPanels; ++j) knots.push_back(lo + j * bulk);
  for (const Step& st : steps) {
    knots.push_back(st.centre);
    for (double d = 0.5 * st.width; d < bulk; d *= 2.0) {
      knots.push_back(st.centre - d);
      knots.push_back(st.centre + d);
    }
  }
  std::erase_if(knots, [&](double x) { return !(x >= lo && x <= hi); });
  std::sort(knots.begin(), knots.end());
  knots.erase(std::unique(knots.begin(), knots.end()), knots.end());

  auto h = [&](double r) {
    double acc = norm_log_pdf(r);
    for (const auto& kern : kernels) {
      acc += kern.log_value(r);
      if (acc == kNegInf) break;
    }
    return acc;
  };
  const auto& xs = Legendre::abscissa();
  const auto& ws = Legendre::weights();
  scratch.clear();
  for (std::size_t p = 0; p + 1 < knots.size(); ++p) {
    const double half = 0.5 * (knots[p + 1] - knots[p]);
    const double mid = 0.5 * (knots[p + 1] + knots[p]);
    if (!(half > 0.0)) continue;
    for (std::size_t q = 0; q < xs.size(); ++q) {
      const double lw = std::log(half * ws[q]);
      scratch.push_back(lw + h(mid + half * xs[q]));
      if (xs[q] != 0.0) scratch.push_back(lw + h(mid - half * xs[q]));
    }
  }
  return log_sum_exp(scratch);
}

// log of the integral over r of phi(r) exp(sum_t kernel_t(r)).
//
// phi(r) times the severity terms is an exact Gaussian in r (centre and scale
// from three evaluations of the quadratic). Each count probability is a normal
// interval probability whose limits are linear in r. When every such limit
// moves slowly on the scale of that Gaussian the integrand is smooth and
// log-concave, and the rule is recentred on its mode and rescaled by its
// curvature. A limit that moves fast makes the integrand a near-step, which no
// Gauss-Hermite rule resolves; those cases go to the composite rule.
double integrate_factor(std::span<const YearKernel> kernels, const QuadratureRule& rule,
                        std::vector<double>& scratch) {
  auto quadratic = [&](double r) {
    double acc = norm_log_pdf(r);
    for (const auto& kern : kernels) acc += kern.log_severity(r);
    return acc;
  };
  const double qm = quadratic(-1.0), q0 = quadratic(0.0), qp = quadratic(1.0);
  const double curv = qp - 2.0 * q0 + qm;  // at most -1
  const double centre = -0.5 * (qp - qm) / curv;
  const double scale = 1.0 / std::sqrt(-curv);

  std::vector<Step> steps;
  const double lo = centre - kFactorHalfRange * scale;
  const double hi = centre + kFactorHalfRange * scale;
  for (const auto& kern : kernels) {
    const double m1 = kern.slope();
    if (m1 == 0.0) continue;
    const double width = kern.sigma / std::abs(m1);
    if (width >= kSharpStep * scale) continue;
    for (double limit : {kern.upper, kern.lower}) {
      if (!std::isfinite(limit)) continue;
      const double at = (limit - kern.intercept()) / m1;
      if (at > lo - 3.0 * width && at < hi + 3.0 * width) steps.push_back({at, width});
    }
  }
  if (!steps.empty()) return integrate_factor_composite(kernels, centre, scale, steps, scratch);

  auto h = [&](double r) {
    double acc = norm_log_pdf(r);
    for (const auto& kern : kernels) {
      acc += kern.log_value(r);
      if (acc == kNegInf) break;
    }
    return acc;
  };
  return adaptive_log_integral(h, rule, 2.0, scratch);
}

}  // namespace

std::string to_string(CopulaFamily family) {
  return family == CopulaFamily::gaussian ? "gaussian" : "t";
}

CopulaFamily copula_family_from_string(const std::string& name) {
  if (name == "gaussian" || name == "normal") return CopulaFamily::gaussian;
  if (name == "t" || name == "student") return CopulaFamily::t;
  throw ValidationError("unknown copula family '" + name + "'");
}

MarginalLaws MarginalLaws::poisson_weibull(double nu_sev) {
  return {&count_law("poisson"), &severity_law("weibull"), nu_sev};
}

MarginalLaws MarginalLaws::from(const MarginalParams& params) {
  return {&count_law(params.count_family), &severity_law(params.severity_family), params.nu_sev};
}

std::vector<YearMargins> year_margins(const PolicyHistory& history, const MarginalParams& params) {
  std::vector<YearMargins> out;
  out.reserve(history.years.size());
  for (const auto& y : history.years) {
    if (y.freq_covariates.size() != params.beta.size() || y.sev_covariates.size() != params.gamma.size())
      throw ValidationError("policy '" + history.id + "': covariate rows do not match coefficients");
    out.push_back({std::exp(y.freq_covariates.dot(params.beta)), std::exp(y.sev_covariates.dot(params.gamma))});
  }
  return out;
}

ConditionalFrequencyLaw conditional_frequency_law(std::span<const double> severity_latents, double r,
                                                  const ThetaParams& theta) {
  PreparedYear p;
  p.latents.assign(severity_latents.begin(), severity_latents.end());
  YearKernel kern(p, 1.0, theta);
  return {kern.mean(r), kern.sigma};
}

double cond_sev_logdensity(const YearClaim& year, double r, const ThetaParams& theta,
                           const YearMargins& margins, const MarginalLaws& laws, DensityDiagnostics* diag) {
  check_year(year);
  if (year.count < 1) throw ValidationError("conditional severity density needs at least one claim");
  DensityDiagnostics local;
  const PreparedYear p = prepare_year(year.count, year.severities, margins, laws, LatentScale::normal, 0.0, local);
  if (diag) *diag += local;
  if (p.severity_clamped) return kNegInf;
  return YearKernel(p, 1.0, theta).log_severity(r) + p.jacobian;
}

double cond_freq_prob(const YearClaim& year, double r, const ThetaParams& theta, const YearMargins& margins,
                      const MarginalLaws& laws, DensityDiagnostics* diag) {
  check_year(year);
  DensityDiagnostics local;
  const PreparedYear p = prepare_year(year.count, year.severities, margins, laws, LatentScale::normal, 0.0, local);
  YearKernel kern(p, 1.0, theta);
  if (kern.floored) ++local.floored_variances;
  if (diag) *diag += local;
  return kern.prob(r);
}

LogDensity log_density_gaussian(const PolicyHistory& history, std::span<const YearMargins> margins,
                                const MarginalLaws& laws, const ThetaParams& theta,
                                const QuadratureRule& factor_rule) {
  check_inputs(history, margins, laws, theta);
  LogDensity out;
  std::vector<YearKernel> kernels;
  kernels.reserve(history.years.size());
  double jacobian = 0.0;
  bool clamped = false;
  for (std::size_t t = 0; t < history.years.size(); ++t) {
    const auto& y = history.years[t];
    const PreparedYear p =
        prepare_year(y.count, y.severities, margins[t], laws, LatentScale::normal, 0.0, out.diagnostics);
    clamped = clamped || p.severity_clamped;
    jacobian += p.jacobian;
    kernels.emplace_back(p, 1.0, theta);
    if (kernels.back().floored) ++out.diagnostics.floored_variances;
  }
  if (clamped) {
    out.value = kNegInf;
    return out;
  }
  std::vector<double> scratch;
  out.value = integrate_factor(kernels, factor_rule, scratch) + jacobian;
  return out;
}

LogDensity log_density_t(const PolicyHistory& history, std::span<const YearMargins> margins,
                         const MarginalLaws& laws, const ThetaParams& theta, double nu_df,
                         const DensityQuadrature& quad) {
  check_inputs(history, margins, laws, theta);
  if (!(nu_df > 0.0)) throw ValidationError("t copula degrees of freedom must be positive");
  LogDensity out;
  std::vector<PreparedYear> prepared;
  double jacobian = 0.0;
  bool clamped = false;
  for (std::size_t t = 0; t < history.years.size(); ++t) {
    const auto& y = history.years[t];
    prepared.push_back(
        prepare_year(y.count, y.severities, margins[t], laws, LatentScale::student, nu_df, out.diagnostics));
    clamped = clamped || prepared.back().severity_clamped;
    jacobian += prepared.back().jacobian;
  }
  if (clamped) {
    out.value = kNegInf;
    return out;
  }
  // Integrate over s = log W, W ~ chi-square(nu) / nu, whose log-density is
  // a log a - lgamma(a) + a s - a e^s with a = nu / 2.
  const double a = 0.5 * nu_df;
  const double log_norm = a * std::log(a) - std::lgamma(a);
  std::vector<double> factor_scratch, mixing_scratch;
  std::vector<YearKernel> kernels;
  kernels.reserve(prepared.size());
  bool floored = false;
  auto h = [&](double s) {
    const double log_mix = log_norm + a * s - a * std::exp(s);
    if (!std::isfinite(log_mix)) return kNegInf;
    const double root_w = std::exp(0.5 * s);
    kernels.clear();
    for (const auto& p : prepared) {
      kernels.emplace_back(p, root_w, theta);
      floored = floored || kernels.back().floored;
    }
    return log_mix + integrate_factor(kernels, quad.factor, factor_scratch);
  };
  const double value = adaptive_log_integral(h, quad.mixing, 1.0, mixing_scratch);
  if (floored) ++out.diagnostics.floored_variances;
  out.value = value + jacobian;
  return out;
}

LogDensity log_density(const PolicyHistory& history, std::span<const YearMargins> margins,
                       const MarginalLaws& laws, const CopulaSpec& spec, const DensityQuadrature& quad) {
  if (spec.family == CopulaFamily::t) return log_density_t(history, margins, laws, spec.theta, spec.nu_df, quad);
  return log_density_gaussian(history, margins, laws, spec.theta, quad.factor);
}

double extended_year_log_density(int count, std::span<const double> severities, const YearMargins& margins,
                                 const MarginalLaws& laws, const ThetaParams& theta,
                                 const QuadratureRule& factor_rule) {
  if (count < 0) throw ValidationError("claim count must be non-negative");
  if (!check_admissible(theta)) throw ValidationError("inadmissible dependence parameters");
  DensityDiagnostics diag;
  const PreparedYear p = prepare_year(count, severities, margins, laws, LatentScale::normal, 0.0, diag);
  if (p.severity_clamped) return kNegInf;
  const YearKernel kern(p, 1.0, theta);
  std::vector<double> scratch;
  return integrate_factor(std::span(&kern, 1), factor_rule, scratch) + p.jacobian;
}

double oracle_density(const PolicyHistory& history, std::span<const YearMargins> margins,
                      const MarginalLaws& laws, const ThetaParams& theta) {
  check_inputs(history, margins, laws, theta);
  const auto tau = static_cast<int>(history.years.size());
  FrequencyVector n;
  int total = 0;
  for (const auto& y : history.years) {
    n.push_back(y.count);
    total += y.count;
  }
  if (tau > 3 || total > 5) throw ValidationError("oracle density is limited to tau <= 3 and at most 5 claims");

  const StructuredCorrMatrix sigma = build_sigma(n, rho_from_theta(theta));
  std::vector<int> count_idx, sev_idx;
  std::vector<double> sev_latent;
  double log_marginal = 0.0;  // sum log g(y) - log phi(z)
  int pos = 0;
  for (int t = 0; t < tau; ++t) {
    const auto& y = history.years[t];
    count_idx.push_back(pos++);
    for (double v : y.severities) {
      const double u = laws.severity->cdf(v, margins[t].xi, laws.nu_sev);
      const double s = laws.severity->sf(v, margins[t].xi, laws.nu_sev);
      const double z = norm_quantile_pair(u, s);
      sev_idx.push_back(pos++);
      sev_latent.push_back(z);
      log_marginal += laws.severity->log_pdf(v, margins[t].xi, laws.nu_sev) - norm_log_pdf(z);
    }
  }
  const auto nc = static_cast<Eigen::Index>(count_idx.size());
  const auto ns = static_cast<Eigen::Index>(sev_idx.size());
  Eigen::MatrixXd scc(nc, nc), scs(nc, ns), sss(ns, ns);
  for (Eigen::Index i = 0; i < nc; ++i) {
    for (Eigen::Index j = 0; j < nc; ++j) scc(i, j) = sigma.entries(count_idx[i], count_idx[j]);
    for (Eigen::Index j = 0; j < ns; ++j) scs(i, j) = sigma.entries(count_idx[i], sev_idx[j]);
  }
  for (Eigen::Index i = 0; i < ns; ++i)
    for (Eigen::Index j = 0; j < ns; ++j) sss(i, j) = sigma.entries(sev_idx[i], sev_idx[j]);

  Eigen::VectorXd cond_mean = Eigen::VectorXd::Zero(nc);
  Eigen::MatrixXd cond_cov = scc;
  double sev_density = 1.0;
  if (ns > 0) {
    const Eigen::Map<const Eigen::VectorXd> z(sev_latent.data(), ns);
    Eigen::LLT<Eigen::MatrixXd> llt(sss);
    if (llt.info() != Eigen::Success) throw NumericalError("oracle: severity block not positive definite");
    const Eigen::VectorXd alpha = llt.solve(z);
    const double log_det = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    sev_density = std::exp(-0.5 * (ns * kLog2Pi + log_det + z.dot(alpha)) + log_marginal);
    cond_mean = scs * alpha;
    cond_cov = scc - scs * llt.solve(scs.transpose());
  }

  // Signed sum over the 2^tau count vertices b_t in {n_t, n_t - 1}.
  double prob = 0.0;
  for (int mask = 0; mask < (1 << tau); ++mask) {
    Eigen::VectorXd upper(tau);
    int lowered = 0;
    bool empty = false;
    for (int t = 0; t < tau; ++t) {
      const bool down = (mask >> t) & 1;
      const int b = n[t] - (down ? 1 : 0);
      lowered += down ? 1 : 0;
      if (b < 0) {
        empty = true;
        break;
      }
      upper(t) = norm_quantile_pair(laws.count->cdf(b, margins[t].lambda), laws.count->sf(b, margins[t].lambda));
    }
    if (empty) continue;
    const double cdf = mvn_cdf(upper, cond_mean, cond_cov, 1e-13);
    prob += (lowered % 2 == 0 ? 1.0 : -1.0) * cdf;
  }
  return sev_density * prob;
}

}  // namespace mcrm
