#include "mcrm/marginals.hpp"

#include <cmath>
#include <map>
#include <mutex>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "mcrm/errors.hpp"

namespace mcrm {

namespace {

void require_positive(double v, const char* what) {
  if (!(v > 0.0) || !std::isfinite(v))
    throw ValidationError(std::string(what) + " must be positive and finite, got " +
                          std::to_string(v));
}

class PoissonLaw final : public CountLaw {
 public:
  std::string_view name() const override { return "poisson"; }

  double log_pmf(int n, double mean) const override {
    require_positive(mean, "Poisson mean");
    if (n < 0) return -INFINITY;
    return n * std::log(mean) - mean - std::lgamma(n + 1.0);
  }

  double cdf(int n, double mean) const override {
    require_positive(mean, "Poisson mean");
    if (n < 0) return 0.0;
    return boost::math::gamma_q(n + 1.0, mean);
  }

  double sf(int n, double mean) const override {
    require_positive(mean, "Poisson mean");
    if (n < 0) return 1.0;
    return boost::math::gamma_p(n + 1.0, mean);
  }

  int inverse_cdf(double u, double mean) const override {
    require_positive(mean, "Poisson mean");
    if (!(u >= 0.0 && u < 1.0)) throw ValidationError("inverse cdf needs u in [0,1)");
    // Walk the pmf upward; near the target the exact cdf decides, so the
    // result agrees with cdf() at ties.
    int n = 0;
    double acc = std::exp(log_pmf(0, mean));
    for (;;) {
      if (acc >= u - 1e-10) {
        const double exact = cdf(n, mean);
        if (exact >= u) break;
        acc = exact;
      }
      ++n;
      acc += std::exp(log_pmf(n, mean));
      if (n > 100000000) throw NumericalError("Poisson inverse cdf did not terminate");
    }
    return n;
  }
};

class WeibullLaw final : public SeverityLaw {
 public:
  std::string_view name() const override { return "weibull"; }

  double log_pdf(double y, double mean, double shape) const override {
    require_positive(y, "severity");
    const double s = weibull_scale(mean, shape);
    const double z = y / s;
    return std::log(shape / s) + (shape - 1.0) * std::log(z) - std::pow(z, shape);
  }

  double cdf(double y, double mean, double shape) const override {
    require_positive(y, "severity");
    return -std::expm1(-std::pow(y / weibull_scale(mean, shape), shape));
  }

  double sf(double y, double mean, double shape) const override {
    require_positive(y, "severity");
    return std::exp(-std::pow(y / weibull_scale(mean, shape), shape));
  }

  double quantile_pair(double lower, double upper, double mean, double shape) const override {
    const double s = weibull_scale(mean, shape);
    // -log(1-u) from whichever representation is accurate.
    const double h = lower <= upper ? -std::log1p(-lower) : -std::log(upper);
    return s * std::pow(h, 1.0 / shape);
  }
};

struct Registry {
  std::mutex mutex;
  std::map<std::string, std::unique_ptr<CountLaw>, std::less<>> counts;
  std::map<std::string, std::unique_ptr<SeverityLaw>, std::less<>> severities;

  Registry() {
    counts.emplace("poisson", std::make_unique<PoissonLaw>());
    severities.emplace("weibull", std::make_unique<WeibullLaw>());
  }
};

Registry& registry() {
  static Registry r;
  return r;
}

}  // namespace

const CountLaw& count_law(std::string_view name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.counts.find(name);
  if (it == r.counts.end()) throw ValidationError("unknown count family '" + std::string(name) + "'");
  return *it->second;
}

const SeverityLaw& severity_law(std::string_view name) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  auto it = r.severities.find(name);
  if (it == r.severities.end())
    throw ValidationError("unknown severity family '" + std::string(name) + "'");
  return *it->second;
}

void register_count_law(std::unique_ptr<CountLaw> law) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::string key(law->name());
  r.counts[key] = std::move(law);
}

void register_severity_law(std::unique_ptr<SeverityLaw> law) {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::string key(law->name());
  r.severities[key] = std::move(law);
}

std::vector<std::string> registered_count_laws() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> out;
  for (const auto& [k, v] : r.counts) out.push_back(k);
  return out;
}

std::vector<std::string> registered_severity_laws() {
  auto& r = registry();
  std::lock_guard lock(r.mutex);
  std::vector<std::string> out;
  for (const auto& [k, v] : r.severities) out.push_back(k);
  return out;
}

double freq_log_pmf(int n, double lambda) { return count_law("poisson").log_pmf(n, lambda); }
double freq_pmf(int n, double lambda) { return std::exp(freq_log_pmf(n, lambda)); }
double freq_cdf(int n, double lambda) { return count_law("poisson").cdf(n, lambda); }
int freq_inverse_cdf(double u, double lambda) {
  return count_law("poisson").inverse_cdf(u, lambda);
}

double weibull_scale(double xi, double nu_sev) {
  require_positive(xi, "severity mean");
  require_positive(nu_sev, "Weibull shape");
  return xi / std::tgamma(1.0 + 1.0 / nu_sev);
}

double sev_log_pdf(double y, double xi, double nu_sev) {
  return severity_law("weibull").log_pdf(y, xi, nu_sev);
}
double sev_pdf(double y, double xi, double nu_sev) { return std::exp(sev_log_pdf(y, xi, nu_sev)); }
double sev_cdf(double y, double xi, double nu_sev) {
  return severity_law("weibull").cdf(y, xi, nu_sev);
}
double sev_quantile(double u, double xi, double nu_sev) {
  if (!(u > 0.0 && u < 1.0)) throw ValidationError("severity quantile needs u in (0,1)");
  return severity_law("weibull").quantile_pair(u, 1.0 - u, xi, nu_sev);
}

}  // namespace mcrm
