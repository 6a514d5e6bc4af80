#include "mcrm/simulate.hpp"

#include <cmath>
#include <string>

#include <boost/random/chi_squared_distribution.hpp>
#include <boost/random/normal_distribution.hpp>

#include "mcrm/errors.hpp"
#include "mcrm/parallel.hpp"
#include "mcrm/special.hpp"

namespace mcrm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Probability and complement of a latent value on the copula's scale.
struct UniformPair {
  double lower;
  double upper;
};

UniformPair to_uniform(double x, const CopulaSpec& copula) {
  if (copula.family == CopulaFamily::t) return {t_cdf(x, copula.nu_df), t_cdf(-x, copula.nu_df)};
  return {norm_cdf(x), norm_sf(x)};
}

}  // namespace

Rng make_stream(std::uint64_t seed, std::uint64_t index) {
  return Rng(splitmix64(splitmix64(seed) ^ splitmix64(index + 0x632BE59BD9B4E019ULL)));
}

ScenarioConfig scenario_preset(int scenario) {
  static const ThetaParams kTable[8] = {
      {0.3, 0.3, 0.5, 0.5}, {0.3, 0.3, 0.0, 0.0}, {0.3, 0.7, 0.5, 0.5}, {0.3, 0.7, 0.0, 0.0},
      {0.7, 0.3, 0.5, 0.5}, {0.7, 0.3, 0.0, 0.0}, {0.7, 0.7, 0.5, 0.5}, {0.7, 0.7, 0.0, 0.0}};
  if (scenario < 1 || scenario > 8) throw ValidationError("scenario must be between 1 and 8");
  ScenarioConfig c;
  c.theta = kTable[scenario - 1];
  return c;
}

PolicyHistory simulate_policy(const CopulaSpec& copula, const MarginalLaws& laws,
                              std::span<const YearMargins> margins, Rng& rng, LatentRecord* latents) {
  const ThetaParams& th = copula.theta;
  if (!check_admissible(th)) throw ValidationError("inadmissible dependence parameters");
  if (copula.family == CopulaFamily::t && !(copula.nu_df > 0.0))
    throw ValidationError("t copula degrees of freedom must be positive");
  boost::random::normal_distribution<double> normal;
  const double count_resid = std::sqrt(1.0 - th.theta1 * th.theta1 - th.theta3 * th.theta3);
  const double sev_resid = std::sqrt(1.0 - th.theta2 * th.theta2 - th.theta4 * th.theta4);

  double scale = 1.0;
  if (copula.family == CopulaFamily::t) {
    boost::random::chi_squared_distribution<double> chi(copula.nu_df);
    scale = 1.0 / std::sqrt(chi(rng) / copula.nu_df);
  }
  const double r = normal(rng);
  if (latents) {
    *latents = LatentRecord{};
    latents->factor = r;
  }

  PolicyHistory policy;
  for (std::size_t t = 0; t < margins.size(); ++t) {
    const double v = normal(rng);
    const double a = th.theta1 * r + th.theta3 * v + count_resid * normal(rng);
    const UniformPair ua = to_uniform(a * scale, copula);
    // A cdf value of exactly one only happens for extreme latents; step back one ulp.
    const double u = ua.lower < 1.0 ? ua.lower : std::nextafter(1.0, 0.0);
    YearClaim year;
    year.year = static_cast<int>(t) + 1;
    year.count = laws.count->inverse_cdf(u, margins[t].lambda);
    year.freq_covariates = Eigen::VectorXd::Ones(1);
    year.sev_covariates = Eigen::VectorXd::Ones(1);
    std::vector<double> sev_latent;
    for (int j = 0; j < year.count; ++j) {
      const double b = th.theta2 * r + th.theta4 * v + sev_resid * normal(rng);
      const UniformPair ub = to_uniform(b * scale, copula);
      year.severities.push_back(laws.severity->quantile_pair(ub.lower, ub.upper, margins[t].xi, laws.nu_sev));
      sev_latent.push_back(b);
    }
    if (latents) {
      latents->year_factor.push_back(v);
      latents->count_latent.push_back(a);
      latents->severity_latent.push_back(std::move(sev_latent));
    }
    policy.years.push_back(std::move(year));
  }
  return policy;
}

SimulatedPortfolio simulate_portfolio(const ScenarioConfig& config) {
  if (config.policies < 1 || config.years < 1) throw ValidationError("portfolio needs at least one policy and one year");
  const CopulaSpec copula{config.theta, config.family, config.nu_df};
  if (!check_admissible(copula.theta)) throw ValidationError("inadmissible dependence parameters");
  const MarginalLaws laws = MarginalLaws::poisson_weibull(config.nu_sev);
  const std::vector<YearMargins> margins(config.years, YearMargins{config.lambda0, config.xi0});

  SimulatedPortfolio out;
  out.policies.resize(config.policies);
  if (config.keep_latents) out.latents.resize(config.policies);
  parallel_for(config.policies, [&](std::size_t i) {
    Rng rng = make_stream(config.seed, i);
    out.policies[i] = simulate_policy(copula, laws, margins, rng, config.keep_latents ? &out.latents[i] : nullptr);
    out.policies[i].id = "P" + std::to_string(i + 1);
  });
  return out;
}

}  // namespace mcrm
