#pragma once

// Portfolio generation through the two-factor latent construction: a shared
// factor R per policy and a within-year factor V_t per policy-year.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <boost/random/mersenne_twister.hpp>

#include "mcrm/copula_density.hpp"

namespace mcrm {

using Rng = boost::random::mt19937_64;

/// Independent generator for stream `index` of a run seeded with `seed`.
Rng make_stream(std::uint64_t seed, std::uint64_t index);

struct ScenarioConfig {
  int policies = 500;
  int years = 3;
  double lambda0 = 2.0;
  double xi0 = 2980.9579870417283;  // exp(8)
  double nu_sev = 0.7;
  ThetaParams theta;
  CopulaFamily family = CopulaFamily::gaussian;
  double nu_df = 0.0;
  std::uint64_t seed = 1;
  bool keep_latents = false;
};

/// Settings 1..8 of the simulation design (I = 500, lambda0 = 2, tau = 3).
ScenarioConfig scenario_preset(int scenario);

/// Latent normals behind one policy, for diagnostics.
struct LatentRecord {
  double factor = 0.0;
  std::vector<double> year_factor;
  std::vector<double> count_latent;
  std::vector<std::vector<double>> severity_latent;
};

struct SimulatedPortfolio {
  std::vector<PolicyHistory> policies;
  std::vector<LatentRecord> latents;  // empty unless requested
};

/// One policy over margins.size() years. Years are numbered 1..tau and carry
/// intercept-only covariate rows.
PolicyHistory simulate_policy(const CopulaSpec& copula, const MarginalLaws& laws,
                              std::span<const YearMargins> margins, Rng& rng,
                              LatentRecord* latents = nullptr);

SimulatedPortfolio simulate_portfolio(const ScenarioConfig& config);

}  // namespace mcrm
