#pragma once

#include <vector>

namespace mcrm {

/// Nodes and weights for integrals against a probability measure:
/// sum_k weights[k] * f(nodes[k]) ~ E[f(X)].
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  std::size_t size() const { return nodes.size(); }
};

/// Physicists' Gauss-Hermite rule for weight exp(-x^2) on the real line.
QuadratureRule gauss_hermite_raw(int n);

/// Rule for E[f(R)], R ~ N(0,1): nodes sqrt(2) x_k, weights w_k / sqrt(pi).
QuadratureRule standard_normal_rule(int n);

/// Rules for the copula densities. Both are standard normal rules that the
/// density code recentres and rescales around the mode of each integrand: one
/// over the shared factor, one over the log of the t copula mixing variable.
struct DensityQuadrature {
  QuadratureRule factor = standard_normal_rule(32);
  QuadratureRule mixing = standard_normal_rule(32);
};

}  // namespace mcrm
