#include "mcrm/quadrature.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include <boost/math/special_functions/gamma.hpp>

#include "mcrm/errors.hpp"

namespace mcrm {

QuadratureRule gauss_hermite_raw(int n) {
  if (n < 1) throw ValidationError("Gauss-Hermite rule needs at least one node");
  constexpr double kPiM4 = 0.7511255444649425;  // pi^{-1/4}
  QuadratureRule rule;
  rule.nodes.assign(n, 0.0);
  rule.weights.assign(n, 0.0);
  const int m = (n + 1) / 2;
  double z = 0.0;
  // Newton iteration on the orthonormal Hermite recurrence, roots from the
  // largest down, using the usual asymptotic starting guesses.
  for (int i = 0; i < m; ++i) {
    if (i == 0) z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -0.16667);
    else if (i == 1) z -= 1.14 * std::pow(static_cast<double>(n), 0.426) / z;
    else if (i == 2) z = 1.86 * z - 0.86 * rule.nodes[0];
    else if (i == 3) z = 1.91 * z - 0.91 * rule.nodes[1];
    else z = 2.0 * z - rule.nodes[i - 2];
    double pp = 0.0;
    bool converged = false;
    for (int it = 0; it < 100; ++it) {
      double p1 = kPiM4, p2 = 0.0;
      for (int j = 0; j < n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / (j + 1)) * p2 - std::sqrt(static_cast<double>(j) / (j + 1)) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) <= 1e-15 * std::max(1.0, std::abs(z))) {
        converged = true;
        break;
      }
    }
    if (!converged) throw NumericalError("Gauss-Hermite node iteration failed for n=" + std::to_string(n));
    rule.nodes[i] = z;
    rule.nodes[n - 1 - i] = -z;
    rule.weights[i] = 2.0 / (pp * pp);
    rule.weights[n - 1 - i] = rule.weights[i];
  }
  // Ascending order.
  std::reverse(rule.nodes.begin(), rule.nodes.end());
  std::reverse(rule.weights.begin(), rule.weights.end());
  return rule;
}

QuadratureRule standard_normal_rule(int n) {
  QuadratureRule rule = gauss_hermite_raw(n);
  const double inv_sqrt_pi = 1.0 / std::sqrt(M_PI);
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] *= std::sqrt(2.0);
    rule.weights[k] *= inv_sqrt_pi;
  }
  return rule;
}

}  // namespace mcrm
