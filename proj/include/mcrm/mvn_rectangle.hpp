#pragma once

#include <Eigen/Dense>

namespace mcrm {

/// P(X <= upper) for X ~ N(mean, cov), by sequential conditioning on the
/// Cholesky factor and nested adaptive Gauss-Kronrod integration on the
/// probability scale. Entries of `upper` may be -inf/+inf. Intended for small
/// dimensions (<= 4); cost grows geometrically with dimension.
double mvn_cdf(const Eigen::VectorXd& upper, const Eigen::VectorXd& mean,
               const Eigen::MatrixXd& cov, double tolerance = 1e-12);

}  // namespace mcrm
