#include "mcrm/mvn_rectangle.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "mcrm/errors.hpp"
#include "mcrm/special.hpp"

namespace mcrm {

namespace {

struct Conditioner {
  Eigen::MatrixXd chol;
  Eigen::VectorXd shifted;  // upper - mean
  double tolerance;

  // Probability that coordinates k.. stay below their limits given e_0..e_{k-1}.
  // Integrates phi(e_k) times the remaining probability over e_k in
  // [-kCut, limit]; the mass below -kCut is below 1e-19 and is dropped.
  double tail(Eigen::Index k, Eigen::VectorXd& e) const {
    constexpr double kCut = 9.0;
    const Eigen::Index d = chol.rows();
    double limit = shifted(k);
    for (Eigen::Index j = 0; j < k; ++j) limit -= chol(k, j) * e(j);
    limit /= chol(k, k);
    if (k == d - 1) return norm_cdf(limit);
    if (limit <= -kCut) return 0.0;
    const double hi = std::min(limit, kCut);
    auto integrand = [&](double v) {
      e(k) = v;
      return norm_pdf(v) * tail(k + 1, e);
    };
    double err = 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 21>::integrate(integrand, -kCut, hi, 12,
                                                                         tolerance, &err);
  }
};

}  // namespace

double mvn_cdf(const Eigen::VectorXd& upper, const Eigen::VectorXd& mean,
               const Eigen::MatrixXd& cov, double tolerance) {
  const Eigen::Index d = upper.size();
  if (d == 0 || mean.size() != d || cov.rows() != d || cov.cols() != d)
    throw ValidationError("mvn_cdf: dimension mismatch");
  for (Eigen::Index i = 0; i < d; ++i)
    if (upper(i) == -INFINITY) return 0.0;
  Eigen::LLT<Eigen::MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericalError("mvn_cdf: covariance is not positive definite");
  Conditioner c{llt.matrixL(), upper - mean, tolerance};
  Eigen::VectorXd e = Eigen::VectorXd::Zero(d);
  return c.tail(0, e);
}

}  // namespace mcrm
