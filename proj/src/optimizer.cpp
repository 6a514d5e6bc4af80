#include "mcrm/optimizer.hpp"

#include <cmath>
#include <limits>

#include "mcrm/errors.hpp"

namespace mcrm {

Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step, int* evaluations) {
  Eigen::VectorXd g(x.size());
  Eigen::VectorXd probe = x;
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    const double h = step * (1.0 + std::abs(x(i)));
    probe(i) = x(i) + h;
    const double up = f(probe);
    probe(i) = x(i) - h;
    const double down = f(probe);
    probe(i) = x(i);
    g(i) = (up - down) / (2.0 * h);
  }
  if (evaluations) *evaluations += 2 * static_cast<int>(x.size());
  return g;
}

BfgsResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                         const BfgsOptions& options) {
  const Eigen::Index n = x0.size();
  BfgsResult res;
  res.x = std::move(x0);
  res.value = f(res.x);
  res.evaluations = 1;
  if (!std::isfinite(res.value)) throw NumericalError("objective is not finite at the starting point");
  if (n == 0) {
    res.gradient = Eigen::VectorXd();
    res.converged = true;
    res.message = "no free parameters";
    return res;
  }
  res.gradient = numeric_gradient(f, res.x, options.gradient_step, &res.evaluations);
  Eigen::MatrixXd inv_h = Eigen::MatrixXd::Identity(n, n);
  bool scaled = false;

  for (res.iterations = 0; res.iterations < options.max_iterations; ++res.iterations) {
    if (!res.gradient.allFinite()) throw NumericalError("gradient is not finite");
    if (res.gradient.lpNorm<Eigen::Infinity>() <= options.gradient_tolerance * (1.0 + std::abs(res.value))) {
      res.converged = true;
      res.message = "gradient tolerance reached";
      return res;
    }
    Eigen::VectorXd dir = -inv_h * res.gradient;
    double slope = res.gradient.dot(dir);
    if (!(slope < 0.0)) {
      inv_h.setIdentity();
      dir = -res.gradient;
      slope = res.gradient.dot(dir);
    }
    // Keep the first trial step modest in the unconstrained coordinates.
    const double max_step = dir.lpNorm<Eigen::Infinity>();
    double alpha = max_step > 1.0 ? 1.0 / max_step : 1.0;
    Eigen::VectorXd trial;
    double trial_value = std::numeric_limits<double>::infinity();
    bool accepted = false;
    for (int ls = 0; ls < 60; ++ls) {
      trial = res.x + alpha * dir;
      trial_value = f(trial);
      ++res.evaluations;
      if (std::isfinite(trial_value) && trial_value <= res.value + 1e-4 * alpha * slope) {
        accepted = true;
        break;
      }
      alpha *= 0.5;
    }
    if (!accepted) {
      if (!scaled) {
        // Retry once from a steepest-descent direction before giving up.
        inv_h.setIdentity();
        scaled = true;
        continue;
      }
      res.message = "line search failed";
      res.converged = res.gradient.lpNorm<Eigen::Infinity>() <= 1e-4 * (1.0 + std::abs(res.value));
      return res;
    }
    scaled = false;
    const Eigen::VectorXd grad_new = numeric_gradient(f, trial, options.gradient_step, &res.evaluations);
    const Eigen::VectorXd s = trial - res.x;
    const Eigen::VectorXd y = grad_new - res.gradient;
    const double decrease = res.value - trial_value;
    res.x = trial;
    res.gradient = grad_new;
    const double previous = res.value;
    res.value = trial_value;
    const double sy = s.dot(y);
    if (sy > 1e-12 * s.norm() * y.norm()) {
      if (res.iterations == 0) inv_h *= sy / y.squaredNorm();
      const double rho = 1.0 / sy;
      const Eigen::MatrixXd eye = Eigen::MatrixXd::Identity(n, n);
      inv_h = (eye - rho * s * y.transpose()) * inv_h * (eye - rho * y * s.transpose()) +
              rho * s * s.transpose();
    }
    if (decrease <= options.function_tolerance * (1.0 + std::abs(previous)) &&
        res.gradient.lpNorm<Eigen::Infinity>() <= 1e-4 * (1.0 + std::abs(res.value))) {
      res.converged = true;
      res.message = "function tolerance reached";
      return res;
    }
  }
  res.message = "maximum iterations reached";
  return res;
}

}  // namespace mcrm
