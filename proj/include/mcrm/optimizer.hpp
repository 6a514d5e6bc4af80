#pragma once

#include <functional>
#include <string>

#include <Eigen/Dense>

namespace mcrm {

struct BfgsOptions {
  int max_iterations = 500;
  /// Stop when ||grad||_inf <= gradient_tolerance * (1 + |f|).
  double gradient_tolerance = 1e-7;
  /// Also stop when the relative decrease over an iteration falls below this.
  double function_tolerance = 1e-13;
  /// Central-difference step, relative: h_i = step * (1 + |x_i|).
  double gradient_step = 1e-6;
};

struct BfgsResult {
  Eigen::VectorXd x;
  double value = 0.0;
  Eigen::VectorXd gradient;
  int iterations = 0;
  int evaluations = 0;
  bool converged = false;
  std::string message;
};

/// Central-difference gradient.
Eigen::VectorXd numeric_gradient(const std::function<double(const Eigen::VectorXd&)>& f,
                                 const Eigen::VectorXd& x, double step, int* evaluations = nullptr);

/// Quasi-Newton minimization with numerical gradients and a backtracking
/// Armijo line search. Non-finite objective values are treated as infeasible
/// and shrink the step.
BfgsResult minimize_bfgs(const std::function<double(const Eigen::VectorXd&)>& f, Eigen::VectorXd x0,
                         const BfgsOptions& options = {});

}  // namespace mcrm
