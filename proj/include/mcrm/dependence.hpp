#pragma once

// Structured correlation matrices for multi-year frequency/severity vectors
// and the factor-loading reparameterization that keeps them valid.

#include <array>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace mcrm {

/// Factor loadings. theta1/theta2 load the counts/severities on the shared
/// effect; theta3/theta4 load them on the within-year effect.
struct ThetaParams {
  double theta1 = 0.0;
  double theta2 = 0.0;
  double theta3 = 0.0;
  double theta4 = 0.0;

  std::array<double, 4> as_array() const { return {theta1, theta2, theta3, theta4}; }
  static ThetaParams from_array(std::span<const double, 4> v) { return {v[0], v[1], v[2], v[3]}; }
  bool operator==(const ThetaParams&) const = default;
};

/// Latent-scale correlations:
///   rho1 count-severity (same year)    rho2 severity-severity (same year)
///   rho3 count-count (across years)    rho4 count-severity (across years)
///   rho5 severity-severity (across years)
struct RhoParams {
  double rho1 = 0.0;
  double rho2 = 0.0;
  double rho3 = 0.0;
  double rho4 = 0.0;
  double rho5 = 0.0;

  std::array<double, 5> as_array() const { return {rho1, rho2, rho3, rho4, rho5}; }
  bool operator==(const RhoParams&) const = default;
};

/// Yearly claim counts n_1..n_tau.
using FrequencyVector = std::vector<int>;

struct StructuredCorrMatrix {
  Eigen::MatrixXd entries;
  /// Per-year block sizes n_t + 1.
  std::vector<int> block_sizes;
  /// True when row/column 0 is the shared factor.
  bool augmented = false;

  Eigen::Index dim() const { return entries.rows(); }
};

RhoParams rho_from_theta(const ThetaParams& theta);

/// 5x4 Jacobian d rho / d theta.
Eigen::Matrix<double, 5, 4> rho_jacobian(const ThetaParams& theta);

bool check_admissible(const ThetaParams& theta);

StructuredCorrMatrix build_sigma(std::span<const int> n, const RhoParams& rho);

StructuredCorrMatrix build_augmented_sigma(std::span<const int> n, const RhoParams& rho,
                                           double theta1, double theta2);

/// Residual correlation of the non-factor coordinates after conditioning on the
/// factor (Schur complement of the leading 1x1 block). Requires an augmented matrix.
StructuredCorrMatrix schur_complement_factor(const StructuredCorrMatrix& m);

/// Largest absolute entry over all off-diagonal year blocks.
double max_off_block_entry(const StructuredCorrMatrix& m);

/// LDL^T without pivoting; every pivot must exceed 1e-10 times the largest diagonal entry.
bool is_positive_definite(const Eigen::MatrixXd& m);
inline bool is_positive_definite(const StructuredCorrMatrix& m) {
  return is_positive_definite(m.entries);
}

}  // namespace mcrm
