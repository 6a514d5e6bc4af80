#include "mcrm/dependence.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "mcrm/errors.hpp"

namespace mcrm {

RhoParams rho_from_theta(const ThetaParams& t) {
  return {t.theta1 * t.theta2 + t.theta3 * t.theta4,
          t.theta2 * t.theta2 + t.theta4 * t.theta4,
          t.theta1 * t.theta1,
          t.theta1 * t.theta2,
          t.theta2 * t.theta2};
}

Eigen::Matrix<double, 5, 4> rho_jacobian(const ThetaParams& t) {
  Eigen::Matrix<double, 5, 4> j;
  // clang-format off
  j << t.theta2,       t.theta1,       t.theta4, t.theta3,
       0.0,            2.0 * t.theta2, 0.0,      2.0 * t.theta4,
       2.0 * t.theta1, 0.0,            0.0,      0.0,
       t.theta2,       t.theta1,       0.0,      0.0,
       0.0,            2.0 * t.theta2, 0.0,      0.0;
  // clang-format on
  return j;
}

bool check_admissible(const ThetaParams& t) {
  return t.theta1 * t.theta1 + t.theta3 * t.theta3 < 1.0 &&
         t.theta2 * t.theta2 + t.theta4 * t.theta4 < 1.0;
}

namespace {

void require_years(std::span<const int> n) {
  if (n.empty()) throw ValidationError("frequency vector must contain at least one year");
  for (int v : n)
    if (v < 0) throw ValidationError("claim counts must be non-negative, got " + std::to_string(v));
}

}  // namespace

StructuredCorrMatrix build_sigma(std::span<const int> n, const RhoParams& rho) {
  require_years(n);
  StructuredCorrMatrix out;
  std::vector<int> offset;
  int dim = 0;
  for (int nt : n) {
    offset.push_back(dim);
    out.block_sizes.push_back(nt + 1);
    dim += nt + 1;
  }
  out.entries.resize(dim, dim);
  const auto tau = n.size();
  for (std::size_t t = 0; t < tau; ++t) {
    for (std::size_t s = 0; s < tau; ++s) {
      for (int l = 0; l < n[t] + 1; ++l) {
        for (int m = 0; m < n[s] + 1; ++m) {
          double v;
          if (t == s) {
            if (l == m) v = 1.0;
            else if (std::min(l, m) >= 1) v = rho.rho2;
            else v = rho.rho1;
          } else {
            if (l == 0 && m == 0) v = rho.rho3;
            else if (std::min(l, m) >= 1) v = rho.rho5;
            else v = rho.rho4;
          }
          out.entries(offset[t] + l, offset[s] + m) = v;
        }
      }
    }
  }
  return out;
}

StructuredCorrMatrix build_augmented_sigma(std::span<const int> n, const RhoParams& rho,
                                           double theta1, double theta2) {
  StructuredCorrMatrix inner = build_sigma(n, rho);
  const Eigen::Index d = inner.dim();
  StructuredCorrMatrix out;
  out.block_sizes = inner.block_sizes;
  out.augmented = true;
  out.entries.resize(d + 1, d + 1);
  out.entries(0, 0) = 1.0;
  out.entries.bottomRightCorner(d, d) = inner.entries;
  Eigen::Index pos = 1;
  for (int size : inner.block_sizes) {
    for (int l = 0; l < size; ++l, ++pos) {
      const double v = l == 0 ? theta1 : theta2;
      out.entries(0, pos) = v;
      out.entries(pos, 0) = v;
    }
  }
  return out;
}

StructuredCorrMatrix schur_complement_factor(const StructuredCorrMatrix& m) {
  if (!m.augmented) throw ValidationError("Schur complement needs a matrix with a factor row");
  const Eigen::Index d = m.dim() - 1;
  const double pivot = m.entries(0, 0);
  const Eigen::VectorXd omega = m.entries.row(0).tail(d).transpose();
  StructuredCorrMatrix out;
  out.block_sizes = m.block_sizes;
  out.entries = m.entries.bottomRightCorner(d, d) - omega * omega.transpose() / pivot;
  return out;
}

double max_off_block_entry(const StructuredCorrMatrix& m) {
  const Eigen::Index shift = m.augmented ? 1 : 0;
  double worst = 0.0;
  Eigen::Index row0 = shift;
  for (std::size_t t = 0; t < m.block_sizes.size(); ++t) {
    Eigen::Index col0 = shift;
    for (std::size_t s = 0; s < m.block_sizes.size(); ++s) {
      if (t != s) {
        worst = std::max(worst, m.entries.block(row0, col0, m.block_sizes[t], m.block_sizes[s])
                                    .cwiseAbs()
                                    .maxCoeff());
      }
      col0 += m.block_sizes[s];
    }
    row0 += m.block_sizes[t];
  }
  return worst;
}

bool is_positive_definite(const Eigen::MatrixXd& m) {
  const Eigen::Index n = m.rows();
  if (n == 0 || m.cols() != n) return false;
  const double tol = 1e-10 * m.diagonal().cwiseAbs().maxCoeff();
  // Row-oriented LDL^T; l holds the unit lower factor, d the pivots.
  Eigen::MatrixXd l = Eigen::MatrixXd::Identity(n, n);
  Eigen::VectorXd d(n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double dj = m(j, j);
    for (Eigen::Index k = 0; k < j; ++k) dj -= l(j, k) * l(j, k) * d(k);
    if (!(dj > tol)) return false;
    d(j) = dj;
    for (Eigen::Index i = j + 1; i < n; ++i) {
      double v = m(i, j);
      for (Eigen::Index k = 0; k < j; ++k) v -= l(i, k) * l(j, k) * d(k);
      l(i, j) = v / dj;
    }
  }
  return true;
}

}  // namespace mcrm
