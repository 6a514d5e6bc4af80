#include "doctest.h"
#include "mcrm/mvn_rectangle.hpp"
#include "mcrm/quadrature.hpp"
#include "mcrm/special.hpp"
#include "oracles.hpp"

using namespace mcrm;

TEST_CASE("Gauss-Hermite nodes agree with the Golub-Welsch eigenproblem") {
  for (int n : {1, 2, 5, 16, 64}) {
    const QuadratureRule r = standard_normal_rule(n);
    const oracle::Rule ref = oracle::normal_rule(n);
    REQUIRE(r.size() == static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) {
      CHECK(r.nodes[i] == doctest::Approx(ref.x[i]).epsilon(1e-10).scale(1.0));
      // The eigenvector route resolves weights only to ~1e-16 absolute.
      CHECK(std::abs(r.weights[i] - ref.w[i]) <= 1e-8 * ref.w[i] + 1e-15);
    }
  }
  const QuadratureRule raw = gauss_hermite_raw(3);
  // Physicists' 3-point rule: nodes 0, +-sqrt(3/2); weights 2 sqrt(pi)/3, sqrt(pi)/6.
  CHECK(raw.nodes[1] == doctest::Approx(0.0).scale(1.0));
  CHECK(raw.nodes[2] == doctest::Approx(std::sqrt(1.5)));
  CHECK(raw.weights[1] == doctest::Approx(2.0 * std::sqrt(oracle::kPi) / 3.0));
  CHECK(raw.weights[0] == doctest::Approx(std::sqrt(oracle::kPi) / 6.0));
}

TEST_CASE("standard normal rule integrates polynomial moments exactly") {
  const QuadratureRule r = standard_normal_rule(20);
  double dfact = 1.0;  // (2k-1)!!
  for (int k = 0; k <= 19; ++k) {
    double m = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) m += r.weights[i] * std::pow(r.nodes[i], 2 * k);
    CHECK(m == doctest::Approx(dfact).epsilon(1e-10));
    dfact *= 2 * k + 1;
  }
}

TEST_CASE("normal cdf, quantile and tail-aware intervals") {
  for (double x : {-30.0, -8.0, -1.5, 0.0, 0.3, 2.0, 9.0}) {
    CHECK(norm_cdf(x) == doctest::Approx(oracle::Phi(x)).epsilon(1e-13));
    CHECK(norm_sf(x) == doctest::Approx(oracle::Phi(-x)).epsilon(1e-13));
    CHECK(norm_pdf(x) == doctest::Approx(oracle::phi(x)).epsilon(1e-13));
  }
  for (double p : {1e-300, 1e-20, 1e-5, 0.1, 0.5, 0.75, 0.999}) {
    CHECK(norm_quantile(p) == doctest::Approx(oracle::Phi_inv(p)).epsilon(1e-11));
  }
  // Upper-tail quantile from the complement.
  CHECK(norm_quantile_pair(1.0 - 1e-20, 1e-20) == doctest::Approx(-oracle::Phi_inv(1e-20)).epsilon(1e-12));
  // Interval far in the upper tail: direct differencing would return 0.
  const double v = norm_interval(9.0, 10.0);
  CHECK(v == doctest::Approx(oracle::Phi(-9.0) - oracle::Phi(-10.0)).epsilon(1e-10));
  CHECK(norm_interval(-oracle::kInf, oracle::kInf) == doctest::Approx(1.0));
  const double vals[3] = {-1000.0, 0.0, std::log(2.0)};
  CHECK(log_sum_exp(vals) == doctest::Approx(std::log(3.0)));
  CHECK(log_sum_exp(std::span<const double>{}) == -oracle::kInf);
}

TEST_CASE("Student t cdf and density") {
  for (double nu : {1.0, 3.0, 7.5, 100.0}) {
    auto dens = [&](double x) { return std::exp(t_log_pdf(x, nu)); };
    for (double x : {-3.0, -0.5, 0.0, 1.2, 4.0}) {
      const double c = 0.5 + oracle::simpson(dens, 0.0, x, 20000) * (x >= 0 ? 1.0 : 1.0);
      CHECK(t_cdf(x, nu) == doctest::Approx(c).epsilon(1e-9));
    }
    const double total = oracle::simpson([&](double s) { return dens(std::tan(s)) / std::pow(std::cos(s), 2); },
                                         -oracle::kPi / 2 + 1e-9, oracle::kPi / 2 - 1e-9, 200000);
    CHECK(total == doctest::Approx(1.0).epsilon(1e-5));
    const double q = t_quantile_pair(0.9, 0.1, nu);
    CHECK(t_cdf(q, nu) == doctest::Approx(0.9).epsilon(1e-12));
  }
}

TEST_CASE("multivariate normal cdf") {
  // One dimension.
  Eigen::VectorXd u1(1), m1 = Eigen::VectorXd::Zero(1);
  Eigen::MatrixXd c1 = Eigen::MatrixXd::Identity(1, 1) * 4.0;
  u1 << 1.0;
  CHECK(mvn_cdf(u1, m1, c1) == doctest::Approx(oracle::Phi(0.5)).epsilon(1e-10));

  // Two dimensions against Plackett's identity.
  for (double r : {-0.8, -0.2, 0.0, 0.45, 0.9}) {
    Eigen::Vector2d u(0.3, -1.1), mean(0.0, 0.0);
    Eigen::Matrix2d c;
    c << 1, r, r, 1;
    CHECK(mvn_cdf(u, mean, c) == doctest::Approx(oracle::bvn_cdf(0.3, -1.1, r)).epsilon(1e-9));
  }
  // Non-standard mean and scale.
  {
    Eigen::Vector2d u(2.0, 1.0), mean(1.0, -1.0);
    Eigen::Matrix2d c;
    c << 4.0, 1.2, 1.2, 1.0;  // correlation 0.6
    CHECK(mvn_cdf(u, mean, c) == doctest::Approx(oracle::bvn_cdf(0.5, 2.0, 0.6)).epsilon(1e-9));
  }
  // Three-dimensional orthant probability: 1/8 + sum asin(r_ij) / (4 pi).
  {
    Eigen::Matrix3d c;
    c << 1, 0.3, 0.5, 0.3, 1, -0.2, 0.5, -0.2, 1;
    const double expected = 0.125 + (std::asin(0.3) + std::asin(0.5) + std::asin(-0.2)) / (4.0 * oracle::kPi);
    CHECK(mvn_cdf(Eigen::Vector3d::Zero(), Eigen::Vector3d::Zero(), c) == doctest::Approx(expected).epsilon(1e-9));
  }
  // Infinite limits marginalize.
  {
    Eigen::Vector3d u(0.7, oracle::kInf, -0.4);
    Eigen::Matrix3d c;
    c << 1, 0.3, 0.5, 0.3, 1, -0.2, 0.5, -0.2, 1;
    CHECK(mvn_cdf(u, Eigen::Vector3d::Zero(), c) == doctest::Approx(oracle::bvn_cdf(0.7, -0.4, 0.5)).epsilon(1e-9));
    u << 0.7, -oracle::kInf, -0.4;
    CHECK(mvn_cdf(u, Eigen::Vector3d::Zero(), c) == 0.0);
  }
}
