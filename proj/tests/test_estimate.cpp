#include <cmath>
#include <cstdlib>
#include <random>
#include <vector>

#include "doctest.h"
#include "mcrm/errors.hpp"
#include "mcrm/estimate.hpp"
#include "mcrm/simulate.hpp"
#include "oracles.hpp"

using namespace mcrm;

namespace {

// Policies with a binary and a continuous covariate in both regressions,
// simulated at the given loadings.
Portfolio covariate_portfolio(int policies, int years, const Eigen::Vector3d& beta, const Eigen::Vector3d& gamma,
                              double nu_sev, const ThetaParams& theta, std::uint64_t seed) {
  Portfolio out;
  out.frequency_terms = {"(Intercept)", "urban", "age"};
  out.severity_terms = {"(Intercept)", "urban", "age"};
  const MarginalLaws laws = MarginalLaws::poisson_weibull(nu_sev);
  std::mt19937_64 cov_rng(seed);
  std::bernoulli_distribution urban(0.4);
  std::uniform_real_distribution<double> age(-1.0, 1.0);
  for (int i = 0; i < policies; ++i) {
    const Eigen::Vector3d x(1.0, urban(cov_rng) ? 1.0 : 0.0, age(cov_rng));
    std::vector<YearMargins> margins(years, YearMargins{std::exp(x.dot(beta)), std::exp(x.dot(gamma))});
    Rng rng = make_stream(seed, static_cast<std::uint64_t>(i));
    PolicyHistory h = simulate_policy(CopulaSpec{theta, CopulaFamily::gaussian, 0.0}, laws, margins, rng);
    h.id = "P" + std::to_string(i + 1);
    for (auto& y : h.years) {
      y.freq_covariates = x;
      y.sev_covariates = x;
    }
    out.policies.push_back(std::move(h));
  }
  return out;
}

Portfolio scenario_portfolio(const ScenarioConfig& c) {
  Portfolio p;
  p.policies = simulate_portfolio(c).policies;
  return p;
}

ModelParams scenario_truth(const ScenarioConfig& c) {
  ModelParams m;
  m.marginal.beta = Eigen::VectorXd::Constant(1, std::log(c.lambda0));
  m.marginal.gamma = Eigen::VectorXd::Constant(1, std::log(c.xi0));
  m.marginal.nu_sev = c.nu_sev;
  m.copula.theta = c.theta;
  return m;
}

struct GlmData {
  Eigen::MatrixXd X;
  Eigen::VectorXd counts;
  Eigen::MatrixXd W;
  Eigen::VectorXd amounts;
};

GlmData glm_data(const Portfolio& p) {
  std::vector<Eigen::VectorXd> xs, ws;
  std::vector<double> ns, ys;
  for (const auto& pol : p.policies)
    for (const auto& y : pol.years) {
      xs.push_back(y.freq_covariates);
      ns.push_back(y.count);
      for (double s : y.severities) {
        ws.push_back(y.sev_covariates);
        ys.push_back(s);
      }
    }
  GlmData d;
  d.X.resize(static_cast<Eigen::Index>(xs.size()), xs[0].size());
  d.counts.resize(static_cast<Eigen::Index>(ns.size()));
  for (std::size_t i = 0; i < xs.size(); ++i) {
    d.X.row(static_cast<Eigen::Index>(i)) = xs[i].transpose();
    d.counts(static_cast<Eigen::Index>(i)) = ns[i];
  }
  d.W.resize(static_cast<Eigen::Index>(ws.size()), ws[0].size());
  d.amounts.resize(static_cast<Eigen::Index>(ys.size()));
  for (std::size_t i = 0; i < ws.size(); ++i) {
    d.W.row(static_cast<Eigen::Index>(i)) = ws[i].transpose();
    d.amounts(static_cast<Eigen::Index>(i)) = ys[i];
  }
  return d;
}

double poisson_loglik(const Eigen::MatrixXd& X, const Eigen::VectorXd& n, const Eigen::VectorXd& beta) {
  double ll = 0;
  for (Eigen::Index i = 0; i < n.size(); ++i) {
    const double eta = X.row(i).dot(beta);
    ll += n(i) * eta - std::exp(eta) - std::lgamma(n(i) + 1.0);
  }
  return ll;
}

}  // namespace

TEST_CASE("variant names and free loadings") {
  CHECK(nested_variant_from_string("full") == NestedVariant::full);
  CHECK(nested_variant_from_string("nested1") == NestedVariant::shared_only);
  CHECK(nested_variant_from_string("nested2") == NestedVariant::within_only);
  CHECK(nested_variant_from_string("nested3") == NestedVariant::independent);
  CHECK_THROWS_AS(nested_variant_from_string("nested4"), ValidationError);
  CHECK(free_thetas(NestedVariant::shared_only) == std::array<bool, 4>{true, true, false, false});
  CHECK(free_thetas(NestedVariant::within_only) == std::array<bool, 4>{false, false, true, true});
  for (auto v : {NestedVariant::full, NestedVariant::shared_only, NestedVariant::within_only,
                 NestedVariant::independent})
    CHECK(nested_variant_from_string(to_string(v)) == v);
}

TEST_CASE("without dependence the likelihood is the Poisson plus Weibull regression likelihood") {
  const Eigen::Vector3d beta(0.2, 0.3, -0.4), gamma(7.5, 0.2, 0.3);
  const Portfolio p = covariate_portfolio(300, 3, beta, gamma, 0.8, {}, 3);
  const GlmData d = glm_data(p);
  ModelParams m;
  m.marginal.beta = Eigen::Vector3d(0.25, 0.2, -0.3);
  m.marginal.gamma = Eigen::Vector3d(7.4, 0.1, 0.2);
  m.marginal.nu_sev = 0.9;
  Eigen::VectorXd wp(4);
  wp << m.marginal.gamma, std::log(m.marginal.nu_sev);
  const double expected = -(poisson_loglik(d.X, d.counts, m.marginal.beta) + oracle::weibull_loglik(d.W, d.amounts, wp));
  CHECK(neg_log_likelihood(m, p.policies) == doctest::Approx(expected).epsilon(1e-10));
}

TEST_CASE("a single claim-free year has negative log-likelihood lambda") {
  Portfolio p;
  PolicyHistory h;
  h.id = "solo";
  YearClaim y;
  y.year = 1;
  y.count = 0;
  y.freq_covariates = Eigen::VectorXd::Ones(1);
  y.sev_covariates = Eigen::VectorXd::Ones(1);
  h.years.push_back(y);
  p.policies.push_back(h);
  ModelParams m;
  m.marginal.beta = Eigen::VectorXd::Constant(1, std::log(1.7));
  m.marginal.gamma = Eigen::VectorXd::Constant(1, 8.0);
  m.marginal.nu_sev = 0.7;
  for (const ThetaParams th : {ThetaParams{}, ThetaParams{0.5, 0.4, 0.3, -0.6}, ThetaParams{0.9, 0.1, -0.4, 0.8}}) {
    m.copula.theta = th;
    CHECK(neg_log_likelihood(m, p.policies) == doctest::Approx(1.7).epsilon(1e-12));
  }
}

TEST_CASE("likelihood input errors") {
  ScenarioConfig c = scenario_preset(1);
  c.policies = 20;
  Portfolio p = scenario_portfolio(c);
  ModelParams m = scenario_truth(c);
  SUBCASE("non-finite term names the policy") {
    p.policies[7].years[0].count = 1;
    p.policies[7].years[0].severities = {1e300};
    try {
      neg_log_likelihood(m, p.policies);
      FAIL("expected NumericalError");
    } catch (const NumericalError& e) {
      CHECK(std::string(e.what()).find("'P8'") != std::string::npos);
    }
  }
  SUBCASE("inadmissible loadings") {
    m.copula.theta = {0.9, 0.1, 0.5, 0.1};
    CHECK_THROWS_AS(neg_log_likelihood(m, p.policies), ValidationError);
  }
  SUBCASE("policy without years") {
    p.policies[3].years.clear();
    CHECK_THROWS_AS(neg_log_likelihood(m, p.policies), ValidationError);
  }
  SUBCASE("severity count mismatch") {
    p.policies[2].years[1].count += 1;
    CHECK_THROWS_AS(neg_log_likelihood(m, p.policies), ValidationError);
  }
}

TEST_CASE("all-zero counts leave the severity part unidentified") {
  ScenarioConfig c = scenario_preset(1);
  c.policies = 30;
  Portfolio p = scenario_portfolio(c);
  for (auto& pol : p.policies)
    for (auto& y : pol.years) {
      y.count = 0;
      y.severities.clear();
    }
  CHECK_THROWS_AS(fit(p, std::nullopt, FitOptions{}), ValidationError);
  CHECK_THROWS_AS(fit_independent_marginals(p), ValidationError);
}

TEST_CASE("parallel and sequential likelihoods are identical") {
  ScenarioConfig c = scenario_preset(3);
  c.policies = 400;
  const Portfolio p = scenario_portfolio(c);
  const ModelParams m = scenario_truth(c);
  const double one = neg_log_likelihood(m, p.policies, {}, 1);
  const double four = neg_log_likelihood(m, p.policies, {}, 4);
  CHECK(one == four);
}

TEST_CASE("reparameterization round-trips") {
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int it = 0; it < 500; ++it) {
    double t1, t2, t3, t4;
    do {
      t1 = u(rng);
      t3 = u(rng);
    } while (t1 * t1 + t3 * t3 >= 0.995);
    do {
      t2 = u(rng);
      t4 = u(rng);
    } while (t2 * t2 + t4 * t4 >= 0.995);
    ModelParams m;
    m.marginal.beta = Eigen::Vector2d(u(rng), u(rng));
    m.marginal.gamma = Eigen::Vector3d(8.0 + u(rng), u(rng), u(rng));
    m.marginal.nu_sev = std::exp(u(rng));
    m.copula.theta = {t1, t2, t3, t4};
    const ParameterMap map(NestedVariant::full, m);
    CHECK(map.size() == 2 + 3 + 1 + 4);
    const ModelParams back = map.from_unconstrained(map.to_unconstrained(m));
    const Eigen::VectorXd a = map.to_natural(m), b = map.to_natural(back);
    CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
    const ModelParams nat = map.from_natural(a);
    CHECK((map.to_natural(nat) - a).cwiseAbs().maxCoeff() == 0.0);
    // Any unconstrained vector maps to admissible loadings.
    Eigen::VectorXd z = map.to_unconstrained(m);
    for (Eigen::Index k = 6; k < 10; ++k) z(k) = 8.0 * u(rng);
    CHECK(check_admissible(map.from_unconstrained(z).copula.theta));
  }
  ModelParams m;
  m.marginal.beta = Eigen::VectorXd::Zero(1);
  m.marginal.gamma = Eigen::VectorXd::Zero(1);
  m.copula.theta = {0.3, 0.4, 0.0, 0.0};
  const ParameterMap nested(NestedVariant::shared_only, m);
  CHECK(nested.size() == 5);
  CHECK(nested.theta_position(0) == 3);
  CHECK(nested.theta_position(1) == 4);
  CHECK(nested.theta_position(2) == -1);
  CHECK(nested.from_unconstrained(nested.to_unconstrained(m)).copula.theta.theta3 == 0.0);
}

TEST_CASE("the independence model reproduces separate GLM fits and their standard errors") {
  const Eigen::Vector3d beta(0.3, 0.4, -0.5), gamma(8.0, 0.3, 0.4);
  const Portfolio p = covariate_portfolio(3000, 3, beta, gamma, 0.7, {}, 11);
  const GlmData d = glm_data(p);
  Eigen::MatrixXd poisson_cov, weibull_hess;
  const Eigen::VectorXd b = oracle::poisson_irls(d.X, d.counts, &poisson_cov);
  const Eigen::VectorXd w = oracle::weibull_newton(d.W, d.amounts, &weibull_hess);

  FitOptions opt;
  opt.variant = NestedVariant::independent;
  const FitResult r = fit(p, std::nullopt, opt);
  REQUIRE(r.converged);
  for (int k = 0; k < 3; ++k) {
    CHECK(r.estimates.marginal.beta(k) == doctest::Approx(b(k)).epsilon(1e-4));
    CHECK(r.estimates.marginal.gamma(k) == doctest::Approx(w(k)).epsilon(1e-4));
  }
  CHECK(std::log(r.estimates.marginal.nu_sev) == doctest::Approx(w(3)).epsilon(1e-4));
  CHECK(r.parameter_names == std::vector<std::string>{"(Intercept)", "urban", "age", "(Intercept)", "urban", "age", "nu"});

  // Textbook standard errors: Poisson (X' diag(mu) X)^{-1}; Weibull inverse
  // observed information on (gamma, log nu), mapped to nu by the delta method.
  const Eigen::MatrixXd weibull_cov = (-weibull_hess).inverse();
  for (int k = 0; k < 3; ++k) {
    CHECK(r.table[k].std_error == doctest::Approx(std::sqrt(poisson_cov(k, k))).epsilon(0.05));
    CHECK(r.table[3 + k].std_error == doctest::Approx(std::sqrt(weibull_cov(k, k))).epsilon(0.05));
  }
  const double nu_se = r.estimates.marginal.nu_sev * std::sqrt(weibull_cov(3, 3));
  CHECK(r.table[6].std_error == doctest::Approx(nu_se).epsilon(0.05));
}

TEST_CASE("fit output invariants and the gradient at the solution") {
  ScenarioConfig c = scenario_preset(1);
  c.seed = 17;
  const Portfolio p = scenario_portfolio(c);
  const FitResult r = fit(p, std::nullopt, FitOptions{});
  REQUIRE(r.converged);
  CHECK(r.parameter_names ==
        std::vector<std::string>{"(Intercept)", "(Intercept)", "nu", "theta1", "theta2", "theta3", "theta4"});
  CHECK(r.log_likelihood == doctest::Approx(-neg_log_likelihood(r.estimates, p.policies)).epsilon(1e-14));

  const Eigen::MatrixXd& cov = r.covariance;
  CHECK((cov - cov.transpose()).cwiseAbs().maxCoeff() < 1e-12 * cov.cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  CHECK(eig.eigenvalues().minCoeff() > 0.0);
  for (const auto& row : r.table) {
    CAPTURE(row.name);
    CHECK(row.p_value >= 0.0);
    CHECK(row.p_value <= 1.0);
    CHECK(row.t_stat == doctest::Approx(row.estimate / row.std_error).epsilon(1e-14));
    CHECK(row.p_value == doctest::Approx(std::erfc(std::abs(row.t_stat) / std::sqrt(2.0))).epsilon(1e-9));
  }

  // Gradient in the optimizer's coordinates, by central differences.
  const ParameterMap map(NestedVariant::full, r.estimates);
  const Eigen::VectorXd u = map.to_unconstrained(r.estimates);
  auto nll = [&](const Eigen::VectorXd& v) { return neg_log_likelihood(map.from_unconstrained(v), p.policies); };
  const double f = nll(u);
  Eigen::VectorXd g(u.size());
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    const double h = 1e-6 * (1.0 + std::abs(u(i)));
    Eigen::VectorXd a = u, b = u;
    a(i) += h;
    b(i) -= h;
    g(i) = (nll(a) - nll(b)) / (2.0 * h);
  }
  CHECK(g.cwiseAbs().maxCoeff() < 1e-4 * (1.0 + std::abs(f)));

  // The optimum beats the truth and the independence start.
  CHECK(-r.log_likelihood <= neg_log_likelihood(scenario_truth(c), p.policies));
  const RhoInference rho = rho_inference(r);
  const RhoParams direct = rho_from_theta(r.estimates.copula.theta);
  const auto arr = direct.as_array();
  for (int k = 0; k < 5; ++k) CHECK(rho.rows[k].estimate == arr[k]);
}

TEST_CASE("the true loadings beat independence in the likelihood") {
  int wins = 0;
  for (int rep = 0; rep < 100; ++rep) {
    ScenarioConfig c = scenario_preset(1);
    c.seed = 5000 + rep;
    const Portfolio p = scenario_portfolio(c);
    const ModelParams truth = scenario_truth(c);
    ModelParams indep = truth;
    indep.copula.theta = {};
    if (neg_log_likelihood(truth, p.policies) < neg_log_likelihood(indep, p.policies)) ++wins;
  }
  CHECK(wins >= 95);
}

TEST_CASE("delta-method inference for the correlations") {
  SUBCASE("zero loadings give zero correlations and zero standard errors") {
    Eigen::Matrix4d cov;
    cov << 0.04, 0.01, 0.0, 0.002, 0.01, 0.05, 0.003, 0.0, 0.0, 0.003, 0.02, 0.001, 0.002, 0.0, 0.001, 0.03;
    const RhoInference r = rho_inference(ThetaParams{}, cov);
    for (const auto& row : r.rows) {
      CHECK(row.estimate == 0.0);
      CHECK(row.std_error == 0.0);
    }
  }
  SUBCASE("covariance is J Cov J' with a finite-difference Jacobian") {
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> u(-0.6, 0.6);
    for (int it = 0; it < 50; ++it) {
      const ThetaParams th{u(rng), u(rng), u(rng), u(rng)};
      Eigen::Matrix4d a = Eigen::Matrix4d::Random();
      const Eigen::Matrix4d cov = 0.01 * a * a.transpose();
      Eigen::Matrix<double, 5, 4> jac;
      for (int k = 0; k < 4; ++k) {
        auto up = th.as_array(), down = th.as_array();
        up[k] += 1e-6;
        down[k] -= 1e-6;
        const auto ru = rho_from_theta(ThetaParams::from_array(up)).as_array();
        const auto rd = rho_from_theta(ThetaParams::from_array(down)).as_array();
        for (int i = 0; i < 5; ++i) jac(i, k) = (ru[i] - rd[i]) / 2e-6;
      }
      const Eigen::Matrix<double, 5, 5> expected = jac * cov * jac.transpose();
      const RhoInference r = rho_inference(th, cov);
      CHECK((r.covariance - expected).cwiseAbs().maxCoeff() < 1e-9);
      for (int i = 0; i < 5; ++i) CHECK(r.rows[i].std_error == doctest::Approx(std::sqrt(expected(i, i))).epsilon(1e-6));
    }
  }
  SUBCASE("reference loadings give the reference correlations") {
    const RhoInference r = rho_inference(ThetaParams{0.263, 0.057, 0.409, 0.445}, Eigen::Matrix4d::Identity() * 1e-4);
    const double table[5] = {0.1968, 0.2015, 0.0690, 0.0149, 0.0032};
    for (int i = 0; i < 5; ++i) CHECK(std::abs(r.rows[i].estimate - table[i]) < 5e-4);
  }
}

// sqrt(n) behaviour: quadrupling the portfolio halves the Monte-Carlo standard
// deviation of the shared-factor loading.
TEST_CASE("estimator spread shrinks at the square-root rate") {
  auto spread = [](int policies, int reps, std::uint64_t seed0) {
    std::vector<double> est;
    for (int rep = 0; rep < reps; ++rep) {
      ScenarioConfig c = scenario_preset(2);
      c.policies = policies;
      c.seed = seed0 + rep;
      FitOptions opt;
      opt.variant = NestedVariant::shared_only;
      opt.compute_standard_errors = false;
      const FitResult r = fit(scenario_portfolio(c), std::nullopt, opt);
      REQUIRE(r.converged);
      est.push_back(r.estimates.copula.theta.theta1);
    }
    double m = 0;
    for (double x : est) m += x;
    m /= static_cast<double>(est.size());
    double v = 0;
    for (double x : est) v += (x - m) * (x - m);
    return std::sqrt(v / static_cast<double>(est.size() - 1));
  };
  const double small = spread(200, 80, 90000);
  const double large = spread(800, 80, 95000);
  const double ratio = small / large;
  MESSAGE("sd(theta1) at I=200: " << small << ", at I=800: " << large << ", ratio " << ratio);
  CHECK(ratio > 2.0 * 0.7);
  CHECK(ratio < 2.0 * 1.3);
}
