#include "mcrm/estimate.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "mcrm/errors.hpp"
#include "mcrm/parallel.hpp"
#include "mcrm/special.hpp"

namespace mcrm {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Neumaier-compensated sum in index order.
double ordered_sum(const std::vector<double>& v) {
  double sum = 0.0, comp = 0.0;
  for (double x : v) {
    const double t = sum + x;
    if (std::abs(sum) >= std::abs(x)) comp += (sum - t) + x;
    else comp += (x - t) + sum;
    sum = t;
  }
  return sum + comp;
}

double two_sided_p(double t) {
  if (!std::isfinite(t)) return std::isnan(t) ? 1.0 : 0.0;
  return std::min(1.0, 2.0 * norm_sf(std::abs(t)));
}

}  // namespace

std::string to_string(NestedVariant v) {
  switch (v) {
    case NestedVariant::full: return "full";
    case NestedVariant::shared_only: return "nested1";
    case NestedVariant::within_only: return "nested2";
    case NestedVariant::independent: return "nested3";
  }
  return "full";
}

NestedVariant nested_variant_from_string(const std::string& name) {
  if (name == "full") return NestedVariant::full;
  if (name == "nested1" || name == "shared_only") return NestedVariant::shared_only;
  if (name == "nested2" || name == "within_only") return NestedVariant::within_only;
  if (name == "nested3" || name == "independent") return NestedVariant::independent;
  throw ValidationError("unknown model variant '" + name + "' (full, nested1, nested2, nested3)");
}

std::array<bool, 4> free_thetas(NestedVariant v) {
  switch (v) {
    case NestedVariant::full: return {true, true, true, true};
    case NestedVariant::shared_only: return {true, true, false, false};
    case NestedVariant::within_only: return {false, false, true, true};
    case NestedVariant::independent: return {false, false, false, false};
  }
  return {};
}

Eigen::Matrix4d FitResult::theta_covariance() const {
  Eigen::Matrix4d c = Eigen::Matrix4d::Zero();
  std::array<int, 4> pos{-1, -1, -1, -1};
  for (int k = 0; k < 4; ++k) {
    const std::string name = "theta" + std::to_string(k + 1);
    for (std::size_t i = 0; i < parameter_names.size(); ++i)
      if (parameter_names[i] == name) pos[k] = static_cast<int>(i);
  }
  if (covariance.size() == 0) return c;
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j)
      if (pos[i] >= 0 && pos[j] >= 0) c(i, j) = covariance(pos[i], pos[j]);
  return c;
}

LikelihoodValue evaluate_log_likelihood(const ModelParams& params, const std::vector<PolicyHistory>& data,
                                        const DensityQuadrature& quad, unsigned threads) {
  if (!(params.marginal.nu_sev > 0.0)) throw ValidationError("severity shape must be positive");
  if (!check_admissible(params.copula.theta)) throw ValidationError("inadmissible dependence parameters");
  const MarginalLaws laws = MarginalLaws::from(params.marginal);
  std::vector<double> terms(data.size());
  std::vector<DensityDiagnostics> diags(data.size());
  parallel_for(
      data.size(),
      [&](std::size_t i) {
        const auto margins = year_margins(data[i], params.marginal);
        const LogDensity d = log_density(data[i], margins, laws, params.copula, quad);
        terms[i] = d.value;
        diags[i] = d.diagnostics;
      },
      threads);
  LikelihoodValue out;
  for (std::size_t i = 0; i < data.size(); ++i) {
    out.diagnostics += diags[i];
    if (!std::isfinite(terms[i]) && !out.bad_policy) out.bad_policy = i;
  }
  out.log_likelihood = out.bad_policy ? -kInf : ordered_sum(terms);
  return out;
}

double neg_log_likelihood(const ModelParams& params, const std::vector<PolicyHistory>& data,
                          const DensityQuadrature& quad, unsigned threads) {
  for (const auto& p : data)
    if (p.years.empty()) throw ValidationError("policy '" + p.id + "' has no years");
  const LikelihoodValue v = evaluate_log_likelihood(params, data, quad, threads);
  if (v.bad_policy)
    throw NumericalError("log density is not finite for policy '" + data[*v.bad_policy].id + "'");
  return -v.log_likelihood;
}

// ---------------------------------------------------------------------------

ParameterMap::ParameterMap(NestedVariant variant, const ModelParams& base)
    : variant_(variant), base_(base), free_(free_thetas(variant)) {
  p_ = base.marginal.beta.size();
  q_ = base.marginal.gamma.size();
  size_ = p_ + q_ + 1;
  for (int k = 0; k < 4; ++k)
    if (free_[k]) theta_pos_[k] = static_cast<int>(size_++);
}

Eigen::VectorXd ParameterMap::to_unconstrained(const ModelParams& p) const {
  Eigen::VectorXd u(size_);
  u.head(p_) = p.marginal.beta;
  u.segment(p_, q_) = p.marginal.gamma;
  u(p_ + q_) = std::log(p.marginal.nu_sev);
  const ThetaParams& t = p.copula.theta;
  // Pair (theta1, theta3) -> (a1, b1); pair (theta2, theta4) -> (a2, b2).
  const double a1 = std::atanh(t.theta1), a2 = std::atanh(t.theta2);
  const double b1 = std::atanh(t.theta3 / std::sqrt(1.0 - t.theta1 * t.theta1));
  const double b2 = std::atanh(t.theta4 / std::sqrt(1.0 - t.theta2 * t.theta2));
  const double coords[4] = {a1, a2, b1, b2};
  for (int k = 0; k < 4; ++k)
    if (theta_pos_[k] >= 0) u(theta_pos_[k]) = coords[k];
  return u;
}

ModelParams ParameterMap::from_unconstrained(const Eigen::VectorXd& u) const {
  ModelParams p = base_;
  p.marginal.beta = u.head(p_);
  p.marginal.gamma = u.segment(p_, q_);
  p.marginal.nu_sev = std::exp(u(p_ + q_));
  double coords[4] = {0.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < 4; ++k)
    if (theta_pos_[k] >= 0) coords[k] = u(theta_pos_[k]);
  const double t1 = std::tanh(coords[0]), t2 = std::tanh(coords[1]);
  p.copula.theta = {t1, t2, std::tanh(coords[2]) * std::sqrt(1.0 - t1 * t1),
                    std::tanh(coords[3]) * std::sqrt(1.0 - t2 * t2)};
  return p;
}

Eigen::VectorXd ParameterMap::to_natural(const ModelParams& p) const {
  Eigen::VectorXd v(size_);
  v.head(p_) = p.marginal.beta;
  v.segment(p_, q_) = p.marginal.gamma;
  v(p_ + q_) = p.marginal.nu_sev;
  const auto th = p.copula.theta.as_array();
  for (int k = 0; k < 4; ++k)
    if (theta_pos_[k] >= 0) v(theta_pos_[k]) = th[k];
  return v;
}

ModelParams ParameterMap::from_natural(const Eigen::VectorXd& v) const {
  ModelParams p = base_;
  p.marginal.beta = v.head(p_);
  p.marginal.gamma = v.segment(p_, q_);
  p.marginal.nu_sev = v(p_ + q_);
  std::array<double, 4> th{0.0, 0.0, 0.0, 0.0};
  for (int k = 0; k < 4; ++k)
    if (theta_pos_[k] >= 0) th[k] = v(theta_pos_[k]);
  p.copula.theta = ThetaParams::from_array(th);
  return p;
}

std::vector<std::string> ParameterMap::natural_names(const Portfolio& portfolio) const {
  std::vector<std::string> names;
  for (Eigen::Index i = 0; i < p_; ++i)
    names.push_back(static_cast<std::size_t>(i) < portfolio.frequency_terms.size() ? portfolio.frequency_terms[i]
                                                                                    : "beta" + std::to_string(i));
  for (Eigen::Index i = 0; i < q_; ++i)
    names.push_back(static_cast<std::size_t>(i) < portfolio.severity_terms.size() ? portfolio.severity_terms[i]
                                                                                   : "gamma" + std::to_string(i));
  names.push_back("nu");
  for (int k = 0; k < 4; ++k)
    if (theta_pos_[k] >= 0) names.push_back("theta" + std::to_string(k + 1));
  return names;
}

// ---------------------------------------------------------------------------

MarginalParams fit_independent_marginals(const Portfolio& data) {
  Eigen::Index p = -1, q = -1;
  std::vector<const YearClaim*> rows;
  long total_claims = 0;
  for (const auto& pol : data.policies)
    for (const auto& y : pol.years) {
      if (p < 0) {
        p = y.freq_covariates.size();
        q = y.sev_covariates.size();
      }
      if (y.freq_covariates.size() != p || y.sev_covariates.size() != q)
        throw ValidationError("policy '" + pol.id + "': covariate rows have inconsistent lengths");
      rows.push_back(&y);
      total_claims += y.count;
    }
  if (rows.empty()) throw ValidationError("no policy-years to fit");
  if (total_claims == 0)
    throw ValidationError("all claim counts are zero: severity parameters are not identifiable");
  if (p == 0 || q == 0) throw ValidationError("regressions need at least one covariate column");

  MarginalParams out;
  // Poisson regression: Newton-Raphson with step halving on the log likelihood.
  auto poisson_ll = [&](const Eigen::VectorXd& beta) {
    double ll = 0.0;
    for (const auto* y : rows) {
      const double eta = y->freq_covariates.dot(beta);
      ll += y->count * eta - std::exp(eta) - std::lgamma(y->count + 1.0);
    }
    return ll;
  };
  Eigen::VectorXd beta = Eigen::VectorXd::Zero(p);
  double ll = poisson_ll(beta);
  for (int it = 0; it < 100; ++it) {
    Eigen::VectorXd score = Eigen::VectorXd::Zero(p);
    Eigen::MatrixXd info = Eigen::MatrixXd::Zero(p, p);
    for (const auto* y : rows) {
      const double mu = std::exp(y->freq_covariates.dot(beta));
      score += (y->count - mu) * y->freq_covariates;
      info += mu * y->freq_covariates * y->freq_covariates.transpose();
    }
    Eigen::VectorXd step = info.ldlt().solve(score);
    double t = 1.0;
    Eigen::VectorXd next = beta + step;
    double ll_next = poisson_ll(next);
    while (!(ll_next >= ll) && t > 1e-10) {
      t *= 0.5;
      next = beta + t * step;
      ll_next = poisson_ll(next);
    }
    beta = next;
    const double change = ll_next - ll;
    ll = ll_next;
    if (step.lpNorm<Eigen::Infinity>() * t < 1e-12 || std::abs(change) < 1e-14 * (1.0 + std::abs(ll))) break;
  }
  out.beta = beta;

  // Weibull regression on (gamma, log nu).
  const SeverityLaw& weibull = severity_law("weibull");
  std::vector<std::pair<const Eigen::VectorXd*, double>> claims;
  for (const auto* y : rows)
    for (double v : y->severities) claims.emplace_back(&y->sev_covariates, v);
  auto weibull_nll = [&](const Eigen::VectorXd& u) {
    const double nu = std::exp(u(q));
    if (!std::isfinite(nu) || nu <= 0.0) return kInf;
    double s = 0.0;
    for (const auto& [w, y] : claims) {
      const double xi = std::exp(w->dot(u.head(q)));
      if (!std::isfinite(xi) || xi <= 0.0) return kInf;
      s -= weibull.log_pdf(y, xi, nu);
    }
    return std::isfinite(s) ? s : kInf;
  };
  // Start from least squares of log amounts, shifted to the exponential mean.
  Eigen::MatrixXd design(claims.size(), q);
  Eigen::VectorXd logs(claims.size());
  for (std::size_t i = 0; i < claims.size(); ++i) {
    design.row(i) = claims[i].first->transpose();
    logs(i) = std::log(claims[i].second);
  }
  Eigen::VectorXd u0(q + 1);
  u0.head(q) = design.colPivHouseholderQr().solve(logs);
  const Eigen::VectorXd fitted = design * u0.head(q);
  const double shift = std::log((logs - fitted).array().exp().mean());
  const Eigen::VectorXd unit = design.colPivHouseholderQr().solve(Eigen::VectorXd::Ones(claims.size()));
  u0.head(q) += shift * unit;
  u0(q) = 0.0;
  BfgsOptions opts;
  opts.gradient_tolerance = 1e-10;
  const BfgsResult wr = minimize_bfgs(weibull_nll, u0, opts);
  out.gamma = wr.x.head(q);
  out.nu_sev = std::exp(wr.x(q));
  return out;
}

FitResult fit(const Portfolio& data, const std::optional<ModelParams>& init, const FitOptions& options) {
  if (data.policies.empty()) throw ValidationError("no policies to fit");
  long total_claims = 0;
  for (const auto& pol : data.policies) {
    if (pol.years.empty()) throw ValidationError("policy '" + pol.id + "' has no years");
    for (const auto& y : pol.years) total_claims += y.count;
  }
  if (total_claims == 0)
    throw ValidationError("all claim counts are zero: severity parameters are not identifiable");

  FitResult res;
  res.variant = options.variant;
  ModelParams start;
  if (init) {
    start = *init;
  } else {
    start.marginal = fit_independent_marginals(data);
  }
  const auto mask = free_thetas(options.variant);
  {
    auto th = start.copula.theta.as_array();
    for (int k = 0; k < 4; ++k) {
      if (!mask[k]) th[k] = 0.0;
      else if (!init) th[k] = options.theta_start;
    }
    start.copula.theta = ThetaParams::from_array(th);
  }
  if (!check_admissible(start.copula.theta)) throw ValidationError("starting loadings are inadmissible");

  const ParameterMap map(options.variant, start);
  DensityQuadrature quad = options.quadrature;
  auto objective = [&](const Eigen::VectorXd& u) {
    if (!u.allFinite()) return kInf;
    const ModelParams p = map.from_unconstrained(u);
    if (!(p.marginal.nu_sev > 0.0) || !std::isfinite(p.marginal.nu_sev) || !check_admissible(p.copula.theta))
      return kInf;
    const LikelihoodValue v = evaluate_log_likelihood(p, data.policies, quad, options.threads);
    return v.bad_policy ? kInf : -v.log_likelihood;
  };

  const BfgsResult opt = minimize_bfgs(objective, map.to_unconstrained(start), options.optimizer);
  res.estimates = map.from_unconstrained(opt.x);
  res.iterations = opt.iterations;
  res.evaluations = opt.evaluations;
  res.gradient_norm = opt.gradient.size() ? opt.gradient.lpNorm<Eigen::Infinity>() : 0.0;
  res.converged = opt.converged;
  if (!opt.converged) res.warnings.push_back("optimizer: " + opt.message);
  const LikelihoodValue final_value = evaluate_log_likelihood(res.estimates, data.policies, quad, options.threads);
  res.log_likelihood = final_value.log_likelihood;
  res.diagnostics = final_value.diagnostics;

  {
    // Boundary check on the mapped coordinates.
    const ThetaParams& t = res.estimates.copula.theta;
    const double m1 = std::abs(t.theta1), m2 = std::abs(t.theta2);
    const double m3 = std::abs(t.theta3) / std::sqrt(1.0 - t.theta1 * t.theta1);
    const double m4 = std::abs(t.theta4) / std::sqrt(1.0 - t.theta2 * t.theta2);
    const double mapped[4] = {m1, m2, m3, m4};
    for (int k = 0; k < 4; ++k)
      if (mask[k] && mapped[k] > 0.999)
        res.warnings.push_back("theta" + std::to_string(k + 1) + " is adjacent to the admissibility boundary");
  }

  res.parameter_names = map.natural_names(data);
  const Eigen::VectorXd natural = map.to_natural(res.estimates);
  const Eigen::Index n = natural.size();
  res.covariance = Eigen::MatrixXd::Zero(n, n);

  if (options.compute_standard_errors) {
    auto nll_natural = [&](const Eigen::VectorXd& v) {
      const ModelParams p = map.from_natural(v);
      if (!(p.marginal.nu_sev > 0.0) || !check_admissible(p.copula.theta)) return kInf;
      const LikelihoodValue lv = evaluate_log_likelihood(p, data.policies, quad, options.threads);
      return lv.bad_policy ? kInf : -lv.log_likelihood;
    };
    Eigen::VectorXd h(n);
    for (Eigen::Index i = 0; i < n; ++i) h(i) = options.hessian_step * (1.0 + std::abs(natural(i)));
    const double f0 = nll_natural(natural);
    Eigen::MatrixXd hess(n, n);
    Eigen::VectorXd probe = natural;
    auto eval_at = [&](Eigen::Index i, double di, Eigen::Index j, double dj) {
      probe = natural;
      probe(i) += di;
      probe(j) += dj;
      return nll_natural(probe);
    };
    for (Eigen::Index i = 0; i < n; ++i) {
      const double up = eval_at(i, h(i), i, 0.0);
      const double down = eval_at(i, -h(i), i, 0.0);
      hess(i, i) = (up - 2.0 * f0 + down) / (h(i) * h(i));
      for (Eigen::Index j = 0; j < i; ++j) {
        const double pp = eval_at(i, h(i), j, h(j));
        const double pm = eval_at(i, h(i), j, -h(j));
        const double mp = eval_at(i, -h(i), j, h(j));
        const double mm = eval_at(i, -h(i), j, -h(j));
        hess(i, j) = hess(j, i) = (pp - pm - mp + mm) / (4.0 * h(i) * h(j));
      }
    }
    if (!hess.allFinite()) {
      res.warnings.push_back("observed information is not finite (estimate too close to a boundary)");
      res.covariance.setConstant(std::numeric_limits<double>::quiet_NaN());
    } else {
      Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(0.5 * (hess + hess.transpose()));
      Eigen::VectorXd cov_eval(n);
      bool floored = false;
      for (Eigen::Index i = 0; i < n; ++i) {
        const double lam = eig.eigenvalues()(i);
        if (lam > 0.0) {
          cov_eval(i) = 1.0 / lam;
        } else {
          cov_eval(i) = 1e-10;
          floored = true;
        }
      }
      if (floored) res.warnings.push_back("observed information not positive definite; covariance eigenvalues floored at 1e-10");
      res.covariance = eig.eigenvectors() * cov_eval.asDiagonal() * eig.eigenvectors().transpose();
    }
  }

  const Eigen::Index p = res.estimates.marginal.beta.size();
  const Eigen::Index q = res.estimates.marginal.gamma.size();
  for (Eigen::Index i = 0; i < n; ++i) {
    ParameterRow row;
    row.block = i < p ? "frequency" : (i < p + q + 1 ? "severity" : "copula");
    row.name = res.parameter_names[i];
    row.estimate = natural(i);
    row.std_error = options.compute_standard_errors ? std::sqrt(std::max(0.0, res.covariance(i, i)))
                                                    : std::numeric_limits<double>::quiet_NaN();
    row.t_stat = row.estimate / row.std_error;
    row.p_value = two_sided_p(row.t_stat);
    res.table.push_back(row);
  }
  return res;
}

RhoInference rho_inference(const ThetaParams& theta, const Eigen::Matrix4d& theta_covariance) {
  RhoInference out;
  const RhoParams rho = rho_from_theta(theta);
  const auto est = rho.as_array();
  const Eigen::Matrix<double, 5, 4> jac = rho_jacobian(theta);
  out.covariance = jac * theta_covariance * jac.transpose();
  for (int i = 0; i < 5; ++i) {
    RhoRow& row = out.rows[i];
    row.name = "rho" + std::to_string(i + 1);
    row.estimate = est[i];
    row.std_error = std::sqrt(std::max(0.0, out.covariance(i, i)));
    row.t_stat = row.std_error > 0.0 ? row.estimate / row.std_error : std::numeric_limits<double>::quiet_NaN();
    row.p_value = row.std_error > 0.0 ? two_sided_p(row.t_stat) : std::numeric_limits<double>::quiet_NaN();
  }
  return out;
}

RhoInference rho_inference(const FitResult& fit) {
  return rho_inference(fit.estimates.copula.theta, fit.theta_covariance());
}

}  // namespace mcrm
