#include "mcrm/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>
#include <sstream>

#include "json.hpp"

#include "mcrm/errors.hpp"

namespace mcrm {

using nlohmann::json;

namespace {

void reject_unknown(const json& j, const std::set<std::string>& known, const std::string& where) {
  if (!j.is_object()) throw ValidationError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!known.count(it.key())) throw ValidationError("config: unknown key '" + where + it.key() + "'");
}

template <class T>
void read_opt(const json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ValidationError("config: '" + where + key + "' has the wrong type");
  }
}

}  // namespace

DensityQuadrature RunConfig::quadrature() const {
  DensityQuadrature q;
  q.factor = standard_normal_rule(factor_nodes);
  q.mixing = standard_normal_rule(mixing_nodes);
  return q;
}

FitOptions RunConfig::fit_options() const {
  FitOptions o;
  o.variant = variant;
  o.quadrature = quadrature();
  o.optimizer = optimizer;
  o.hessian_step = hessian_step;
  o.theta_start = theta_start;
  o.threads = threads;
  return o;
}

PredictionConfig RunConfig::prediction_config() const {
  PredictionConfig p;
  p.samples = prediction_samples;
  p.seed = seed;
  p.variant = variant;
  return p;
}

RunConfig parse_config(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("config: ") + e.what());
  }
  reject_unknown(j, {"frequency", "severity", "categorical", "copula", "variant", "quadrature", "optimizer",
                     "seed", "test_year", "prediction", "threads"},
                 "");
  RunConfig c;
  if (j.contains("frequency")) {
    const json& f = j["frequency"];
    reject_unknown(f, {"family", "covariates"}, "frequency.");
    read_opt(f, "family", c.count_family, "frequency.");
    read_opt(f, "covariates", c.frequency_covariates, "frequency.");
  }
  if (j.contains("severity")) {
    const json& s = j["severity"];
    reject_unknown(s, {"family", "covariates"}, "severity.");
    read_opt(s, "family", c.severity_family, "severity.");
    read_opt(s, "covariates", c.severity_covariates, "severity.");
  }
  if (j.contains("categorical")) {
    const json& cat = j["categorical"];
    if (!cat.is_object()) throw ValidationError("config: 'categorical' must be an object");
    for (auto it = cat.begin(); it != cat.end(); ++it) {
      const std::string where = "categorical." + it.key() + ".";
      reject_unknown(it.value(), {"levels", "reference"}, where);
      CategoricalSpec spec;
      read_opt(it.value(), "levels", spec.levels, where);
      if (spec.levels.empty()) throw ValidationError("config: '" + where + "levels' must be non-empty");
      spec.reference = spec.levels.front();
      read_opt(it.value(), "reference", spec.reference, where);
      if (std::find(spec.levels.begin(), spec.levels.end(), spec.reference) == spec.levels.end())
        throw ValidationError("config: reference level '" + spec.reference + "' of '" + it.key() +
                              "' is not among its levels");
      if (std::set<std::string>(spec.levels.begin(), spec.levels.end()).size() != spec.levels.size())
        throw ValidationError("config: duplicate levels for '" + it.key() + "'");
      c.categorical[it.key()] = spec;
    }
  }
  if (j.contains("copula")) {
    const json& cp = j["copula"];
    reject_unknown(cp, {"family", "nu_df"}, "copula.");
    std::string family = to_string(c.copula);
    read_opt(cp, "family", family, "copula.");
    c.copula = copula_family_from_string(family);
    read_opt(cp, "nu_df", c.nu_df, "copula.");
  }
  if (j.contains("variant")) {
    std::string v;
    read_opt(j, "variant", v, "");
    c.variant = nested_variant_from_string(v);
  }
  if (j.contains("quadrature")) {
    const json& q = j["quadrature"];
    reject_unknown(q, {"factor_nodes", "mixing_nodes"}, "quadrature.");
    read_opt(q, "factor_nodes", c.factor_nodes, "quadrature.");
    read_opt(q, "mixing_nodes", c.mixing_nodes, "quadrature.");
  }
  if (j.contains("optimizer")) {
    const json& o = j["optimizer"];
    reject_unknown(o,
                   {"max_iterations", "gradient_tolerance", "function_tolerance", "gradient_step", "hessian_step",
                    "theta_start"},
                   "optimizer.");
    read_opt(o, "max_iterations", c.optimizer.max_iterations, "optimizer.");
    read_opt(o, "gradient_tolerance", c.optimizer.gradient_tolerance, "optimizer.");
    read_opt(o, "function_tolerance", c.optimizer.function_tolerance, "optimizer.");
    read_opt(o, "gradient_step", c.optimizer.gradient_step, "optimizer.");
    read_opt(o, "hessian_step", c.hessian_step, "optimizer.");
    read_opt(o, "theta_start", c.theta_start, "optimizer.");
  }
  read_opt(j, "seed", c.seed, "");
  if (j.contains("test_year") && !j["test_year"].is_null()) {
    int y = 0;
    read_opt(j, "test_year", y, "");
    c.test_year = y;
  }
  if (j.contains("prediction")) {
    const json& p = j["prediction"];
    reject_unknown(p, {"samples"}, "prediction.");
    read_opt(p, "samples", c.prediction_samples, "prediction.");
  }
  read_opt(j, "threads", c.threads, "");

  count_law(c.count_family);
  severity_law(c.severity_family);
  if (c.copula == CopulaFamily::t && !(c.nu_df > 0)) throw ValidationError("config: copula.nu_df must be positive");
  if (c.factor_nodes < 2 || c.factor_nodes > 400) throw ValidationError("config: quadrature.factor_nodes out of [2, 400]");
  if (c.mixing_nodes < 2 || c.mixing_nodes > 400) throw ValidationError("config: quadrature.mixing_nodes out of [2, 400]");
  if (c.prediction_samples < 1) throw ValidationError("config: prediction.samples must be >= 1");
  if (c.optimizer.max_iterations < 1) throw ValidationError("config: optimizer.max_iterations must be >= 1");
  for (const auto& [name, spec] : c.categorical) {
    bool used = std::find(c.frequency_covariates.begin(), c.frequency_covariates.end(), name) !=
                    c.frequency_covariates.end() ||
                std::find(c.severity_covariates.begin(), c.severity_covariates.end(), name) !=
                    c.severity_covariates.end();
    if (!used) throw ValidationError("config: categorical column '" + name + "' is not used by either margin");
  }
  return c;
}

RunConfig load_config(const std::string& path) {
  try {
    return parse_config(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string config_to_json(const RunConfig& c) {
  json j;
  j["frequency"] = {{"family", c.count_family}, {"covariates", c.frequency_covariates}};
  j["severity"] = {{"family", c.severity_family}, {"covariates", c.severity_covariates}};
  json cat = json::object();
  for (const auto& [name, spec] : c.categorical) cat[name] = {{"levels", spec.levels}, {"reference", spec.reference}};
  j["categorical"] = cat;
  j["copula"] = {{"family", to_string(c.copula)}, {"nu_df", c.nu_df}};
  j["variant"] = to_string(c.variant);
  j["quadrature"] = {{"factor_nodes", c.factor_nodes}, {"mixing_nodes", c.mixing_nodes}};
  j["optimizer"] = {{"max_iterations", c.optimizer.max_iterations},
                    {"gradient_tolerance", c.optimizer.gradient_tolerance},
                    {"function_tolerance", c.optimizer.function_tolerance},
                    {"gradient_step", c.optimizer.gradient_step},
                    {"hessian_step", c.hessian_step},
                    {"theta_start", c.theta_start}};
  j["seed"] = c.seed;
  j["test_year"] = c.test_year ? json(*c.test_year) : json(nullptr);
  j["prediction"] = {{"samples", c.prediction_samples}};
  j["threads"] = c.threads;
  return j.dump(2) + "\n";
}

ParamsFile params_from_fit(const FitResult& fit, const Portfolio& portfolio) {
  ParamsFile p;
  p.params = fit.estimates;
  p.frequency_terms = portfolio.frequency_terms;
  p.severity_terms = portfolio.severity_terms;
  p.variant = fit.variant;
  p.theta_covariance = fit.theta_covariance();
  p.log_likelihood = fit.log_likelihood;
  return p;
}

namespace {

json vec_json(const Eigen::VectorXd& v) {
  json a = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v[i]);
  return a;
}

Eigen::VectorXd json_vec(const json& a, const std::string& what) {
  if (!a.is_array()) throw ValidationError("params: '" + what + "' must be an array");
  Eigen::VectorXd v(static_cast<Eigen::Index>(a.size()));
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (!a[i].is_number()) throw ValidationError("params: '" + what + "' must contain numbers");
    v[static_cast<Eigen::Index>(i)] = a[i].get<double>();
  }
  return v;
}

}  // namespace

std::string params_to_json(const ParamsFile& p) {
  json j;
  const auto& m = p.params.marginal;
  j["frequency"] = {{"family", m.count_family}, {"terms", p.frequency_terms}, {"beta", vec_json(m.beta)}};
  j["severity"] = {
      {"family", m.severity_family}, {"terms", p.severity_terms}, {"gamma", vec_json(m.gamma)}, {"nu", m.nu_sev}};
  const auto& c = p.params.copula;
  j["copula"] = {{"family", to_string(c.family)},
                 {"nu_df", c.nu_df},
                 {"theta", {c.theta.theta1, c.theta.theta2, c.theta.theta3, c.theta.theta4}}};
  j["variant"] = to_string(p.variant);
  if (p.theta_covariance) {
    json rows = json::array();
    for (int r = 0; r < 4; ++r) {
      json row = json::array();
      for (int k = 0; k < 4; ++k) row.push_back((*p.theta_covariance)(r, k));
      rows.push_back(row);
    }
    j["theta_covariance"] = rows;
  }
  if (p.log_likelihood) j["log_likelihood"] = *p.log_likelihood;
  return j.dump(2) + "\n";
}

ParamsFile parse_params(const std::string& json_text) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw ValidationError(std::string("params: ") + e.what());
  }
  reject_unknown(j, {"frequency", "severity", "copula", "variant", "theta_covariance", "log_likelihood"}, "");
  for (const char* key : {"frequency", "severity", "copula"})
    if (!j.contains(key)) throw ValidationError(std::string("params: missing '") + key + "'");
  ParamsFile p;
  auto& m = p.params.marginal;
  try {
    const json& f = j["frequency"];
    reject_unknown(f, {"family", "terms", "beta"}, "frequency.");
    if (f.contains("family")) m.count_family = f["family"].get<std::string>();
    if (f.contains("terms")) p.frequency_terms = f["terms"].get<std::vector<std::string>>();
    if (!f.contains("beta")) throw ValidationError("params: missing 'frequency.beta'");
    m.beta = json_vec(f["beta"], "frequency.beta");

    const json& s = j["severity"];
    reject_unknown(s, {"family", "terms", "gamma", "nu"}, "severity.");
    if (s.contains("family")) m.severity_family = s["family"].get<std::string>();
    if (s.contains("terms")) p.severity_terms = s["terms"].get<std::vector<std::string>>();
    if (!s.contains("gamma") || !s.contains("nu")) throw ValidationError("params: missing 'severity.gamma' or 'severity.nu'");
    m.gamma = json_vec(s["gamma"], "severity.gamma");
    m.nu_sev = s["nu"].get<double>();

    const json& c = j["copula"];
    reject_unknown(c, {"family", "nu_df", "theta"}, "copula.");
    if (c.contains("family")) p.params.copula.family = copula_family_from_string(c["family"].get<std::string>());
    if (c.contains("nu_df")) p.params.copula.nu_df = c["nu_df"].get<double>();
    if (!c.contains("theta")) throw ValidationError("params: missing 'copula.theta'");
    Eigen::VectorXd th = json_vec(c["theta"], "copula.theta");
    if (th.size() != 4) throw ValidationError("params: 'copula.theta' needs 4 entries");
    p.params.copula.theta = ThetaParams{th[0], th[1], th[2], th[3]};

    if (j.contains("variant")) p.variant = nested_variant_from_string(j["variant"].get<std::string>());
    if (j.contains("theta_covariance")) {
      Eigen::Matrix4d cov;
      const json& rows = j["theta_covariance"];
      if (!rows.is_array() || rows.size() != 4) throw ValidationError("params: 'theta_covariance' must be 4x4");
      for (int r = 0; r < 4; ++r) {
        Eigen::VectorXd row = json_vec(rows[r], "theta_covariance");
        if (row.size() != 4) throw ValidationError("params: 'theta_covariance' must be 4x4");
        cov.row(r) = row.transpose();
      }
      p.theta_covariance = cov;
    }
    if (j.contains("log_likelihood")) p.log_likelihood = j["log_likelihood"].get<double>();
  } catch (const json::exception& e) {
    throw ValidationError(std::string("params: ") + e.what());
  }
  if (static_cast<std::size_t>(m.beta.size()) != p.frequency_terms.size())
    throw ValidationError("params: frequency.beta and frequency.terms differ in length");
  if (static_cast<std::size_t>(m.gamma.size()) != p.severity_terms.size())
    throw ValidationError("params: severity.gamma and severity.terms differ in length");
  if (!(m.nu_sev > 0)) throw ValidationError("params: severity.nu must be positive");
  if (!check_admissible(p.params.copula.theta))
    throw ValidationError("params: copula.theta is not admissible (theta1^2 + theta3^2 and theta2^2 + theta4^2 must be < 1)");
  count_law(m.count_family);
  severity_law(m.severity_family);
  return p;
}

ParamsFile load_params(const std::string& path) {
  try {
    return parse_params(read_text_file(path));
  } catch (const ValidationError& e) {
    throw ValidationError(path + ": " + e.what());
  }
}

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot open '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_text_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("cannot write '" + path + "'");
  out << content;
  if (!out) throw ValidationError("error writing '" + path + "'");
}

}  // namespace mcrm
