#include "mcrm/portfolio_io.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>

#include "mcrm/csv.hpp"
#include "mcrm/errors.hpp"

namespace mcrm {

namespace {

struct ColumnEncoder {
  int column = -1;
  const CategoricalSpec* categorical = nullptr;
  std::string name;
};

std::vector<ColumnEncoder> encoders(const std::vector<std::string>& covariates, const RunConfig& config,
                                    const csv::Table& table, const std::string& file) {
  std::vector<ColumnEncoder> out;
  std::set<std::string> seen;
  for (const auto& name : covariates) {
    if (!seen.insert(name).second) throw ValidationError("config: covariate '" + name + "' listed twice");
    ColumnEncoder e;
    e.name = name;
    e.column = table.column(name);
    if (e.column < 0) throw ValidationError(file + ": unknown column '" + name + "' referenced by the config");
    auto it = config.categorical.find(name);
    if (it != config.categorical.end()) e.categorical = &it->second;
    out.push_back(e);
  }
  return out;
}

Eigen::VectorXd encode_row(const std::vector<ColumnEncoder>& enc, const std::vector<std::string>& row,
                           std::size_t dim, const std::string& where) {
  Eigen::VectorXd x = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(dim));
  Eigen::Index k = 0;
  x[k++] = 1.0;
  for (const auto& e : enc) {
    const std::string& cell = row[static_cast<std::size_t>(e.column)];
    if (e.categorical) {
      const auto& levels = e.categorical->levels;
      auto it = std::find(levels.begin(), levels.end(), cell);
      if (it == levels.end())
        throw ValidationError(where + ": level '" + cell + "' of '" + e.name + "' is not declared in the config");
      for (const auto& level : levels) {
        if (level == e.categorical->reference) continue;
        x[k++] = (level == cell) ? 1.0 : 0.0;
      }
    } else {
      double v = csv::parse_double(cell, where + ": column '" + e.name + "'");
      if (!std::isfinite(v)) throw ValidationError(where + ": column '" + e.name + "' is not finite");
      x[k++] = v;
    }
  }
  return x;
}

std::string key_text(const std::string& id, int year) { return "(" + id + ", " + std::to_string(year) + ")"; }

}  // namespace

std::vector<std::string> design_terms(const std::vector<std::string>& covariates, const RunConfig& config) {
  std::vector<std::string> terms{"(Intercept)"};
  for (const auto& name : covariates) {
    auto it = config.categorical.find(name);
    if (it == config.categorical.end()) {
      terms.push_back(name);
      continue;
    }
    for (const auto& level : it->second.levels)
      if (level != it->second.reference) terms.push_back(name + level);
  }
  return terms;
}

Portfolio load_portfolio(std::istream& policy_years, std::istream& claims, const RunConfig& config,
                         const std::string& py_name, const std::string& cl_name) {
  csv::Table py;
  csv::Table cl;
  try {
    py = csv::read(policy_years);
  } catch (const ValidationError& e) {
    throw ValidationError(py_name + ": " + e.what());
  }
  try {
    cl = csv::read(claims);
  } catch (const ValidationError& e) {
    throw ValidationError(cl_name + ": " + e.what());
  }

  const int c_id = py.column("policy_id"), c_year = py.column("year"), c_count = py.column("count");
  for (auto [c, name] : {std::pair{c_id, "policy_id"}, {c_year, "year"}, {c_count, "count"}})
    if (c < 0) throw ValidationError(py_name + ": missing required column '" + name + "'");
  const int k_id = cl.column("policy_id"), k_year = cl.column("year"), k_idx = cl.column("claim_index"),
            k_amt = cl.column("amount");
  for (auto [c, name] : {std::pair{k_id, "policy_id"}, {k_year, "year"}, {k_idx, "claim_index"}, {k_amt, "amount"}})
    if (c < 0) throw ValidationError(cl_name + ": missing required column '" + name + "'");
  if (cl.header.size() != 4)
    for (const auto& h : cl.header)
      if (h != "policy_id" && h != "year" && h != "claim_index" && h != "amount")
        throw ValidationError(cl_name + ": unknown column '" + h + "'");

  const auto freq_enc = encoders(config.frequency_covariates, config, py, py_name);
  const auto sev_enc = encoders(config.severity_covariates, config, py, py_name);
  Portfolio out;
  out.frequency_terms = design_terms(config.frequency_covariates, config);
  out.severity_terms = design_terms(config.severity_covariates, config);

  // Policy-year rows, keyed by (id, year); policies keep first-appearance order.
  std::map<std::pair<std::string, int>, std::pair<std::size_t, std::size_t>> index;  // -> (policy, year slot)
  std::map<std::string, std::size_t> policy_pos;
  std::vector<std::size_t> row_line_of_slot;
  for (std::size_t r = 0; r < py.rows.size(); ++r) {
    const auto& row = py.rows[r];
    const std::string where = py_name + " line " + std::to_string(py.lines[r]);
    const std::string& id = row[static_cast<std::size_t>(c_id)];
    if (id.empty()) throw ValidationError(where + ": empty policy_id");
    const long year = csv::parse_int(row[static_cast<std::size_t>(c_year)], where + ": year");
    const long count = csv::parse_int(row[static_cast<std::size_t>(c_count)], where + ": count");
    if (count < 0) throw ValidationError(where + ": negative count");
    auto [pit, inserted] = policy_pos.try_emplace(id, out.policies.size());
    if (inserted) out.policies.push_back(PolicyHistory{id, {}});
    PolicyHistory& pol = out.policies[pit->second];
    auto key = std::pair{id, static_cast<int>(year)};
    if (index.count(key)) throw ValidationError(where + ": duplicate policy-year " + key_text(id, key.second));
    index[key] = {pit->second, pol.years.size()};
    YearClaim yc;
    yc.year = static_cast<int>(year);
    yc.count = static_cast<int>(count);
    yc.freq_covariates = encode_row(freq_enc, row, out.frequency_terms.size(), where);
    yc.sev_covariates = encode_row(sev_enc, row, out.severity_terms.size(), where);
    yc.severities.assign(static_cast<std::size_t>(count), std::nan(""));
    pol.years.push_back(std::move(yc));
  }

  for (std::size_t r = 0; r < cl.rows.size(); ++r) {
    const auto& row = cl.rows[r];
    const std::string where = cl_name + " line " + std::to_string(cl.lines[r]);
    const std::string& id = row[static_cast<std::size_t>(k_id)];
    const long year = csv::parse_int(row[static_cast<std::size_t>(k_year)], where + ": year");
    const long idx = csv::parse_int(row[static_cast<std::size_t>(k_idx)], where + ": claim_index");
    const double amount = csv::parse_double(row[static_cast<std::size_t>(k_amt)], where + ": amount");
    auto key = std::pair{id, static_cast<int>(year)};
    auto it = index.find(key);
    if (it == index.end())
      throw ValidationError(where + ": orphan claim " + key_text(id, key.second) + " has no policy-year row");
    YearClaim& yc = out.policies[it->second.first].years[it->second.second];
    if (idx < 1 || idx > yc.count)
      throw ValidationError(where + ": claim_index " + std::to_string(idx) + " outside 1.." + std::to_string(yc.count) +
                            " for " + key_text(id, key.second) + " (count/claims mismatch)");
    if (!(amount > 0) || !std::isfinite(amount))
      throw ValidationError(where + ": amount must be a positive finite number");
    double& slot = yc.severities[static_cast<std::size_t>(idx - 1)];
    if (!std::isnan(slot))
      throw ValidationError(where + ": duplicate claim " + key_text(id, key.second) + " index " + std::to_string(idx));
    slot = amount;
  }

  for (auto& pol : out.policies) {
    for (const auto& yc : pol.years)
      for (std::size_t j = 0; j < yc.severities.size(); ++j)
        if (std::isnan(yc.severities[j]))
          throw ValidationError(cl_name + ": count/claims mismatch for " + key_text(pol.id, yc.year) + ": count is " +
                                std::to_string(yc.count) + " but claim_index " + std::to_string(j + 1) +
                                " is missing");
    std::stable_sort(pol.years.begin(), pol.years.end(),
                     [](const YearClaim& a, const YearClaim& b) { return a.year < b.year; });
  }
  return out;
}

Portfolio load_portfolio(const std::string& py_path, const std::string& cl_path, const RunConfig& config) {
  std::ifstream py(py_path, std::ios::binary);
  if (!py) throw ValidationError("cannot open '" + py_path + "'");
  std::ifstream cl(cl_path, std::ios::binary);
  if (!cl) throw ValidationError("cannot open '" + cl_path + "'");
  return load_portfolio(py, cl, config, py_path, cl_path);
}

void write_portfolio(const Portfolio& portfolio, std::ostream& py, std::ostream& cl) {
  // Design columns beyond the intercept, de-duplicated by name.
  std::vector<std::string> names;
  std::vector<std::pair<int, Eigen::Index>> source;  // (0 = freq / 1 = sev, column)
  for (std::size_t k = 1; k < portfolio.frequency_terms.size(); ++k) {
    names.push_back(portfolio.frequency_terms[k]);
    source.push_back({0, static_cast<Eigen::Index>(k)});
  }
  for (std::size_t k = 1; k < portfolio.severity_terms.size(); ++k) {
    if (std::find(names.begin(), names.end(), portfolio.severity_terms[k]) != names.end()) continue;
    names.push_back(portfolio.severity_terms[k]);
    source.push_back({1, static_cast<Eigen::Index>(k)});
  }
  std::vector<std::string> header{"policy_id", "year", "count"};
  header.insert(header.end(), names.begin(), names.end());
  csv::write_row(py, header);
  csv::write_row(cl, {"policy_id", "year", "claim_index", "amount"});
  for (const auto& pol : portfolio.policies) {
    for (const auto& yc : pol.years) {
      std::vector<std::string> row{pol.id, std::to_string(yc.year), std::to_string(yc.count)};
      for (const auto& [which, col] : source) {
        const Eigen::VectorXd& x = which == 0 ? yc.freq_covariates : yc.sev_covariates;
        row.push_back(col < x.size() ? csv::format_double(x[col]) : "");
      }
      csv::write_row(py, row);
      for (std::size_t j = 0; j < yc.severities.size(); ++j)
        csv::write_row(cl, {pol.id, std::to_string(yc.year), std::to_string(j + 1),
                            csv::format_double(yc.severities[j])});
    }
  }
}

void write_portfolio(const Portfolio& portfolio, const std::string& py_path, const std::string& cl_path) {
  std::ofstream py(py_path, std::ios::binary);
  if (!py) throw ValidationError("cannot write '" + py_path + "'");
  std::ofstream cl(cl_path, std::ios::binary);
  if (!cl) throw ValidationError("cannot write '" + cl_path + "'");
  write_portfolio(portfolio, py, cl);
  if (!py || !cl) throw ValidationError("error writing portfolio files");
}

YearSplit split_by_year(const Portfolio& portfolio, std::optional<int> test_year) {
  YearSplit s;
  if (test_year) {
    s.test_year = *test_year;
  } else {
    bool any = false;
    for (const auto& pol : portfolio.policies)
      for (const auto& yc : pol.years) {
        s.test_year = any ? std::max(s.test_year, yc.year) : yc.year;
        any = true;
      }
    if (!any) throw ValidationError("split: the portfolio has no policy-years");
  }
  s.train.frequency_terms = portfolio.frequency_terms;
  s.train.severity_terms = portfolio.severity_terms;
  for (const auto& pol : portfolio.policies) {
    PolicyHistory train{pol.id, {}};
    for (const auto& yc : pol.years) {
      if (yc.year < s.test_year) train.years.push_back(yc);
      if (yc.year == s.test_year) s.holdout.push_back(PolicyHistory{pol.id, {yc}});
    }
    if (!train.years.empty()) s.train.policies.push_back(std::move(train));
  }
  if (s.train.policies.empty()) throw ValidationError("split: no training years before " + std::to_string(s.test_year));
  if (s.holdout.empty()) throw ValidationError("split: no policy observed in test year " + std::to_string(s.test_year));
  return s;
}

PortfolioSummary summarize(const Portfolio& portfolio) {
  PortfolioSummary s;
  std::set<int> years;
  for (const auto& pol : portfolio.policies)
    for (const auto& yc : pol.years) {
      years.insert(yc.year);
      s.max_count = std::max(s.max_count, yc.count);
    }
  s.years.assign(years.begin(), years.end());
  const std::size_t ny = s.years.size(), nc = static_cast<std::size_t>(s.max_count) + 1;
  s.observations.assign(nc, std::vector<long>(ny, 0));
  s.severity_sum.assign(nc, std::vector<double>(ny, 0.0));
  s.severity_claims.assign(nc, std::vector<long>(ny, 0));
  s.policies = static_cast<long>(portfolio.policies.size());
  for (const auto& pol : portfolio.policies)
    for (const auto& yc : pol.years) {
      auto y = static_cast<std::size_t>(std::lower_bound(s.years.begin(), s.years.end(), yc.year) - s.years.begin());
      auto n = static_cast<std::size_t>(yc.count);
      ++s.observations[n][y];
      ++s.policy_years;
      for (double v : yc.severities) {
        s.severity_sum[n][y] += v;
        ++s.severity_claims[n][y];
        ++s.claims;
      }
    }
  return s;
}

}  // namespace mcrm
