#include "mcrm/reports.hpp"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "mcrm/csv.hpp"

namespace mcrm {

namespace {

std::string pad_left(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : std::string(width - s.size(), ' ') + s;
}

std::string pad_right(const std::string& s, std::size_t width) {
  return s.size() >= width ? s : s + std::string(width - s.size(), ' ');
}

std::string to_csv(const std::vector<std::vector<std::string>>& rows) {
  std::ostringstream out;
  for (const auto& r : rows) csv::write_row(out, r);
  return out.str();
}

std::string block_title(const std::string& block) {
  if (block == "frequency") return "Frequency part";
  if (block == "severity") return "Severity part";
  return "Copula part";
}

}  // namespace

std::string format_p_value(double p) {
  if (std::isnan(p)) return "NaN";
  if (p < 1e-4) return "<.0001";
  return csv::format_fixed(p, 4);
}

std::string significance_marker(double p) { return p < 0.05 ? "*" : ""; }

std::string variant_label(const std::string& model) {
  if (model == "full") return "Full";
  if (model == "nested1") return "Nested 1";
  if (model == "nested2") return "Nested 2";
  if (model == "nested3") return "Nested 3";
  return model;
}

std::string fit_report_text(const FitResult& fit) {
  std::ostringstream out;
  out << "Estimation result (" << variant_label(to_string(fit.variant)) << " model, "
      << to_string(fit.estimates.copula.family) << " copula";
  if (fit.estimates.copula.family == CopulaFamily::t)
    out << ", nu_df = " << csv::format_double(fit.estimates.copula.nu_df);
  out << ")\n";
  out << "log-likelihood: " << csv::format_fixed(fit.log_likelihood, 4) << "\n";
  out << "converged: " << (fit.converged ? "yes" : "no") << "  iterations: " << fit.iterations
      << "  evaluations: " << fit.evaluations << "  gradient inf-norm: " << csv::format_double(fit.gradient_norm)
      << "\n";
  out << "clamped count cdfs: " << fit.diagnostics.clamped_counts
      << "  clamped severity cdfs: " << fit.diagnostics.clamped_severities
      << "  floored variances: " << fit.diagnostics.floored_variances << "\n";
  for (const auto& w : fit.warnings) out << "warning: " << w << "\n";
  out << "\n";
  const std::size_t w0 = 14, w = 11;
  out << pad_right("parameter", w0) << pad_left("est", w) << pad_left("std.error", w) << pad_left("t", w)
      << pad_left("p-value", w) << "\n";
  std::string block;
  for (const auto& r : fit.table) {
    if (r.block != block) {
      block = r.block;
      out << block_title(block) << "\n";
    }
    out << pad_right(r.name, w0) << pad_left(csv::format_fixed(r.estimate, 4), w)
        << pad_left(csv::format_fixed(r.std_error, 4), w) << pad_left(csv::format_fixed(r.t_stat, 3), w)
        << pad_left(format_p_value(r.p_value), w) << " " << significance_marker(r.p_value) << "\n";
  }
  return out.str();
}

std::string fit_report_csv(const FitResult& fit) {
  std::vector<std::vector<std::string>> rows{{"block", "parameter", "est", "std_error", "t", "p_value", "significant"}};
  for (const auto& r : fit.table)
    rows.push_back({r.block, r.name, csv::format_double(r.estimate), csv::format_double(r.std_error),
                    csv::format_double(r.t_stat), csv::format_double(r.p_value), r.p_value < 0.05 ? "1" : "0"});
  return to_csv(rows);
}

std::string rho_report_text(const RhoInference& rho) {
  std::ostringstream out;
  out << "Derived estimates and standard errors of rho (delta method)\n\n";
  const std::size_t w0 = 10, w = 11;
  out << pad_right("parameter", w0) << pad_left("est", w) << pad_left("std.error", w) << pad_left("t", w)
      << pad_left("p-value", w) << "\n";
  for (const auto& r : rho.rows)
    out << pad_right(r.name, w0) << pad_left(csv::format_fixed(r.estimate, 4), w)
        << pad_left(csv::format_fixed(r.std_error, 4), w) << pad_left(csv::format_fixed(r.t_stat, 3), w)
        << pad_left(format_p_value(r.p_value), w) << " " << significance_marker(r.p_value) << "\n";
  return out.str();
}

std::string rho_report_csv(const RhoInference& rho) {
  std::vector<std::vector<std::string>> rows{{"parameter", "est", "std_error", "t", "p_value", "significant"}};
  for (const auto& r : rho.rows)
    rows.push_back({r.name, csv::format_double(r.estimate), csv::format_double(r.std_error),
                    csv::format_double(r.t_stat), csv::format_double(r.p_value), r.p_value < 0.05 ? "1" : "0"});
  return to_csv(rows);
}

std::string validation_report_text(std::span<const ValidationReport> reports) {
  std::ostringstream out;
  const std::size_t w0 = 8, w = 16;
  out << pad_right("", w0);
  for (const auto& r : reports) out << pad_left(variant_label(r.model), w);
  out << "\n";
  auto line = [&](const char* name, auto get, int digits) {
    out << pad_right(name, w0);
    for (const auto& r : reports) out << pad_left(csv::format_fixed(get(r), digits), w);
    out << "\n";
  };
  line("RMSE", [](const ValidationReport& r) { return r.rmse; }, 3);
  line("MSE", [](const ValidationReport& r) { return r.mse; }, 0);
  line("MAE", [](const ValidationReport& r) { return r.mae; }, 3);
  line("Gini", [](const ValidationReport& r) { return r.gini; }, 3);
  return out.str();
}

std::string validation_report_csv(std::span<const ValidationReport> reports) {
  std::vector<std::vector<std::string>> rows{{"model", "rmse", "mse", "mae", "gini"}};
  for (const auto& r : reports)
    rows.push_back({r.model, csv::format_double(r.rmse), csv::format_double(r.mse), csv::format_double(r.mae),
                    csv::format_double(r.gini)});
  return to_csv(rows);
}

std::string predictions_csv(const std::vector<PolicyHistory>& holdout, std::span<const double> actual,
                            std::span<const double> predicted) {
  std::vector<std::vector<std::string>> rows{{"policy_id", "actual", "predicted"}};
  for (std::size_t i = 0; i < holdout.size(); ++i)
    rows.push_back({holdout[i].id, csv::format_double(actual[i]), csv::format_double(predicted[i])});
  return to_csv(rows);
}

std::string summary_text(const PortfolioSummary& s) {
  std::ostringstream out;
  const std::size_t w0 = 15, w = 10;
  out << "Policies: " << s.policies << "  policy-years: " << s.policy_years << "  claims: " << s.claims << "\n\n";

  out << "Number of observations by frequency and year\n";
  out << pad_right("Frequency", w0);
  for (int y : s.years) out << pad_left(std::to_string(y), w);
  out << pad_left("Count", w) << pad_left("% of Total", w + 2) << "\n";
  std::vector<long> col_total(s.years.size(), 0);
  for (std::size_t n = 0; n < s.observations.size(); ++n) {
    long row_total = 0;
    out << pad_right(std::to_string(n), w0);
    for (std::size_t y = 0; y < s.years.size(); ++y) {
      out << pad_left(std::to_string(s.observations[n][y]), w);
      row_total += s.observations[n][y];
      col_total[y] += s.observations[n][y];
    }
    const double pct = s.policy_years ? 100.0 * static_cast<double>(row_total) / static_cast<double>(s.policy_years) : 0.0;
    out << pad_left(std::to_string(row_total), w) << pad_left(csv::format_fixed(pct, 2), w + 2) << "\n";
  }
  out << pad_right("Count", w0);
  for (long c : col_total) out << pad_left(std::to_string(c), w);
  out << pad_left(std::to_string(s.policy_years), w) << pad_left("100.00", w + 2) << "\n\n";

  auto avg = [](double sum, long n) { return n ? csv::format_fixed(sum / static_cast<double>(n), 0) : std::string("-"); };
  out << "Average severity by frequency and year\n";
  out << pad_right("Frequency", w0);
  for (int y : s.years) out << pad_left(std::to_string(y), w);
  out << pad_left("Avg.", w) << "\n";
  std::vector<double> ysum(s.years.size(), 0.0);
  std::vector<long> ycnt(s.years.size(), 0);
  double all_sum = 0.0;
  long all_cnt = 0;
  for (std::size_t n = 1; n < s.observations.size(); ++n) {
    double rsum = 0.0;
    long rcnt = 0;
    out << pad_right(std::to_string(n), w0);
    for (std::size_t y = 0; y < s.years.size(); ++y) {
      out << pad_left(avg(s.severity_sum[n][y], s.severity_claims[n][y]), w);
      rsum += s.severity_sum[n][y];
      rcnt += s.severity_claims[n][y];
      ysum[y] += s.severity_sum[n][y];
      ycnt[y] += s.severity_claims[n][y];
    }
    all_sum += rsum;
    all_cnt += rcnt;
    out << pad_left(avg(rsum, rcnt), w) << "\n";
  }
  out << pad_right("Avg. severity", w0);
  for (std::size_t y = 0; y < s.years.size(); ++y) out << pad_left(avg(ysum[y], ycnt[y]), w);
  out << pad_left(avg(all_sum, all_cnt), w) << "\n";
  return out.str();
}

std::string summary_csv(const PortfolioSummary& s) {
  std::vector<std::vector<std::string>> rows{{"table", "frequency", "year", "value"}};
  for (std::size_t n = 0; n < s.observations.size(); ++n)
    for (std::size_t y = 0; y < s.years.size(); ++y)
      rows.push_back({"observations", std::to_string(n), std::to_string(s.years[y]),
                      std::to_string(s.observations[n][y])});
  for (std::size_t n = 1; n < s.observations.size(); ++n)
    for (std::size_t y = 0; y < s.years.size(); ++y)
      if (s.severity_claims[n][y])
        rows.push_back({"average_severity", std::to_string(n), std::to_string(s.years[y]),
                        csv::format_double(s.severity_sum[n][y] / static_cast<double>(s.severity_claims[n][y]))});
  rows.push_back({"total_policy_years", "", "", std::to_string(s.policy_years)});
  rows.push_back({"total_claims", "", "", std::to_string(s.claims)});
  return to_csv(rows);
}

}  // namespace mcrm
