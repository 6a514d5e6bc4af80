#pragma once

// Portfolio ingestion and export in the two-file CSV layout:
//   policy-year file: policy_id,year,count[,covariate columns...]
//   claims file:      policy_id,year,claim_index,amount
// plus the hold-out split and the frequency/severity summary tables.

#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "mcrm/config.hpp"

namespace mcrm {

/// Builds the design rows from the configured covariates (intercept first,
/// categoricals one-hot encoded against their reference level) and attaches
/// the claims. Errors carry the file name and line of the offending row.
Portfolio load_portfolio(std::istream& policy_years, std::istream& claims, const RunConfig& config,
                         const std::string& policy_years_name = "policy-years",
                         const std::string& claims_name = "claims");
Portfolio load_portfolio(const std::string& policy_years_path, const std::string& claims_path,
                         const RunConfig& config);

/// Writes the portfolio; non-intercept design columns become numeric covariate
/// columns named after their terms (severity terms absent from the frequency
/// design are appended).
void write_portfolio(const Portfolio& portfolio, std::ostream& policy_years, std::ostream& claims);
void write_portfolio(const Portfolio& portfolio, const std::string& policy_years_path,
                     const std::string& claims_path);

/// Term names the loader produces for a configuration.
std::vector<std::string> design_terms(const std::vector<std::string>& covariates, const RunConfig& config);

struct YearSplit {
  int test_year = 0;
  /// Years before the test year.
  Portfolio train;
  /// Policies observed in the test year, each reduced to that single year.
  std::vector<PolicyHistory> holdout;
};

/// Splits at `test_year` (default: the latest year present).
YearSplit split_by_year(const Portfolio& portfolio, std::optional<int> test_year);

/// Frequency-by-year counts and average severity by frequency and year.
struct PortfolioSummary {
  std::vector<int> years;
  int max_count = 0;
  /// observations[n][year index]
  std::vector<std::vector<long>> observations;
  /// Sum and number of individual severities for rows with count n (n >= 1).
  std::vector<std::vector<double>> severity_sum;
  std::vector<std::vector<long>> severity_claims;
  long policy_years = 0;
  long claims = 0;
  long policies = 0;
};

PortfolioSummary summarize(const Portfolio& portfolio);

}  // namespace mcrm
