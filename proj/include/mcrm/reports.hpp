#pragma once

// Plain-text reports and their machine-readable CSV twins.

#include <span>
#include <string>
#include <vector>

#include "mcrm/portfolio_io.hpp"

namespace mcrm {

/// "<.0001" below 1e-4, otherwise four decimals.
std::string format_p_value(double p);
/// "*" when p < 0.05.
std::string significance_marker(double p);

/// Parameter table grouped into frequency, severity and copula parts, preceded
/// by the log-likelihood and convergence diagnostics.
std::string fit_report_text(const FitResult& fit);
std::string fit_report_csv(const FitResult& fit);

std::string rho_report_text(const RhoInference& rho);
std::string rho_report_csv(const RhoInference& rho);

/// One column per model, rows RMSE, MSE, MAE, Gini.
std::string validation_report_text(std::span<const ValidationReport> reports);
std::string validation_report_csv(std::span<const ValidationReport> reports);

/// policy_id,actual,predicted
std::string predictions_csv(const std::vector<PolicyHistory>& holdout, std::span<const double> actual,
                            std::span<const double> predicted);

/// Observations by frequency and year, and average severity by frequency and year.
std::string summary_text(const PortfolioSummary& summary);
/// Long format: table,frequency,year,value
std::string summary_csv(const PortfolioSummary& summary);

/// Display label of a model variant ("Full", "Nested 1", ...).
std::string variant_label(const std::string& model);

}  // namespace mcrm
