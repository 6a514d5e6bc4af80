#pragma once

// Monte-Carlo prediction of next-year aggregate losses and the hold-out
// validation metrics (MSE, RMSE, MAE, ordered-Lorenz Gini).

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mcrm/estimate.hpp"

namespace mcrm {

struct PredictionConfig {
  int samples = 5000;
  std::uint64_t seed = 1;
  NestedVariant variant = NestedVariant::full;
};

struct ValidationReport {
  std::string model;
  double rmse = 0.0;
  double mse = 0.0;
  double mae = 0.0;
  double gini = 0.0;
};

/// Mean of S = sum_j Y_j over config.samples simulated years for one policy
/// with the given margins. `stream` selects the policy's RNG sub-stream.
double predict_aggregate_loss(const YearMargins& margins, const ModelParams& params,
                              const PredictionConfig& config, std::uint64_t stream);

/// Predictions for every hold-out policy; the year used is each policy's last year.
std::vector<double> predict_portfolio(const std::vector<PolicyHistory>& holdout, const ModelParams& params,
                                      const PredictionConfig& config, unsigned threads = 0);

/// Observed aggregate loss of each policy's last year.
std::vector<double> observed_losses(const std::vector<PolicyHistory>& holdout);

/// Gini index (x100) from the ordered Lorenz curve: policies sorted by
/// predicted score, cumulative share of actual losses against cumulative share
/// of policies. Tied scores form a single segment of the curve.
double gini_index(std::span<const double> actual, std::span<const double> predicted);

ValidationReport validation_metrics(std::span<const double> actual, std::span<const double> predicted);

struct VariantComparison {
  NestedVariant variant;
  FitResult fit;
  std::vector<double> predicted;
  ValidationReport report;
};

/// Fits each variant on `train`, predicts the hold-out year and scores it.
std::vector<VariantComparison> nested_model_comparison(const Portfolio& train,
                                                       const std::vector<PolicyHistory>& holdout,
                                                       std::span<const NestedVariant> variants,
                                                       const FitOptions& fit_options,
                                                       const PredictionConfig& prediction);

}  // namespace mcrm
