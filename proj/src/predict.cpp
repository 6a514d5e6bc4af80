#include "mcrm/predict.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "mcrm/errors.hpp"
#include "mcrm/parallel.hpp"
#include "mcrm/simulate.hpp"

namespace mcrm {

double predict_aggregate_loss(const YearMargins& margins, const ModelParams& params,
                              const PredictionConfig& config, std::uint64_t stream) {
  if (config.samples < 1) throw ValidationError("prediction needs at least one Monte Carlo sample");
  const MarginalLaws laws = MarginalLaws::from(params.marginal);
  Rng rng = make_stream(config.seed, stream);
  const YearMargins one[1] = {margins};
  double total = 0.0;
  for (int s = 0; s < config.samples; ++s) {
    const PolicyHistory sim = simulate_policy(params.copula, laws, one, rng);
    for (double y : sim.years.front().severities) total += y;
  }
  return total / config.samples;
}

std::vector<double> predict_portfolio(const std::vector<PolicyHistory>& holdout, const ModelParams& params,
                                      const PredictionConfig& config, unsigned threads) {
  std::vector<double> out(holdout.size());
  parallel_for(
      holdout.size(),
      [&](std::size_t i) {
        if (holdout[i].years.empty()) throw ValidationError("hold-out policy '" + holdout[i].id + "' has no year");
        PolicyHistory last{holdout[i].id, {holdout[i].years.back()}};
        const YearMargins m = year_margins(last, params.marginal).front();
        out[i] = predict_aggregate_loss(m, params, config, i);
      },
      threads);
  return out;
}

std::vector<double> observed_losses(const std::vector<PolicyHistory>& holdout) {
  std::vector<double> out;
  out.reserve(holdout.size());
  for (const auto& p : holdout) {
    double s = 0.0;
    if (!p.years.empty())
      for (double y : p.years.back().severities) s += y;
    out.push_back(s);
  }
  return out;
}

double gini_index(std::span<const double> actual, std::span<const double> predicted) {
  const std::size_t n = actual.size();
  if (n == 0 || predicted.size() != n) throw ValidationError("Gini needs equal-length, non-empty vectors");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return predicted[a] < predicted[b]; });
  const double total = std::accumulate(actual.begin(), actual.end(), 0.0);
  if (!(total > 0.0)) return 0.0;
  // Area under the Lorenz curve by trapezoids over tie groups.
  double area = 0.0, cum_loss = 0.0;
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    double group = 0.0;
    while (j < n && predicted[order[j]] == predicted[order[i]]) group += actual[order[j++]];
    const double x0 = static_cast<double>(i) / n, x1 = static_cast<double>(j) / n;
    const double y0 = cum_loss / total;
    cum_loss += group;
    const double y1 = cum_loss / total;
    area += 0.5 * (x1 - x0) * (y0 + y1);
    i = j;
  }
  return 100.0 * (1.0 - 2.0 * area);
}

ValidationReport validation_metrics(std::span<const double> actual, std::span<const double> predicted) {
  if (actual.empty() || actual.size() != predicted.size())
    throw ValidationError("validation metrics need equal-length, non-empty vectors");
  ValidationReport r;
  double se = 0.0, ae = 0.0;
  for (std::size_t i = 0; i < actual.size(); ++i) {
    const double d = actual[i] - predicted[i];
    se += d * d;
    ae += std::abs(d);
  }
  r.mse = se / actual.size();
  r.rmse = std::sqrt(r.mse);
  r.mae = ae / actual.size();
  r.gini = gini_index(actual, predicted);
  return r;
}

std::vector<VariantComparison> nested_model_comparison(const Portfolio& train,
                                                       const std::vector<PolicyHistory>& holdout,
                                                       std::span<const NestedVariant> variants,
                                                       const FitOptions& fit_options,
                                                       const PredictionConfig& prediction) {
  const std::vector<double> actual = observed_losses(holdout);
  std::vector<VariantComparison> out;
  for (NestedVariant v : variants) {
    FitOptions opts = fit_options;
    opts.variant = v;
    VariantComparison c{v, fit(train, std::nullopt, opts), {}, {}};
    PredictionConfig pc = prediction;
    pc.variant = v;
    c.predicted = predict_portfolio(holdout, c.fit.estimates, pc, fit_options.threads);
    c.report = validation_metrics(actual, c.predicted);
    c.report.model = to_string(v);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace mcrm
