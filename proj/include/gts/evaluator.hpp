#pragma once

#include <cstdint>
#include <vector>

#include "gts/model.hpp"
#include "json.hpp"

namespace gts::eval {

// Masked error summary in original units. MAPE additionally skips entries
// whose true value is zero; it is NaN when no entry qualifies.
struct MetricSlice {
  double mae = 0.0;
  double rmse = 0.0;
  double mape = 0.0;
  int64_t count = 0;       // observed entries scored
  int64_t mape_count = 0;  // observed entries with non-zero truth
};

MetricSlice compute_metrics(const std::vector<double>& pred,
                            const std::vector<double>& truth,
                            const std::vector<uint8_t>& mask);

struct MetricReport {
  std::vector<int64_t> horizons;  // 1-based forecast steps included
  std::vector<MetricSlice> per_horizon;
  MetricSlice overall;  // pooled over the reported horizons
  int64_t samples = 1;
  double temperature = 0.0;
  nlohmann::json to_json() const;
};

// Everything needed to score one segment. Raw and standardized views must
// describe the same steps.
struct EvalSetup {
  const model::ModelSpec* spec = nullptr;
  const ad::ParameterStore* params = nullptr;
  const data::Standardizer* scaler = nullptr;
  const data::TimeSeriesTensor* seg_std = nullptr;
  const data::TimeSeriesTensor* seg_raw = nullptr;
  data::WindowSpec window;
  int64_t batch_size = 16;
  std::vector<int64_t> horizons;  // empty: all 1..horizon_steps
};

// Deterministic forecast on a constant adjacency.
MetricReport evaluate_with_adjacency(const EvalSetup& setup, const Tensor& adjacency);
double masked_mae_with_adjacency(const EvalSetup& setup, const Tensor& adjacency);

// Draws `samples` relaxed graphs from theta. With average_predictions, the
// per-entry predictions are averaged across samples before scoring;
// otherwise the per-horizon metric values are averaged.
MetricReport evaluate_sampled(const EvalSetup& setup, const Tensor& theta,
                              double temperature, int64_t samples,
                              bool average_predictions, Rng& rng);

// Seasonal-mean baseline: the prediction for a step is the mean of observed
// reference values sharing its phase modulo `period_steps`, falling back to
// the series mean for unseen phases. Phases align across segments through
// absolute timestamps.
class HistoricalAverage {
 public:
  static HistoricalAverage fit(const data::TimeSeriesTensor& reference_raw,
                               int64_t period_steps);
  double predict(int64_t feature, int64_t series, int64_t timestamp) const;
  int64_t period_steps() const { return period_; }

 private:
  int64_t period_ = 0;
  int64_t frequency_ = 0;
  Tensor phase_mean_;   // [F, period * n] flattened (phase, series)
  Tensor phase_count_;  // same layout
  Tensor fallback_;     // [F, n]
};

MetricReport evaluate_historical_average(const data::TimeSeriesTensor& train_raw,
                                         const data::TimeSeriesTensor& test_raw,
                                         const data::WindowSpec& window,
                                         int64_t period_steps,
                                         const std::vector<int64_t>& target_features,
                                         const std::vector<int64_t>& horizons = {});

}  // namespace gts::eval
