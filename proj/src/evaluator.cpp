#include "gts/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gts::eval {

using nlohmann::json;

MetricSlice compute_metrics(const std::vector<double>& pred,
                            const std::vector<double>& truth,
                            const std::vector<uint8_t>& mask) {
  if (pred.size() != truth.size() || pred.size() != mask.size())
    throw Error("compute_metrics: pred/truth/mask lengths differ");
  MetricSlice s;
  double abs_sum = 0.0, sq_sum = 0.0, ape_sum = 0.0;
  for (size_t i = 0; i < pred.size(); ++i) {
    if (!mask[i]) continue;
    double e = pred[i] - truth[i];
    abs_sum += std::fabs(e);
    sq_sum += e * e;
    ++s.count;
    if (truth[i] != 0.0) {
      ape_sum += std::fabs(e) / std::fabs(truth[i]);
      ++s.mape_count;
    }
  }
  if (s.count == 0) throw Error("compute_metrics: no observed entries to score");
  s.mae = abs_sum / static_cast<double>(s.count);
  s.rmse = std::sqrt(sq_sum / static_cast<double>(s.count));
  s.mape = s.mape_count > 0 ? ape_sum / static_cast<double>(s.mape_count)
                            : std::numeric_limits<double>::quiet_NaN();
  return s;
}

json MetricReport::to_json() const {
  json j;
  j["samples"] = samples;
  j["temperature"] = temperature;
  auto slice_json = [](const MetricSlice& s) {
    json o;
    o["mae"] = s.mae;
    o["rmse"] = s.rmse;
    if (std::isnan(s.mape))
      o["mape"] = nullptr;
    else
      o["mape"] = s.mape;
    o["count"] = s.count;
    o["mape_count"] = s.mape_count;
    return o;
  };
  json hs = json::object();
  for (size_t i = 0; i < horizons.size(); ++i)
    hs["h" + std::to_string(horizons[i])] = slice_json(per_horizon[i]);
  j["per_horizon"] = hs;
  j["overall"] = slice_json(overall);
  return j;
}

namespace {

struct FlatSlices {
  // per horizon: flattened (window, node, target feature) triples
  std::vector<std::vector<double>> pred, truth;
  std::vector<std::vector<uint8_t>> mask;
};

std::vector<int64_t> resolve_horizons(const EvalSetup& setup) {
  std::vector<int64_t> hs = setup.horizons;
  if (hs.empty())
    for (int64_t h = 1; h <= setup.window.horizon_steps; ++h) hs.push_back(h);
  for (int64_t h : hs)
    if (h < 1 || h > setup.window.horizon_steps)
      throw Error("horizon " + std::to_string(h) + " outside 1.." +
                  std::to_string(setup.window.horizon_steps));
  return hs;
}

// Predictions for all windows of the segment, one [(W*n) x Ft] tensor per
// horizon step, in standardized units.
std::vector<Tensor> segment_predictions(const EvalSetup& setup, const Tensor& adjacency) {
  const auto& spec = *setup.spec;
  const int64_t n = setup.seg_std->series_count();
  const int64_t Ft = static_cast<int64_t>(spec.target_features.size());
  auto windows = data::make_windows(setup.seg_std->step_count(), setup.window);
  if (windows.empty()) throw Error("segment too short for one window");
  const int64_t W = static_cast<int64_t>(windows.size());

  std::vector<Tensor> out(static_cast<size_t>(setup.window.horizon_steps),
                          Tensor{Shape{W * n, Ft}});
  for (size_t first = 0; first < windows.size();
       first += static_cast<size_t>(setup.batch_size)) {
    size_t count = std::min(static_cast<size_t>(setup.batch_size),
                            windows.size() - first);
    model::Batch batch = model::make_batch(*setup.seg_std, windows, first, count,
                                           setup.window, spec.target_features);
    std::vector<Tensor> preds =
        model::predict_values(*setup.params, spec, adjacency, batch);
    for (size_t h = 0; h < preds.size(); ++h)
      for (int64_t r = 0; r < preds[h].rows(); ++r)
        for (int64_t c = 0; c < Ft; ++c)
          out[h].at(static_cast<int64_t>(first) * n + r, c) = preds[h].at(r, c);
  }
  return out;
}

FlatSlices score_arrays(const EvalSetup& setup, const std::vector<Tensor>& preds,
                        const std::vector<int64_t>& horizons) {
  const auto& spec = *setup.spec;
  const int64_t n = setup.seg_raw->series_count();
  const int64_t Ft = static_cast<int64_t>(spec.target_features.size());
  auto windows = data::make_windows(setup.seg_raw->step_count(), setup.window);

  FlatSlices flat;
  flat.pred.resize(horizons.size());
  flat.truth.resize(horizons.size());
  flat.mask.resize(horizons.size());
  for (size_t hi = 0; hi < horizons.size(); ++hi) {
    const int64_t h = horizons[hi];
    const Tensor& p = preds[static_cast<size_t>(h - 1)];
    for (size_t w = 0; w < windows.size(); ++w) {
      int64_t t = windows[w].start + setup.window.input_steps + h - 1;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t c = 0; c < Ft; ++c) {
          int64_t f = spec.target_features[static_cast<size_t>(c)];
          double raw_pred =
              setup.scaler->to_original(p.at(static_cast<int64_t>(w) * n + i, c), f, i);
          flat.pred[hi].push_back(raw_pred);
          flat.truth[hi].push_back(setup.seg_raw->values.at(f, t, i));
          flat.mask[hi].push_back(setup.seg_raw->observed(t, i) ? 1 : 0);
        }
    }
  }
  return flat;
}

MetricReport report_from_flat(const FlatSlices& flat, const std::vector<int64_t>& horizons) {
  MetricReport rep;
  rep.horizons = horizons;
  std::vector<double> all_pred, all_truth;
  std::vector<uint8_t> all_mask;
  for (size_t hi = 0; hi < horizons.size(); ++hi) {
    rep.per_horizon.push_back(compute_metrics(flat.pred[hi], flat.truth[hi], flat.mask[hi]));
    all_pred.insert(all_pred.end(), flat.pred[hi].begin(), flat.pred[hi].end());
    all_truth.insert(all_truth.end(), flat.truth[hi].begin(), flat.truth[hi].end());
    all_mask.insert(all_mask.end(), flat.mask[hi].begin(), flat.mask[hi].end());
  }
  rep.overall = compute_metrics(all_pred, all_truth, all_mask);
  return rep;
}

void validate_setup(const EvalSetup& setup) {
  if (!setup.spec || !setup.params || !setup.scaler || !setup.seg_std || !setup.seg_raw)
    throw Error("evaluator: incomplete setup");
  if (setup.seg_std->step_count() != setup.seg_raw->step_count() ||
      setup.seg_std->series_count() != setup.seg_raw->series_count())
    throw Error("evaluator: standardized and raw segments disagree");
  if (setup.batch_size < 1) throw Error("evaluator: batch_size must be >= 1");
}

}  // namespace

MetricReport evaluate_with_adjacency(const EvalSetup& setup, const Tensor& adjacency) {
  validate_setup(setup);
  auto horizons = resolve_horizons(setup);
  std::vector<Tensor> preds = segment_predictions(setup, adjacency);
  MetricReport rep = report_from_flat(score_arrays(setup, preds, horizons), horizons);
  rep.samples = 1;
  return rep;
}

double masked_mae_with_adjacency(const EvalSetup& setup, const Tensor& adjacency) {
  return evaluate_with_adjacency(setup, adjacency).overall.mae;
}

MetricReport evaluate_sampled(const EvalSetup& setup, const Tensor& theta,
                              double temperature, int64_t samples,
                              bool average_predictions, Rng& rng) {
  validate_setup(setup);
  if (samples < 1) throw Error("evaluate_sampled: samples must be >= 1");
  auto horizons = resolve_horizons(setup);

  if (average_predictions) {
    std::vector<Tensor> mean_preds;
    for (int64_t s = 0; s < samples; ++s) {
      structure::SampledGraph sg = structure::sample_graph(theta, temperature, rng);
      std::vector<Tensor> preds = segment_predictions(setup, sg.adjacency);
      if (s == 0) {
        mean_preds = std::move(preds);
      } else {
        for (size_t h = 0; h < preds.size(); ++h)
          for (int64_t i = 0; i < preds[h].numel(); ++i)
            mean_preds[h].at(i) += preds[h].at(i);
      }
    }
    for (auto& t : mean_preds)
      for (double& v : t.data) v /= static_cast<double>(samples);
    MetricReport rep = report_from_flat(score_arrays(setup, mean_preds, horizons), horizons);
    rep.samples = samples;
    rep.temperature = temperature;
    return rep;
  }

  // metric-level averaging
  MetricReport acc;
  for (int64_t s = 0; s < samples; ++s) {
    structure::SampledGraph sg = structure::sample_graph(theta, temperature, rng);
    std::vector<Tensor> preds = segment_predictions(setup, sg.adjacency);
    MetricReport rep = report_from_flat(score_arrays(setup, preds, horizons), horizons);
    if (s == 0) {
      acc = rep;
    } else {
      auto fold = [&](MetricSlice& into, const MetricSlice& from) {
        into.mae += from.mae;
        into.rmse += from.rmse;
        into.mape += from.mape;
      };
      for (size_t hi = 0; hi < acc.per_horizon.size(); ++hi)
        fold(acc.per_horizon[hi], rep.per_horizon[hi]);
      fold(acc.overall, rep.overall);
    }
  }
  auto scale = [&](MetricSlice& s2) {
    s2.mae /= static_cast<double>(samples);
    s2.rmse /= static_cast<double>(samples);
    s2.mape /= static_cast<double>(samples);
  };
  for (auto& s2 : acc.per_horizon) scale(s2);
  scale(acc.overall);
  acc.samples = samples;
  acc.temperature = temperature;
  return acc;
}

HistoricalAverage HistoricalAverage::fit(const data::TimeSeriesTensor& reference_raw,
                                         int64_t period_steps) {
  if (period_steps < 1) throw Error("historical average: period must be >= 1");
  const int64_t F = reference_raw.feature_count();
  const int64_t S = reference_raw.step_count();
  const int64_t n = reference_raw.series_count();
  HistoricalAverage ha;
  ha.period_ = period_steps;
  ha.frequency_ = reference_raw.frequency_seconds;
  ha.phase_mean_ = Tensor{Shape{F, period_steps * n}};
  ha.phase_count_ = Tensor{Shape{F, period_steps * n}};
  ha.fallback_ = Tensor{Shape{F, n}};

  Tensor fallback_count{Shape{F, n}};
  for (int64_t t = 0; t < S; ++t) {
    int64_t phase = (reference_raw.timestamp_at(t) / reference_raw.frequency_seconds) %
                    period_steps;
    for (int64_t i = 0; i < n; ++i) {
      if (!reference_raw.observed(t, i)) continue;
      for (int64_t f = 0; f < F; ++f) {
        ha.phase_mean_.at(f, phase * n + i) += reference_raw.values.at(f, t, i);
        ha.phase_count_.at(f, phase * n + i) += 1.0;
        ha.fallback_.at(f, i) += reference_raw.values.at(f, t, i);
        fallback_count.at(f, i) += 1.0;
      }
    }
  }
  for (int64_t f = 0; f < F; ++f)
    for (int64_t i = 0; i < n; ++i) {
      if (fallback_count.at(f, i) == 0.0)
        throw Error("historical average: series " + std::to_string(i) +
                    " has no observations");
      ha.fallback_.at(f, i) /= fallback_count.at(f, i);
      for (int64_t ph = 0; ph < period_steps; ++ph) {
        double c = ha.phase_count_.at(f, ph * n + i);
        if (c > 0.0) ha.phase_mean_.at(f, ph * n + i) /= c;
      }
    }
  return ha;
}

double HistoricalAverage::predict(int64_t feature, int64_t series, int64_t timestamp) const {
  int64_t phase = (timestamp / frequency_) % period_;
  const int64_t n = fallback_.cols();
  if (phase_count_.at(feature, phase * n + series) > 0.0)
    return phase_mean_.at(feature, phase * n + series);
  return fallback_.at(feature, series);
}

MetricReport evaluate_historical_average(const data::TimeSeriesTensor& train_raw,
                                         const data::TimeSeriesTensor& test_raw,
                                         const data::WindowSpec& window,
                                         int64_t period_steps,
                                         const std::vector<int64_t>& target_features,
                                         const std::vector<int64_t>& horizons) {
  HistoricalAverage ha = HistoricalAverage::fit(train_raw, period_steps);
  std::vector<int64_t> hs = horizons;
  if (hs.empty())
    for (int64_t h = 1; h <= window.horizon_steps; ++h) hs.push_back(h);
  for (int64_t h : hs)
    if (h < 1 || h > window.horizon_steps)
      throw Error("horizon " + std::to_string(h) + " outside 1.." +
                  std::to_string(window.horizon_steps));

  auto windows = data::make_windows(test_raw.step_count(), window);
  if (windows.empty()) throw Error("segment too short for one window");
  const int64_t n = test_raw.series_count();

  FlatSlices flat;
  flat.pred.resize(hs.size());
  flat.truth.resize(hs.size());
  flat.mask.resize(hs.size());
  for (size_t hi = 0; hi < hs.size(); ++hi) {
    int64_t h = hs[hi];
    for (const auto& w : windows) {
      int64_t t = w.start + window.input_steps + h - 1;
      int64_t ts = test_raw.timestamp_at(t);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t f : target_features) {
          flat.pred[hi].push_back(ha.predict(f, i, ts));
          flat.truth[hi].push_back(test_raw.values.at(f, t, i));
          flat.mask[hi].push_back(test_raw.observed(t, i) ? 1 : 0);
        }
    }
  }
  return report_from_flat(flat, hs);
}

}  // namespace gts::eval
