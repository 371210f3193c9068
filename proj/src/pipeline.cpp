#include "gts/pipeline.hpp"

#include <cmath>

namespace gts::data {

TimeSeriesTensor clean_series(const TimeSeriesTensor& data, double lower, double upper,
                              CleanReport* report) {
  if (!(lower <= upper)) throw DataError("clean_series: lower bound exceeds upper");
  const int64_t F = data.feature_count(), S = data.step_count(), n = data.series_count();
  TimeSeriesTensor out = data;
  CleanReport rep;

  for (int64_t t = 0; t < S; ++t)
    for (int64_t i = 0; i < n; ++i) {
      if (!out.observed(t, i)) continue;
      for (int64_t f = 0; f < F; ++f) {
        double v = out.values.at(f, t, i);
        if (v < lower || v > upper) {
          out.set_observed(t, i, false);
          ++rep.out_of_bounds;
          break;
        }
      }
    }

  for (int64_t f = 0; f < F; ++f)
    for (int64_t i = 0; i < n; ++i) {
      double sum = 0.0;
      int64_t count = 0;
      for (int64_t t = 0; t < S; ++t)
        if (out.observed(t, i)) {
          sum += out.values.at(f, t, i);
          ++count;
        }
      if (count == 0)
        throw DataError("clean_series: series '" + data.series[static_cast<size_t>(i)] +
                        "' has no in-bounds observations to impute from");
      double mean = sum / static_cast<double>(count);
      for (int64_t t = 0; t < S; ++t)
        if (!out.observed(t, i)) {
          out.values.at(f, t, i) = mean;
          if (f == 0) ++rep.imputed;
        }
    }

  if (report) *report = rep;
  return out;
}

TimeSeriesTensor resample_mean(const TimeSeriesTensor& data, int64_t factor,
                               ResampleReport* report) {
  if (factor < 1) throw DataError("resample_mean: factor must be >= 1");
  const int64_t F = data.feature_count(), S = data.step_count(), n = data.series_count();
  const int64_t groups = S / factor;
  if (groups == 0) throw DataError("resample_mean: fewer steps than one group");
  ResampleReport rep;
  rep.dropped_steps = S - groups * factor;

  TimeSeriesTensor out;
  out.features = data.features;
  out.series = data.series;
  out.frequency_seconds = data.frequency_seconds * factor;
  out.first_timestamp = data.first_timestamp;
  out.values = Tensor{Shape{F, groups, n}};
  out.mask.assign(static_cast<size_t>(groups * n), 0);

  for (int64_t gidx = 0; gidx < groups; ++gidx)
    for (int64_t i = 0; i < n; ++i) {
      int64_t count = 0;
      for (int64_t k = 0; k < factor; ++k)
        if (data.observed(gidx * factor + k, i)) ++count;
      if (count == 0) {
        ++rep.empty_groups;
        continue;
      }
      out.set_observed(gidx, i, true);
      for (int64_t f = 0; f < F; ++f) {
        double sum = 0.0;
        for (int64_t k = 0; k < factor; ++k)
          if (data.observed(gidx * factor + k, i)) sum += data.values.at(f, gidx * factor + k, i);
        out.values.at(f, gidx, i) = sum / static_cast<double>(count);
      }
    }

  if (report) *report = rep;
  return out;
}

SplitResult temporal_split(const TimeSeriesTensor& data, const SplitFractions& fractions,
                           const WindowSpec& spec) {
  if (fractions.train <= 0.0 || fractions.val < 0.0 || fractions.test < 0.0)
    throw DataError("temporal_split: fractions must be non-negative, train positive");
  double sum = fractions.train + fractions.val + fractions.test;
  if (std::fabs(sum - 1.0) > 1e-9)
    throw DataError("temporal_split: fractions sum to " + std::to_string(sum) +
                    ", expected 1");
  if (spec.input_steps <= 0 || spec.horizon_steps <= 0)
    throw DataError("temporal_split: window lengths must be positive");

  const int64_t S = data.step_count();
  const int64_t n_train = static_cast<int64_t>(std::floor(fractions.train * static_cast<double>(S)));
  const int64_t n_val = static_cast<int64_t>(std::floor(fractions.val * static_cast<double>(S)));
  const int64_t n_test = S - n_train - n_val;
  const int64_t need = spec.total();

  auto check = [&](const char* name, int64_t len) {
    if (len < need)
      throw DataError(std::string("temporal_split: ") + name + " segment has " +
                      std::to_string(len) + " steps, needs at least " +
                      std::to_string(need) + " for one window");
  };
  check("train", n_train);
  check("val", n_val);
  check("test", n_test);

  SplitResult out;
  out.train = data.slice_steps(0, n_train);
  out.val = data.slice_steps(n_train, n_train + n_val);
  out.test = data.slice_steps(n_train + n_val, S);
  return out;
}

std::vector<Window> make_windows(int64_t segment_steps, const WindowSpec& spec) {
  if (spec.input_steps <= 0 || spec.horizon_steps <= 0)
    throw DataError("make_windows: window lengths must be positive");
  std::vector<Window> out;
  const int64_t last = segment_steps - spec.total();
  for (int64_t s = 0; s <= last; ++s) out.push_back(Window{s});
  return out;
}

Standardizer Standardizer::fit(const TimeSeriesTensor& train) {
  const int64_t F = train.feature_count(), S = train.step_count(), n = train.series_count();
  Standardizer st;
  st.mean_ = Tensor{Shape{F, n}};
  st.std_ = Tensor{Shape{F, n}};
  for (int64_t f = 0; f < F; ++f)
    for (int64_t i = 0; i < n; ++i) {
      double sum = 0.0;
      int64_t count = 0;
      for (int64_t t = 0; t < S; ++t)
        if (train.observed(t, i)) {
          sum += train.values.at(f, t, i);
          ++count;
        }
      if (count == 0)
        throw DataError("standardizer: series '" + train.series[static_cast<size_t>(i)] +
                        "' has no observed training values");
      double mean = sum / static_cast<double>(count);
      double ss = 0.0;
      for (int64_t t = 0; t < S; ++t)
        if (train.observed(t, i)) {
          double d = train.values.at(f, t, i) - mean;
          ss += d * d;
        }
      double sd = std::sqrt(ss / static_cast<double>(count));
      st.mean_.at(f, i) = mean;
      st.std_.at(f, i) = sd < 1e-8 ? 1e-8 : sd;
    }
  return st;
}

TimeSeriesTensor Standardizer::transform(const TimeSeriesTensor& data) const {
  const int64_t F = data.feature_count(), S = data.step_count(), n = data.series_count();
  if (F != mean_.rows() || n != mean_.cols())
    throw DataError("standardizer: fitted on " + shape_str(mean_.shape) +
                    " (features, series), got panel with " + std::to_string(F) +
                    " features and " + std::to_string(n) + " series");
  TimeSeriesTensor out = data;
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = 0; t < S; ++t)
      for (int64_t i = 0; i < n; ++i)
        out.values.at(f, t, i) = (data.values.at(f, t, i) - mean_.at(f, i)) / std_.at(f, i);
  return out;
}

TimeSeriesTensor Standardizer::inverse(const TimeSeriesTensor& data) const {
  const int64_t F = data.feature_count(), S = data.step_count(), n = data.series_count();
  if (F != mean_.rows() || n != mean_.cols())
    throw DataError("standardizer: fitted on " + shape_str(mean_.shape) +
                    " (features, series), got panel with " + std::to_string(F) +
                    " features and " + std::to_string(n) + " series");
  TimeSeriesTensor out = data;
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = 0; t < S; ++t)
      for (int64_t i = 0; i < n; ++i)
        out.values.at(f, t, i) = data.values.at(f, t, i) * std_.at(f, i) + mean_.at(f, i);
  return out;
}

}  // namespace gts::data
