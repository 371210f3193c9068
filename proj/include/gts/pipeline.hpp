#pragma once

#include <cstdint>
#include <vector>

#include "gts/dataset.hpp"

namespace gts::data {

struct CleanReport {
  int64_t out_of_bounds = 0;  // observed cells forced missing by the bounds filter
  int64_t imputed = 0;        // missing series-steps filled with the series mean
};

// Marks series-steps with any feature outside [lower, upper] as missing, then
// fills every missing step of each (feature, series) with the mean of its
// remaining observed values. The mask still records which steps were truly
// observed; downstream metrics use it to skip imputed entries.
TimeSeriesTensor clean_series(const TimeSeriesTensor& data, double lower, double upper,
                              CleanReport* report = nullptr);

struct ResampleReport {
  int64_t dropped_steps = 0;  // trailing steps not forming a full group
  int64_t empty_groups = 0;   // output steps with no observed input
};

// Aggregates each run of `factor` consecutive steps to the mean of its
// observed entries. Groups with no observed entries stay missing.
TimeSeriesTensor resample_mean(const TimeSeriesTensor& data, int64_t factor,
                               ResampleReport* report = nullptr);

struct WindowSpec {
  int64_t input_steps = 0;    // T
  int64_t horizon_steps = 0;  // tau
  int64_t total() const { return input_steps + horizon_steps; }
};

struct SplitFractions {
  double train = 0.7, val = 0.1, test = 0.2;
};

struct SplitResult {
  TimeSeriesTensor train, val, test;
};

// Contiguous temporal split: floor(train*S) then floor(val*S) steps, the
// remainder is test. Every segment must fit at least one window.
SplitResult temporal_split(const TimeSeriesTensor& data, const SplitFractions& fractions,
                           const WindowSpec& spec);

struct Window {
  int64_t start = 0;  // inputs [start, start+T), targets [start+T, start+T+tau)
};

std::vector<Window> make_windows(int64_t segment_steps, const WindowSpec& spec);

// Per-(feature, series) affine standardization fitted on observed training
// entries. Population std, floored at 1e-8 so constant series stay finite.
class Standardizer {
 public:
  static Standardizer fit(const TimeSeriesTensor& train);

  TimeSeriesTensor transform(const TimeSeriesTensor& data) const;
  TimeSeriesTensor inverse(const TimeSeriesTensor& data) const;

  double mean(int64_t f, int64_t i) const { return mean_.at(f, i); }
  double std(int64_t f, int64_t i) const { return std_.at(f, i); }
  double to_original(double v, int64_t f, int64_t i) const {
    return v * std_.at(f, i) + mean_.at(f, i);
  }

 private:
  Tensor mean_, std_;  // [F, n]
};

}  // namespace gts::data
