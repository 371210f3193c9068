#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gts/tensor.hpp"

namespace gts::data {

// Aligned multivariate panel: values[f, t, i] is feature f of series i at
// step t. mask[t, i] marks observed entries; missing entries hold 0 in
// values (across all features of that series at that step).
struct TimeSeriesTensor {
  Tensor values;  // [F, S, n]
  std::vector<uint8_t> mask;
  std::vector<std::string> features;
  std::vector<std::string> series;
  int64_t frequency_seconds = 0;
  int64_t first_timestamp = 0;

  int64_t feature_count() const { return values.rank() == 3 ? values.dim(0) : 0; }
  int64_t step_count() const { return values.rank() == 3 ? values.dim(1) : 0; }
  int64_t series_count() const { return values.rank() == 3 ? values.dim(2) : 0; }

  bool observed(int64_t t, int64_t i) const {
    return mask[static_cast<size_t>(t * series_count() + i)] != 0;
  }
  void set_observed(int64_t t, int64_t i, bool v) {
    mask[static_cast<size_t>(t * series_count() + i)] = v ? 1 : 0;
  }
  int64_t timestamp_at(int64_t t) const { return first_timestamp + t * frequency_seconds; }
  int64_t observed_count() const;

  // Contiguous step range [t0, t1) as a new panel.
  TimeSeriesTensor slice_steps(int64_t t0, int64_t t1) const;

  // Stable fingerprint of contents (values, mask, names, metadata).
  uint64_t fingerprint() const;
};

// Directory layout: meta.json plus one CSV per feature named <feature>.csv,
// first column ISO-8601 timestamps, one column per series. Empty cells are
// missing observations.
TimeSeriesTensor load_dataset(const std::string& dir);
void save_dataset(const TimeSeriesTensor& data, const std::string& dir);

std::vector<std::string> split_csv_line(const std::string& line);

}  // namespace gts::data
