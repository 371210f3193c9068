#include "gts/dataset.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gts/rng.hpp"
#include "gts/timeparse.hpp"
#include "json.hpp"

namespace gts::data {

namespace fs = std::filesystem;
using nlohmann::json;

int64_t TimeSeriesTensor::observed_count() const {
  int64_t c = 0;
  for (uint8_t m : mask) c += m != 0;
  return c;
}

TimeSeriesTensor TimeSeriesTensor::slice_steps(int64_t t0, int64_t t1) const {
  const int64_t F = feature_count(), S = step_count(), n = series_count();
  if (t0 < 0 || t1 > S || t0 > t1)
    throw DataError("slice_steps: range [" + std::to_string(t0) + ", " +
                    std::to_string(t1) + ") invalid for " + std::to_string(S) +
                    " steps");
  TimeSeriesTensor out;
  out.features = features;
  out.series = series;
  out.frequency_seconds = frequency_seconds;
  out.first_timestamp = first_timestamp + t0 * frequency_seconds;
  out.values = Tensor{Shape{F, t1 - t0, n}};
  out.mask.assign(static_cast<size_t>((t1 - t0) * n), 0);
  for (int64_t f = 0; f < F; ++f)
    for (int64_t t = t0; t < t1; ++t)
      for (int64_t i = 0; i < n; ++i) out.values.at(f, t - t0, i) = values.at(f, t, i);
  for (int64_t t = t0; t < t1; ++t)
    for (int64_t i = 0; i < n; ++i) out.set_observed(t - t0, i, observed(t, i));
  return out;
}

uint64_t TimeSeriesTensor::fingerprint() const {
  uint64_t h = 0xcbf29ce484222325ull;
  auto mix = [&h](const void* p, size_t len) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (size_t i = 0; i < len; ++i) {
      h ^= b[i];
      h *= 0x100000001b3ull;
    }
  };
  auto mix_str = [&](const std::string& s) {
    mix(s.data(), s.size());
    char z = 0;
    mix(&z, 1);
  };
  for (const auto& f : features) mix_str(f);
  for (const auto& s : series) mix_str(s);
  mix(&frequency_seconds, sizeof frequency_seconds);
  mix(&first_timestamp, sizeof first_timestamp);
  mix(values.data.data(), values.data.size() * sizeof(double));
  mix(mask.data(), mask.size());
  return h;
}

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

namespace {

double parse_cell(const std::string& cell, const std::string& where) {
  const char* s = cell.c_str();
  char* end = nullptr;
  double v = std::strtod(s, &end);
  if (end == s || *end != '\0')
    throw DataError(where + ": malformed numeric cell '" + cell + "'");
  return v;
}

}  // namespace

TimeSeriesTensor load_dataset(const std::string& dir) {
  fs::path root(dir);
  fs::path meta_path = root / "meta.json";
  std::ifstream meta_in(meta_path);
  if (!meta_in) throw DataError("cannot open '" + meta_path.string() + "'");
  json meta;
  try {
    meta = json::parse(meta_in);
  } catch (const json::exception& e) {
    throw DataError("invalid JSON in '" + meta_path.string() + "': " + e.what());
  }

  TimeSeriesTensor out;
  if (!meta.contains("frequency_seconds") || !meta["frequency_seconds"].is_number_integer())
    throw DataError(meta_path.string() + ": missing integer 'frequency_seconds'");
  out.frequency_seconds = meta["frequency_seconds"].get<int64_t>();
  if (out.frequency_seconds <= 0)
    throw DataError(meta_path.string() + ": 'frequency_seconds' must be positive");
  if (!meta.contains("features") || !meta["features"].is_array() || meta["features"].empty())
    throw DataError(meta_path.string() + ": missing non-empty 'features' array");
  if (!meta.contains("series") || !meta["series"].is_array() || meta["series"].empty())
    throw DataError(meta_path.string() + ": missing non-empty 'series' array");
  out.features = meta["features"].get<std::vector<std::string>>();
  out.series = meta["series"].get<std::vector<std::string>>();

  const int64_t F = static_cast<int64_t>(out.features.size());
  const int64_t n = static_cast<int64_t>(out.series.size());
  int64_t S = -1;

  // values filled feature by feature; per-cell "present" flags are folded
  // into a single mask: a series-step is observed only if every feature of
  // it is present.
  std::vector<uint8_t> present;

  for (int64_t f = 0; f < F; ++f) {
    fs::path csv_path = root / (out.features[static_cast<size_t>(f)] + ".csv");
    std::ifstream in(csv_path);
    if (!in) throw DataError("cannot open '" + csv_path.string() + "'");
    std::string line;
    if (!std::getline(in, line))
      throw DataError(csv_path.string() + ": empty file");
    auto header = split_csv_line(line);
    if (header.size() != static_cast<size_t>(n + 1))
      throw DataError(csv_path.string() + ": header has " +
                      std::to_string(header.size() - 1) + " series columns, meta lists " +
                      std::to_string(n));
    for (int64_t i = 0; i < n; ++i)
      if (header[static_cast<size_t>(i + 1)] != out.series[static_cast<size_t>(i)])
        throw DataError(csv_path.string() + ": header column " + std::to_string(i + 1) +
                        " is '" + header[static_cast<size_t>(i + 1)] + "', expected '" +
                        out.series[static_cast<size_t>(i)] + "'");

    std::vector<double> vals;
    std::vector<uint8_t> pres;
    std::vector<int64_t> stamps;
    int64_t row = 0;
    while (std::getline(in, line)) {
      ++row;
      if (line.empty()) continue;
      auto cells = split_csv_line(line);
      if (cells.size() != static_cast<size_t>(n + 1))
        throw DataError(csv_path.string() + " row " + std::to_string(row) + ": has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(n + 1));
      int64_t ts = parse_iso8601(cells[0]);
      if (!stamps.empty() && ts != stamps.back() + out.frequency_seconds)
        throw DataError(csv_path.string() + " row " + std::to_string(row) +
                        ": timestamp '" + cells[0] + "' does not advance by " +
                        std::to_string(out.frequency_seconds) + "s from previous row");
      stamps.push_back(ts);
      for (int64_t i = 0; i < n; ++i) {
        const std::string& cell = cells[static_cast<size_t>(i + 1)];
        if (cell.empty()) {
          vals.push_back(0.0);
          pres.push_back(0);
        } else {
          vals.push_back(parse_cell(cell, csv_path.string() + " row " +
                                              std::to_string(row) + " col " +
                                              std::to_string(i + 1)));
          pres.push_back(1);
        }
      }
    }
    if (stamps.empty()) throw DataError(csv_path.string() + ": no data rows");

    if (f == 0) {
      S = static_cast<int64_t>(stamps.size());
      out.first_timestamp = stamps[0];
      out.values = Tensor{Shape{F, S, n}};
      present.assign(static_cast<size_t>(S * n), 1);
    } else {
      if (static_cast<int64_t>(stamps.size()) != S)
        throw DataError(csv_path.string() + ": has " + std::to_string(stamps.size()) +
                        " rows, expected " + std::to_string(S));
      if (stamps[0] != out.first_timestamp)
        throw DataError(csv_path.string() + ": first timestamp differs from '" +
                        out.features[0] + ".csv'");
    }
    for (int64_t t = 0; t < S; ++t)
      for (int64_t i = 0; i < n; ++i) {
        out.values.at(f, t, i) = vals[static_cast<size_t>(t * n + i)];
        present[static_cast<size_t>(t * n + i)] &= pres[static_cast<size_t>(t * n + i)];
      }
  }

  out.mask = std::move(present);
  // zero every feature of a missing series-step so masked cells carry no data
  for (int64_t t = 0; t < S; ++t)
    for (int64_t i = 0; i < n; ++i)
      if (!out.observed(t, i))
        for (int64_t f = 0; f < F; ++f) out.values.at(f, t, i) = 0.0;
  return out;
}

void save_dataset(const TimeSeriesTensor& data, const std::string& dir) {
  fs::path root(dir);
  fs::create_directories(root);
  json meta;
  meta["frequency_seconds"] = data.frequency_seconds;
  meta["features"] = data.features;
  meta["series"] = data.series;
  {
    std::ofstream out(root / "meta.json", std::ios::trunc);
    if (!out) throw DataError("cannot write '" + (root / "meta.json").string() + "'");
    out << meta.dump(2) << "\n";
  }
  const int64_t F = data.feature_count(), S = data.step_count(), n = data.series_count();
  char buf[64];
  for (int64_t f = 0; f < F; ++f) {
    fs::path csv_path = root / (data.features[static_cast<size_t>(f)] + ".csv");
    std::ofstream out(csv_path, std::ios::trunc);
    if (!out) throw DataError("cannot write '" + csv_path.string() + "'");
    out << "timestamp";
    for (const auto& id : data.series) out << ',' << id;
    out << '\n';
    for (int64_t t = 0; t < S; ++t) {
      out << format_iso8601(data.timestamp_at(t));
      for (int64_t i = 0; i < n; ++i) {
        out << ',';
        if (data.observed(t, i)) {
          std::snprintf(buf, sizeof buf, "%.17g", data.values.at(f, t, i));
          out << buf;
        }
      }
      out << '\n';
    }
    if (!out) throw DataError("write failed for '" + csv_path.string() + "'");
  }
}

}  // namespace gts::data
