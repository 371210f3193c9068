#include "gts/synth.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "gts/rng.hpp"
#include "gts/timeparse.hpp"

namespace gts::synth {

double spectral_radius_estimate(const Tensor& m, int64_t iters) {
  if (m.rank() != 2 || m.rows() != m.cols())
    throw ShapeError("spectral_radius_estimate: need a square matrix");
  const int64_t n = m.rows();
  Rng rng(0x5eedull);
  std::vector<double> v(static_cast<size_t>(n)), w(static_cast<size_t>(n));
  for (auto& x : v) x = rng.normal();
  double log_growth = 0.0;
  int64_t counted = 0;
  for (int64_t it = 0; it < iters; ++it) {
    for (int64_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) s += m.at(i, j) * v[static_cast<size_t>(j)];
      w[static_cast<size_t>(i)] = s;
    }
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    // average the growth rate over the tail, once transients have decayed
    if (it >= iters / 3) {
      log_growth += std::log(norm);
      ++counted;
    }
    for (int64_t i = 0; i < n; ++i) v[static_cast<size_t>(i)] = w[static_cast<size_t>(i)] / norm;
  }
  return std::exp(log_growth / static_cast<double>(counted));
}

SynthResult generate(const SynthConfig& cfg) {
  if (cfg.nodes < 2) throw Error("synth: need at least 2 nodes");
  if (cfg.steps < 1) throw Error("synth: steps must be >= 1");
  if (cfg.density < 0.0 || cfg.density > 1.0)
    throw Error("synth: density must be in [0, 1]");
  if (!(cfg.spectral_radius > 0.0 && cfg.spectral_radius < 1.0))
    throw Error("synth: spectral_radius must be in (0, 1)");
  if (cfg.ar_noise < 0.0 || cfg.ar_noise >= 1.0)
    throw Error("synth: ar_noise must be in [0, 1)");

  const int64_t n = cfg.nodes;
  Rng root(cfg.seed);
  Rng graph_rng = root.split("graph");
  Rng weight_rng = root.split("weights");
  Rng noise_rng = root.split("process");
  Rng obs_rng = root.split("observe");

  SynthResult out;
  out.graph = Tensor{Shape{n, n}};
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      if (i != j && graph_rng.uniform() < cfg.density) out.graph.at(i, j) = 1.0;

  Tensor m{Shape{n, n}};
  for (int64_t i = 0; i < n; ++i) m.at(i, i) = weight_rng.uniform(0.7, 1.0);
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j)
      if (out.graph.at(i, j) != 0.0) {
        double w = weight_rng.uniform(0.2, 1.0);
        if (weight_rng.uniform() < 0.5) w = -w;
        m.at(i, j) = w;
      }

  // scale to the requested spectral radius; repeat once to tighten the
  // power-iteration estimate
  for (int round = 0; round < 2; ++round) {
    double radius = spectral_radius_estimate(m);
    if (radius <= 0.0) throw Error("synth: transition matrix collapsed to zero");
    double scale = cfg.spectral_radius / radius;
    for (double& v : m.data) v *= scale;
  }
  out.transition = m;

  const int64_t total = cfg.burn_in + cfg.steps;
  std::vector<double> x(static_cast<size_t>(n), 0.0);
  std::vector<double> eta(static_cast<size_t>(n), 0.0);
  std::vector<double> next(static_cast<size_t>(n));
  Tensor latent{Shape{cfg.steps, n}};
  for (int64_t t = 0; t < total; ++t) {
    for (int64_t i = 0; i < n; ++i)
      eta[static_cast<size_t>(i)] =
          cfg.ar_noise * eta[static_cast<size_t>(i)] + noise_rng.normal();
    for (int64_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int64_t j = 0; j < n; ++j) s += m.at(i, j) * x[static_cast<size_t>(j)];
      next[static_cast<size_t>(i)] = s + eta[static_cast<size_t>(i)];
    }
    x = next;
    if (t >= cfg.burn_in)
      for (int64_t i = 0; i < n; ++i) latent.at(t - cfg.burn_in, i) = x[static_cast<size_t>(i)];
  }

  // rescale so the mean per-series std hits target_std
  double mean_std = 0.0;
  for (int64_t i = 0; i < n; ++i) {
    double mean = 0.0;
    for (int64_t t = 0; t < cfg.steps; ++t) mean += latent.at(t, i);
    mean /= static_cast<double>(cfg.steps);
    double ss = 0.0;
    for (int64_t t = 0; t < cfg.steps; ++t) {
      double d = latent.at(t, i) - mean;
      ss += d * d;
    }
    mean_std += std::sqrt(ss / static_cast<double>(cfg.steps));
  }
  mean_std /= static_cast<double>(n);
  if (mean_std <= 0.0) throw Error("synth: degenerate process, zero variance");
  double scale = cfg.target_std / mean_std;
  for (double& v : latent.data) v *= scale;

  data::TimeSeriesTensor& series = out.series;
  series.features = {"value"};
  series.series.reserve(static_cast<size_t>(n));
  for (int64_t i = 0; i < n; ++i) series.series.push_back("s" + std::to_string(i));
  series.frequency_seconds = cfg.frequency_seconds;
  series.first_timestamp = data::parse_iso8601(cfg.start_timestamp);
  series.values = Tensor{Shape{1, cfg.steps, n}};
  series.mask.assign(static_cast<size_t>(cfg.steps * n), 1);
  for (int64_t t = 0; t < cfg.steps; ++t)
    for (int64_t i = 0; i < n; ++i)
      series.values.at(0, t, i) = latent.at(t, i) + cfg.noise * obs_rng.normal();
  return out;
}

void write_graph_csv(const Tensor& graph, const std::string& path) {
  if (graph.rank() != 2 || graph.rows() != graph.cols())
    throw ShapeError("write_graph_csv: need a square matrix");
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  char buf[32];
  for (int64_t i = 0; i < graph.rows(); ++i) {
    for (int64_t j = 0; j < graph.cols(); ++j) {
      if (j) out << ',';
      std::snprintf(buf, sizeof buf, "%g", graph.at(i, j));
      out << buf;
    }
    out << '\n';
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

Tensor load_graph_csv(const std::string& path, int64_t expected_nodes) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open '" + path + "'");
  std::vector<std::vector<double>> rows;
  std::string line;
  int64_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    auto cells = data::split_csv_line(line);
    std::vector<double> row;
    for (const auto& cell : cells) {
      char* end = nullptr;
      double v = std::strtod(cell.c_str(), &end);
      if (end == cell.c_str() || *end != '\0')
        throw DataError(path + " row " + std::to_string(lineno) +
                        ": malformed cell '" + cell + "'");
      row.push_back(v);
    }
    rows.push_back(std::move(row));
  }
  const int64_t n = static_cast<int64_t>(rows.size());
  if (n == 0) throw DataError(path + ": empty graph file");
  if (expected_nodes > 0 && n != expected_nodes)
    throw DataError(path + ": has " + std::to_string(n) + " rows, expected " +
                    std::to_string(expected_nodes));
  Tensor out{Shape{n, n}};
  for (int64_t i = 0; i < n; ++i) {
    if (static_cast<int64_t>(rows[static_cast<size_t>(i)].size()) != n)
      throw DataError(path + " row " + std::to_string(i + 1) + ": has " +
                      std::to_string(rows[static_cast<size_t>(i)].size()) +
                      " columns, expected " + std::to_string(n));
    for (int64_t j = 0; j < n; ++j) {
      double v = rows[static_cast<size_t>(i)][static_cast<size_t>(j)];
      if (v < 0.0) throw DataError(path + ": negative adjacency entry");
      out.at(i, j) = v;
    }
  }
  return out;
}

void write(const SynthResult& result, const std::string& dir) {
  std::filesystem::create_directories(dir);
  data::save_dataset(result.series, dir);
  write_graph_csv(result.graph, (std::filesystem::path(dir) / "truth_graph.csv").string());
}

}  // namespace gts::synth
