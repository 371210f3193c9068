#pragma once

#include <cstdint>
#include <string>

#include "gts/dataset.hpp"
#include "gts/tensor.hpp"

namespace gts::synth {

// Linear diffusion process on a random directed graph:
//   x_{t+1} = M x_t + eta_{t+1},   eta_{t+1} = ar_noise * eta_t + zeta_{t+1}
// with M = diag(self weights) + G .* W scaled to the target spectral radius,
// zeta iid Gaussian. The coloured process noise keeps multi-step structure
// learnable instead of drowning horizons in white noise. Observations add
// iid Gaussian measurement noise of scale `noise` after the latent state is
// rescaled so the mean per-series std is `target_std`.
struct SynthConfig {
  int64_t nodes = 8;
  int64_t steps = 600;
  double density = 0.25;  // off-diagonal edge probability
  double noise = 0.05;    // observation noise std
  uint64_t seed = 7;
  int64_t frequency_seconds = 300;
  double spectral_radius = 0.95;
  double ar_noise = 0.95;
  double target_std = 2.0;
  int64_t burn_in = 200;
  std::string start_timestamp = "2024-01-01T00:00:00";
};

struct SynthResult {
  data::TimeSeriesTensor series;
  Tensor transition;  // [n, n] scaled M
  Tensor graph;       // [n, n] binary ground-truth edges, zero diagonal
};

SynthResult generate(const SynthConfig& cfg);

// Writes the dataset directory plus truth_graph.csv.
void write(const SynthResult& result, const std::string& dir);

void write_graph_csv(const Tensor& graph, const std::string& path);
Tensor load_graph_csv(const std::string& path, int64_t expected_nodes);

// Power-iteration estimate of the spectral radius via norm growth.
double spectral_radius_estimate(const Tensor& m, int64_t iters = 300);

}  // namespace gts::synth
