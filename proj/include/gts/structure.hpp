#pragma once

#include <cstdint>
#include <string>

#include "gts/dataset.hpp"
#include "gts/param_store.hpp"
#include "gts/rng.hpp"

namespace gts::structure {

// Series feature extractor: shared 1-d convolution over each feature's full
// training sequence, flattened and projected to an embedding per series.
struct ExtractorConfig {
  int64_t channels = 8;
  int64_t kernel = 10;
  int64_t stride = 1;
  int64_t embedding = 16;

  int64_t conv_out_len(int64_t steps) const;
  int64_t fc_inputs(int64_t features, int64_t steps) const {
    return features * channels * conv_out_len(steps);
  }
};

void init_extractor_params(ad::ParameterStore& params, const ExtractorConfig& cfg,
                           int64_t features, int64_t train_steps, Rng& rng);

// Z [n, embedding] from the standardized training panel.
ad::Var extract_features(ad::Graph& g, const ad::BoundParams& bound,
                         const data::TimeSeriesTensor& train_std,
                         const ExtractorConfig& cfg);

// Pairwise link probabilities from embeddings: each ordered pair (i, j) is
// scored by a two-layer head on [z_i || z_j] with a sigmoid output. The
// returned matrix has an exactly zero diagonal (no self-loops).
struct PredictorConfig {
  int64_t hidden = 16;
};

void init_predictor_params(ad::ParameterStore& params, const PredictorConfig& cfg,
                           int64_t embedding, Rng& rng);

ad::Var predict_link_probs(ad::Graph& g, const ad::BoundParams& bound, ad::Var z);

// Difference of two standard Gumbel draws per off-diagonal entry (row-major
// order, two draws each), zero on the diagonal.
Tensor sample_logistic_noise(int64_t n, Rng& rng);

// Differentiable relaxed adjacency: sigmoid((logit(theta) + noise) / s) off
// the diagonal, exactly zero on it. theta's diagonal must be zero.
ad::Var sample_adjacency(ad::Graph& g, ad::Var theta, double temperature,
                         const Tensor& noise);

// Value-level sampler; runs the same op sequence as sample_adjacency so the
// two agree bitwise for equal noise.
struct SampledGraph {
  Tensor adjacency;
  double temperature = 0.0;
};
SampledGraph sample_graph(const Tensor& theta, double temperature, Rng& rng);

// Binary k-nearest-neighbour prior from training-series similarity.
enum class Similarity { kAbsPearson, kAbsCosine };

struct PriorGraph {
  Tensor adjacency;  // [n, n], entries in {0, 1}, zero diagonal
  std::string provenance;
};

PriorGraph build_knn_prior(const data::TimeSeriesTensor& train, int64_t k,
                           Similarity sim = Similarity::kAbsPearson);

// Sum over ordered pairs i != j of the binary cross-entropy between the
// prior edge and theta, with theta clamped to [1e-10, 1 - 1e-10].
ad::Var regularization_loss(ad::Graph& g, ad::Var theta, const Tensor& prior);
double regularization_loss_value(const Tensor& theta, const Tensor& prior);

// Exponential temperature decay s(step) = max(s_min, s0 * exp(-rate * step)).
struct AnnealSchedule {
  double s0 = 0.5;
  double s_min = 0.1;
  double rate = 0.0;

  double at(int64_t step) const;
  // Rate chosen so the floor is reached halfway through training.
  static AnnealSchedule for_total_steps(int64_t total_steps, double s0 = 0.5,
                                        double s_min = 0.1);
};

}  // namespace gts::structure
