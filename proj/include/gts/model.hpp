#pragma once

#include <cstdint>
#include <vector>

#include "gts/forecaster.hpp"
#include "gts/pipeline.hpp"
#include "gts/structure.hpp"

namespace gts::model {

// Resolved model dimensions and sub-configs for one dataset.
struct ModelSpec {
  structure::ExtractorConfig extractor;
  structure::PredictorConfig predictor;
  gnn::ForecasterConfig forecaster;
  std::vector<int64_t> target_features{0};
  bool learned = true;  // false: fixed adjacency, no structure parameters
  int64_t nodes = 0;
  int64_t features = 0;
  int64_t train_steps = 0;
};

// Windows stacked for the batched forecaster: row b*n + i of step tensor t
// holds window b, node i. Inputs carry every feature, targets only the
// configured target features.
struct Batch {
  std::vector<Tensor> inputs;   // T tensors [(B*n) x F]
  std::vector<Tensor> targets;  // tau tensors [(B*n) x Ft]
  int64_t windows = 0;
};

Batch make_batch(const data::TimeSeriesTensor& segment,
                 const std::vector<data::Window>& windows, size_t first, size_t count,
                 const data::WindowSpec& spec, const std::vector<int64_t>& target_features);

ad::ParameterStore init_params(const ModelSpec& spec, uint64_t seed);

// Link probabilities from the standardized training panel.
ad::Var link_probabilities(ad::Graph& g, const ad::BoundParams& bound,
                           const data::TimeSeriesTensor& train_std, const ModelSpec& spec);
Tensor link_probabilities_value(const ad::ParameterStore& params,
                                const data::TimeSeriesTensor& train_std,
                                const ModelSpec& spec);

// Mean absolute error of the forecast against batch targets, averaged over
// every (window, step, node, feature) entry, in standardized units.
ad::Var forecast_mae(ad::Graph& g, const ad::BoundParams& bound, ad::Var adjacency,
                     const Batch& batch, const ModelSpec& spec);

// Full training objective: forecast MAE on a relaxed sampled graph, plus
// lambda times the structural cross-entropy when lambda > 0.
ad::Var training_loss(ad::Graph& g, const ad::BoundParams& bound,
                      const data::TimeSeriesTensor& train_std, const Batch& batch,
                      const ModelSpec& spec, double lambda, const Tensor* prior,
                      double temperature, const Tensor& noise);

// Loss for a fixed adjacency (no sampling, no structure parameters).
ad::Var fixed_graph_loss(ad::Graph& g, const ad::BoundParams& bound,
                         const Tensor& adjacency, const Batch& batch,
                         const ModelSpec& spec);

// Forward-only forecast for a constant adjacency; one tensor per horizon
// step, [(B*n) x Ft], standardized units.
std::vector<Tensor> predict_values(const ad::ParameterStore& params, const ModelSpec& spec,
                                   const Tensor& adjacency, const Batch& batch);

}  // namespace gts::model
