#include "gts/model.hpp"

namespace gts::model {

Batch make_batch(const data::TimeSeriesTensor& segment,
                 const std::vector<data::Window>& windows, size_t first, size_t count,
                 const data::WindowSpec& spec, const std::vector<int64_t>& target_features) {
  if (first + count > windows.size())
    throw Error("make_batch: window range out of bounds");
  if (count == 0) throw Error("make_batch: empty batch");
  const int64_t F = segment.feature_count(), n = segment.series_count();
  const int64_t B = static_cast<int64_t>(count);
  const int64_t Ft = static_cast<int64_t>(target_features.size());
  for (int64_t f : target_features)
    if (f < 0 || f >= F)
      throw Error("make_batch: target feature " + std::to_string(f) + " out of range");

  Batch batch;
  batch.windows = B;
  for (int64_t t = 0; t < spec.input_steps; ++t) {
    Tensor step{Shape{B * n, F}};
    for (int64_t b = 0; b < B; ++b) {
      int64_t s0 = windows[first + static_cast<size_t>(b)].start;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t f = 0; f < F; ++f)
          step.at(b * n + i, f) = segment.values.at(f, s0 + t, i);
    }
    batch.inputs.push_back(std::move(step));
  }
  for (int64_t t = 0; t < spec.horizon_steps; ++t) {
    Tensor step{Shape{B * n, Ft}};
    for (int64_t b = 0; b < B; ++b) {
      int64_t s0 = windows[first + static_cast<size_t>(b)].start;
      for (int64_t i = 0; i < n; ++i)
        for (int64_t ft = 0; ft < Ft; ++ft)
          step.at(b * n + i, ft) =
              segment.values.at(target_features[static_cast<size_t>(ft)],
                                s0 + spec.input_steps + t, i);
    }
    batch.targets.push_back(std::move(step));
  }
  return batch;
}

ad::ParameterStore init_params(const ModelSpec& spec, uint64_t seed) {
  ad::ParameterStore params;
  Rng root(seed);
  if (spec.learned) {
    Rng r1 = root.split("init.extractor");
    init_extractor_params(params, spec.extractor, spec.features, spec.train_steps, r1);
    Rng r2 = root.split("init.predictor");
    init_predictor_params(params, spec.predictor, spec.extractor.embedding, r2);
  }
  Rng r3 = root.split("init.forecaster");
  gnn::init_forecaster_params(params, spec.forecaster, r3);
  return params;
}

ad::Var link_probabilities(ad::Graph& g, const ad::BoundParams& bound,
                           const data::TimeSeriesTensor& train_std, const ModelSpec& spec) {
  if (!spec.learned)
    throw Error("link_probabilities: model has no structure learner (fixed mode)");
  ad::Var z = structure::extract_features(g, bound, train_std, spec.extractor);
  return structure::predict_link_probs(g, bound, z);
}

Tensor link_probabilities_value(const ad::ParameterStore& params,
                                const data::TimeSeriesTensor& train_std,
                                const ModelSpec& spec) {
  ad::Graph g;
  ad::BoundParams bound = ad::bind(g, params);
  ad::Var theta = link_probabilities(g, bound, train_std, spec);
  return g.value(theta);
}

ad::Var forecast_mae(ad::Graph& g, const ad::BoundParams& bound, ad::Var adjacency,
                     const Batch& batch, const ModelSpec& spec) {
  if (batch.inputs.empty() || batch.targets.empty())
    throw Error("forecast_mae: batch has no steps");
  std::vector<ad::Var> inputs;
  inputs.reserve(batch.inputs.size());
  for (const Tensor& t : batch.inputs) inputs.push_back(g.input(t, "batch.input"));

  std::vector<ad::Var> preds =
      gnn::forecast(g, bound, adjacency, inputs, static_cast<int64_t>(batch.targets.size()),
                    spec.forecaster, spec.nodes);

  ad::Var acc;
  int64_t entries = 0;
  for (size_t t = 0; t < preds.size(); ++t) {
    ad::Var target = g.input(batch.targets[t], "batch.target");
    ad::Var abs_err = g.sum_all(g.abs(g.sub(preds[t], target)));
    acc = acc.valid() ? g.add(acc, abs_err) : abs_err;
    entries += batch.targets[t].numel();
  }
  return g.mul_scalar(acc, 1.0 / static_cast<double>(entries));
}

ad::Var training_loss(ad::Graph& g, const ad::BoundParams& bound,
                      const data::TimeSeriesTensor& train_std, const Batch& batch,
                      const ModelSpec& spec, double lambda, const Tensor* prior,
                      double temperature, const Tensor& noise) {
  if (lambda < 0.0) throw Error("training_loss: lambda must be >= 0");
  ad::Var theta = link_probabilities(g, bound, train_std, spec);
  ad::Var adjacency = structure::sample_adjacency(g, theta, temperature, noise);
  ad::Var loss = forecast_mae(g, bound, adjacency, batch, spec);
  if (lambda > 0.0) {
    if (prior == nullptr)
      throw Error("training_loss: lambda > 0 requires a prior graph");
    ad::Var reg = structure::regularization_loss(g, theta, *prior);
    loss = g.add(loss, g.mul_scalar(reg, lambda));
  }
  return loss;
}

ad::Var fixed_graph_loss(ad::Graph& g, const ad::BoundParams& bound,
                         const Tensor& adjacency, const Batch& batch,
                         const ModelSpec& spec) {
  ad::Var a = g.input(adjacency, "fixed.adjacency");
  return forecast_mae(g, bound, a, batch, spec);
}

std::vector<Tensor> predict_values(const ad::ParameterStore& params, const ModelSpec& spec,
                                   const Tensor& adjacency, const Batch& batch) {
  ad::Graph g;
  ad::BoundParams bound = ad::bind(g, params);
  ad::Var a = g.input(adjacency, "eval.adjacency");
  std::vector<ad::Var> inputs;
  inputs.reserve(batch.inputs.size());
  for (const Tensor& t : batch.inputs) inputs.push_back(g.input(t, "batch.input"));
  std::vector<ad::Var> preds =
      gnn::forecast(g, bound, a, inputs, static_cast<int64_t>(batch.targets.size()),
                    spec.forecaster, spec.nodes);
  std::vector<Tensor> out;
  out.reserve(preds.size());
  for (ad::Var p : preds) out.push_back(g.value(p));
  return out;
}

}  // namespace gts::model
