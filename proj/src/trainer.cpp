#include "gts/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>

#include "gts/evaluator.hpp"
#include "gts/synth.hpp"

namespace gts::train {

namespace {

bool has_missing(const data::TimeSeriesTensor& d) {
  return d.observed_count() != d.step_count() * d.series_count();
}

}  // namespace

PreparedData prepare(const ExperimentConfig& cfg) {
  return prepare(cfg, data::load_dataset(cfg.resolved_data_path()));
}

PreparedData prepare(const ExperimentConfig& cfg, const data::TimeSeriesTensor& raw) {
  PreparedData out;
  data::TimeSeriesTensor panel = raw;
  bool gaps_filled = false;
  if (cfg.bounds_set) {
    panel = data::clean_series(panel, cfg.bounds_lower, cfg.bounds_upper,
                               &out.clean_report);
    gaps_filled = true;  // the bounds pass also imputes every missing step
  }
  if (cfg.resample_factor > 1) {
    panel = data::resample_mean(panel, cfg.resample_factor);
    gaps_filled = false;  // empty groups reintroduce gaps on the new grid
  }
  if (!gaps_filled && has_missing(panel)) {
    // fill remaining gaps with series means; the mask keeps them excluded
    // from metrics
    constexpr double inf = std::numeric_limits<double>::infinity();
    data::CleanReport rep;
    panel = data::clean_series(panel, -inf, inf, &rep);
    out.clean_report.imputed += rep.imputed;
  }
  out.fingerprint = panel.fingerprint();
  out.raw = data::temporal_split(panel, cfg.split, cfg.window);
  out.scaler = data::Standardizer::fit(out.raw.train);
  out.std.train = out.scaler.transform(out.raw.train);
  out.std.val = out.scaler.transform(out.raw.val);
  out.std.test = out.scaler.transform(out.raw.test);
  return out;
}

model::ModelSpec resolve_model(const ExperimentConfig& cfg, const PreparedData& data) {
  model::ModelSpec spec;
  spec.extractor = cfg.extractor;
  spec.predictor = cfg.predictor;
  spec.forecaster = cfg.forecaster;
  spec.target_features = cfg.target_features;
  spec.learned = cfg.mode == "learned";
  spec.nodes = data.std.train.series_count();
  spec.features = data.std.train.feature_count();
  spec.train_steps = data.std.train.step_count();
  spec.forecaster.input_dim = spec.features;
  spec.forecaster.target_dim = static_cast<int64_t>(spec.target_features.size());
  for (int64_t f : spec.target_features)
    if (f < 0 || f >= spec.features)
      throw ConfigError("data.target_features",
                        "feature " + std::to_string(f) + " out of range, dataset has " +
                            std::to_string(spec.features));
  if (spec.learned) spec.extractor.conv_out_len(spec.train_steps);  // validates
  return spec;
}

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error("cannot write '" + path + "'");
  out << "epoch,train_loss,val_mae,lr,temperature,seconds\n";
  char buf[256];
  for (const auto& e : history) {
    std::snprintf(buf, sizeof buf, "%lld,%.12g,%.12g,%.12g,%.12g,%.3f\n",
                  (long long)e.epoch, e.train_loss, e.val_mae, e.lr, e.temperature,
                  e.seconds);
    out << buf;
  }
  if (!out) throw Error("write failed for '" + path + "'");
}

AdamState AdamState::init(const ad::ParameterStore& params) {
  AdamState s;
  s.m = params.zeros_like();
  s.v = params.zeros_like();
  s.t = 0;
  return s;
}

double global_grad_norm(const ad::ParameterStore& grads) {
  double sq = 0.0;
  for (const auto& [name, g] : grads)
    for (double v : g.data) sq += v * v;
  return std::sqrt(sq);
}

void clip_global_norm(ad::ParameterStore& grads, double max_norm) {
  if (max_norm <= 0.0) throw Error("clip_global_norm: max_norm must be positive");
  double norm = global_grad_norm(grads);
  if (norm <= max_norm || norm == 0.0) return;
  double scale = max_norm / norm;
  for (auto& [name, g] : grads)
    for (double& v : g.data) v *= scale;
}

void adam_update(ad::ParameterStore& params, const ad::ParameterStore& grads,
                 AdamState& state, double lr, double beta1, double beta2, double eps) {
  state.t += 1;
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(state.t));
  for (auto& [name, p] : params) {
    const Tensor& g = grads.at(name);
    Tensor& m = state.m.at(name);
    Tensor& v = state.v.at(name);
    if (!g.same_shape(p))
      throw ShapeError("adam_update: gradient shape mismatch for '" + name + "'");
    for (int64_t i = 0; i < p.numel(); ++i) {
      m.at(i) = beta1 * m.at(i) + (1.0 - beta1) * g.at(i);
      v.at(i) = beta2 * v.at(i) + (1.0 - beta2) * g.at(i) * g.at(i);
      double mhat = m.at(i) / bc1;
      double vhat = v.at(i) / bc2;
      p.at(i) -= lr * mhat / (std::sqrt(vhat) + eps);
    }
  }
}

double lr_at_epoch(double base, int64_t epoch, int64_t total_epochs,
                   const std::vector<double>& milestones, double decay) {
  double lr = base;
  for (double m : milestones) {
    auto boundary = static_cast<int64_t>(std::floor(m * static_cast<double>(total_epochs)));
    if (epoch >= boundary) lr *= decay;
  }
  return lr;
}

namespace {

structure::PriorGraph resolve_prior(const ExperimentConfig& cfg, const PreparedData& data) {
  if (!cfg.prior_path.empty()) {
    structure::PriorGraph prior;
    prior.adjacency =
        synth::load_graph_csv(cfg.prior_path, data.std.train.series_count());
    prior.provenance = "file:" + cfg.prior_path;
    return prior;
  }
  return structure::build_knn_prior(data.std.train, cfg.knn_k,
                                    cfg.knn_similarity_kind());
}

}  // namespace

FitResult fit(const ExperimentConfig& cfg, const PreparedData& data) {
  FitResult result;
  result.spec = resolve_model(cfg, data);
  const model::ModelSpec& spec = result.spec;
  const int64_t n = spec.nodes;

  const bool needs_prior = !spec.learned || cfg.lambda > 0.0;
  if (needs_prior) result.prior = resolve_prior(cfg, data);

  ad::ParameterStore params = model::init_params(spec, cfg.seed);
  AdamState adam = AdamState::init(params);

  auto train_windows = data::make_windows(data.std.train.step_count(), cfg.window);
  const int64_t nw = static_cast<int64_t>(train_windows.size());
  const int64_t steps_per_epoch = (nw + cfg.batch_size - 1) / cfg.batch_size;
  const int64_t total_steps = cfg.epochs * steps_per_epoch;
  structure::AnnealSchedule anneal = structure::AnnealSchedule::for_total_steps(
      total_steps, cfg.anneal_s0, cfg.anneal_s_min);

  Rng root(cfg.seed);
  Rng order_rng = root.split("order");
  Rng noise_rng = root.split("gumbel");

  eval::EvalSetup val_setup;
  val_setup.spec = &spec;
  val_setup.params = &params;
  val_setup.scaler = &data.scaler;
  val_setup.seg_std = &data.std.val;
  val_setup.seg_raw = &data.raw.val;
  val_setup.window = cfg.window;
  val_setup.batch_size = cfg.batch_size;

  double best_val = std::numeric_limits<double>::infinity();
  int64_t global_step = 0;
  std::vector<data::Window> order = train_windows;

  for (int64_t epoch = 0; epoch < cfg.epochs; ++epoch) {
    auto t0 = std::chrono::steady_clock::now();
    double lr = lr_at_epoch(cfg.lr, epoch, cfg.epochs, cfg.lr_milestones, cfg.lr_decay);

    // Fisher-Yates
    for (int64_t i = nw - 1; i > 0; --i) {
      int64_t j = order_rng.uniform_int(i + 1);
      std::swap(order[static_cast<size_t>(i)], order[static_cast<size_t>(j)]);
    }

    double loss_sum = 0.0;
    for (int64_t first = 0; first < nw; first += cfg.batch_size) {
      int64_t count = std::min<int64_t>(cfg.batch_size, nw - first);
      model::Batch batch =
          model::make_batch(data.std.train, order, static_cast<size_t>(first),
                            static_cast<size_t>(count), cfg.window, spec.target_features);
      double temperature = anneal.at(global_step);
      try {
        ad::Graph g;
        ad::BoundParams bound = ad::bind(g, params);
        ad::Var loss;
        if (spec.learned) {
          Tensor noise = structure::sample_logistic_noise(n, noise_rng);
          loss = model::training_loss(g, bound, data.std.train, batch, spec, cfg.lambda,
                                      needs_prior ? &result.prior.adjacency : nullptr,
                                      temperature, noise);
        } else {
          loss = model::fixed_graph_loss(g, bound, result.prior.adjacency, batch, spec);
        }
        loss_sum += g.value(loss).at(0) * static_cast<double>(count);
        g.backward(loss);
        ad::ParameterStore grads = ad::read_gradients(g, bound, params);
        clip_global_norm(grads, cfg.clip_norm);
        adam_update(params, grads, adam, lr);
      } catch (const NonFiniteError& e) {
        throw TrainingDiverged(epoch, global_step, e.what(), result.history);
      }
      ++global_step;
    }

    // validation with the current temperature, one sampled graph
    double val_mae;
    double temperature_now = anneal.at(global_step);
    if (spec.learned) {
      Tensor theta = model::link_probabilities_value(params, data.std.train, spec);
      Rng val_rng = root.split("val", static_cast<uint64_t>(epoch));
      structure::SampledGraph sg = structure::sample_graph(theta, temperature_now, val_rng);
      val_mae = eval::masked_mae_with_adjacency(val_setup, sg.adjacency);
    } else {
      val_mae = eval::masked_mae_with_adjacency(val_setup, result.prior.adjacency);
    }

    EpochStats stats;
    stats.epoch = epoch;
    stats.train_loss = loss_sum / static_cast<double>(nw);
    stats.val_mae = val_mae;
    stats.lr = lr;
    stats.temperature = temperature_now;
    stats.seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    result.history.push_back(stats);

    if (val_mae < best_val) {
      best_val = val_mae;
      result.best_epoch = epoch;
      result.best_params = params;
    }
  }

  result.final_params = params;
  if (result.best_epoch < 0) {
    result.best_params = params;
    result.best_epoch = cfg.epochs - 1;
    best_val = result.history.empty() ? std::numeric_limits<double>::quiet_NaN()
                                      : result.history.back().val_mae;
  }
  result.best_val_mae = best_val;
  result.final_temperature = anneal.at(total_steps);
  result.rng_state = noise_rng.state_string();
  if (spec.learned) {
    result.best_theta = model::link_probabilities_value(result.best_params, data.std.train, spec);
    result.final_theta = model::link_probabilities_value(result.final_params, data.std.train, spec);
  }
  return result;
}

void Checkpoint::save(const std::string& dir) const {
  std::filesystem::create_directories(dir);
  auto bin = (std::filesystem::path(dir) / "checkpoint.bin").string();
  auto idx = (std::filesystem::path(dir) / "checkpoint.json").string();
  params.save(bin, idx, meta.empty() ? std::string{} : meta.dump());
}

Checkpoint Checkpoint::load(const std::string& dir) {
  auto bin = (std::filesystem::path(dir) / "checkpoint.bin").string();
  auto idx = (std::filesystem::path(dir) / "checkpoint.json").string();
  Checkpoint c;
  c.params = ad::ParameterStore::load(bin, idx);
  std::string meta = ad::ParameterStore::read_meta(idx);
  c.meta = meta.empty() ? nlohmann::json::object() : nlohmann::json::parse(meta);
  return c;
}

}  // namespace gts::train
