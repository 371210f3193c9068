#include "gts/cli.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>

#include "CLI11.hpp"
#include "gts/config.hpp"
#include "gts/evaluator.hpp"
#include "gts/svg.hpp"
#include "gts/synth.hpp"
#include "gts/trainer.hpp"

namespace gts::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

// All artifacts are written to a sibling temp path and renamed into place so
// readers never observe partial files.
void write_atomic(const fs::path& final_path,
                  const std::function<void(const std::string&)>& writer) {
  fs::path tmp = final_path;
  tmp += ".tmp";
  writer(tmp.string());
  fs::rename(tmp, final_path);
}

void write_text(const fs::path& path, const std::string& content) {
  write_atomic(path, [&](const std::string& p) {
    std::ofstream out(p, std::ios::trunc);
    if (!out) throw Error("cannot write '" + p + "'");
    out << content;
    if (!out) throw Error("write failed for '" + p + "'");
  });
}

void write_matrix_csv(const fs::path& path, const Tensor& m, const char* cell_format) {
  if (m.rank() != 2) throw Error("matrix csv: need rank-2 tensor");
  std::string body;
  char buf[64];
  for (int64_t i = 0; i < m.rows(); ++i) {
    for (int64_t j = 0; j < m.cols(); ++j) {
      if (j) body += ',';
      std::snprintf(buf, sizeof buf, cell_format, m.at(i, j));
      body += buf;
    }
    body += '\n';
  }
  write_text(path, body);
}

std::vector<int64_t> parse_int_list(const std::string& csv, const char* flag) {
  std::vector<int64_t> out;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) throw ConfigError(flag, "empty entry in list");
    size_t pos = 0;
    int64_t v;
    try {
      v = std::stoll(cur, &pos);
    } catch (const std::exception&) {
      throw ConfigError(flag, "malformed integer '" + cur + "'");
    }
    if (pos != cur.size()) throw ConfigError(flag, "malformed integer '" + cur + "'");
    out.push_back(v);
    cur.clear();
  };
  for (char c : csv) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      cur += c;
  }
  flush();
  return out;
}

std::vector<double> parse_double_list(const std::string& csv, const char* flag) {
  std::vector<double> out;
  std::string cur;
  auto flush = [&]() {
    if (cur.empty()) throw ConfigError(flag, "empty entry in list");
    size_t pos = 0;
    double v;
    try {
      v = std::stod(cur, &pos);
    } catch (const std::exception&) {
      throw ConfigError(flag, "malformed number '" + cur + "'");
    }
    if (pos != cur.size()) throw ConfigError(flag, "malformed number '" + cur + "'");
    out.push_back(v);
    cur.clear();
  };
  for (char c : csv) {
    if (c == ',')
      flush();
    else if (!std::isspace(static_cast<unsigned char>(c)))
      cur += c;
  }
  flush();
  return out;
}

json checkpoint_meta(const ExperimentConfig& cfg, const train::PreparedData& data,
                     const train::FitResult& fit) {
  char fp[32];
  std::snprintf(fp, sizeof fp, "%016llx", (unsigned long long)data.fingerprint);
  json meta;
  meta["config"] = cfg.to_json();
  meta["config_hash"] = cfg.hash_hex();
  meta["dataset_fingerprint"] = fp;
  meta["mode"] = cfg.mode;
  meta["nodes"] = fit.spec.nodes;
  meta["best_epoch"] = fit.best_epoch;
  meta["best_val_mae"] = fit.best_val_mae;
  meta["final_temperature"] = fit.final_temperature;
  meta["rng_state"] = fit.rng_state;
  if (!fit.prior.provenance.empty()) meta["prior"] = fit.prior.provenance;
  return meta;
}

// Test-set report for the best parameters of a finished fit.
eval::MetricReport test_report(const ExperimentConfig& cfg, const train::PreparedData& data,
                               const train::FitResult& fit,
                               const std::vector<int64_t>& horizons,
                               const ad::ParameterStore& params) {
  eval::EvalSetup setup;
  setup.spec = &fit.spec;
  setup.params = &params;
  setup.scaler = &data.scaler;
  setup.seg_std = &data.std.test;
  setup.seg_raw = &data.raw.test;
  setup.window = cfg.window;
  setup.batch_size = cfg.batch_size;
  setup.horizons = horizons;
  if (fit.spec.learned) {
    Tensor theta = model::link_probabilities_value(params, data.std.train, fit.spec);
    Rng rng = Rng(cfg.seed).split("eval");
    return eval::evaluate_sampled(setup, theta, fit.final_temperature, cfg.eval_samples,
                                  cfg.average_predictions, rng);
  }
  return eval::evaluate_with_adjacency(setup, fit.prior.adjacency);
}

void save_checkpoint_atomic(const fs::path& dir, const ad::ParameterStore& params,
                            const json& meta) {
  fs::create_directories(dir);
  fs::path bin = dir / "checkpoint.bin";
  fs::path idx = dir / "checkpoint.json";
  fs::path bin_tmp = bin, idx_tmp = idx;
  bin_tmp += ".tmp";
  idx_tmp += ".tmp";
  params.save(bin_tmp.string(), idx_tmp.string(), meta.dump());
  fs::rename(bin_tmp, bin);
  fs::rename(idx_tmp, idx);
}

int cmd_synth(const std::string& out_dir, int64_t nodes, int64_t steps, double density,
              double noise, uint64_t seed, int64_t frequency) {
  synth::SynthConfig cfg;
  cfg.nodes = nodes;
  cfg.steps = steps;
  cfg.density = density;
  cfg.noise = noise;
  cfg.seed = seed;
  cfg.frequency_seconds = frequency;
  synth::SynthResult result = synth::generate(cfg);
  synth::write(result, out_dir);
  int64_t edges = 0;
  for (double v : result.graph.data) edges += v != 0.0;
  std::printf("wrote %lld steps x %lld nodes to %s (%lld true edges)\n",
              (long long)steps, (long long)nodes, out_dir.c_str(), (long long)edges);
  return 0;
}

int cmd_train(const std::string& config_path, std::optional<uint64_t> seed_override,
              const std::string& out_dir) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  if (seed_override) cfg.seed = *seed_override;

  train::PreparedData data = train::prepare(cfg);
  train::FitResult fit = train::fit(cfg, data);

  fs::create_directories(out_dir);
  fs::path out(out_dir);

  json meta = checkpoint_meta(cfg, data, fit);
  save_checkpoint_atomic(out, fit.best_params, meta);

  // with all defaults materialized, re-running from this file reproduces the run
  write_text(out / "resolved_config.json", cfg.to_json().dump(2) + "\n");

  write_atomic(out / "history.csv", [&](const std::string& p) {
    train::save_history_csv(fit.history, p);
  });

  const Tensor& structure_matrix =
      fit.spec.learned ? fit.best_theta : fit.prior.adjacency;
  write_matrix_csv(out / "theta.csv", structure_matrix, "%.6f");

  eval::MetricReport report = test_report(cfg, data, fit, {}, fit.best_params);
  json mj = report.to_json();
  mj["config_hash"] = cfg.hash_hex();
  mj["mode"] = cfg.mode;
  mj["best_epoch"] = fit.best_epoch;
  mj["best_val_mae"] = fit.best_val_mae;
  write_text(out / "metrics.json", mj.dump(2) + "\n");

  std::printf("trained %lld epochs, best epoch %lld (val MAE %.6f), test MAE %.6f\n",
              (long long)cfg.epochs, (long long)fit.best_epoch, fit.best_val_mae,
              report.overall.mae);
  return 0;
}

// A checkpoint evaluated under a different configuration is a usage error.
void check_config_hash(const ExperimentConfig& cfg, const train::Checkpoint& ckpt) {
  std::string stored = ckpt.meta.value("config_hash", "");
  if (!stored.empty() && stored != cfg.hash_hex())
    throw ConfigError("--config", "checkpoint was trained with config hash " + stored +
                                      ", current config hashes to " + cfg.hash_hex());
}

// Per-horizon metric table; the overall row pools the reported horizons.
std::string metrics_csv(const eval::MetricReport& report) {
  std::string csv = "horizon,mae,rmse,mape,count,mape_count\n";
  char buf[256];
  auto row = [&](const std::string& label, const eval::MetricSlice& s) {
    std::string mape = "";
    if (s.mape_count > 0) {
      std::snprintf(buf, sizeof buf, "%.12g", s.mape);
      mape = buf;
    }
    std::snprintf(buf, sizeof buf, "%s,%.12g,%.12g,%s,%lld,%lld\n", label.c_str(), s.mae,
                  s.rmse, mape.c_str(), (long long)s.count, (long long)s.mape_count);
    csv += buf;
  };
  for (size_t i = 0; i < report.horizons.size(); ++i)
    row(std::to_string(report.horizons[i]), report.per_horizon[i]);
  row("overall", report.overall);
  return csv;
}

int cmd_eval(const std::string& config_path, const std::string& checkpoint_dir,
             const std::string& out_dir, const std::string& horizons_csv,
             bool with_baseline) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  train::Checkpoint ckpt = train::Checkpoint::load(checkpoint_dir);
  check_config_hash(cfg, ckpt);

  std::vector<int64_t> horizons;
  if (!horizons_csv.empty()) horizons = parse_int_list(horizons_csv, "--horizons");

  train::PreparedData data = train::prepare(cfg);
  model::ModelSpec spec = train::resolve_model(cfg, data);

  eval::EvalSetup setup;
  setup.spec = &spec;
  setup.params = &ckpt.params;
  setup.scaler = &data.scaler;
  setup.seg_std = &data.std.test;
  setup.seg_raw = &data.raw.test;
  setup.window = cfg.window;
  setup.batch_size = cfg.batch_size;
  setup.horizons = horizons;

  eval::MetricReport report;
  if (spec.learned) {
    Tensor theta = model::link_probabilities_value(ckpt.params, data.std.train, spec);
    double temperature = ckpt.meta.value("final_temperature", cfg.anneal_s_min);
    Rng rng = Rng(cfg.seed).split("eval");
    report = eval::evaluate_sampled(setup, theta, temperature, cfg.eval_samples,
                                    cfg.average_predictions, rng);
  } else {
    structure::PriorGraph prior;
    if (!cfg.prior_path.empty()) {
      prior.adjacency = synth::load_graph_csv(cfg.prior_path, spec.nodes);
    } else {
      prior = structure::build_knn_prior(data.std.train, cfg.knn_k,
                                         cfg.knn_similarity_kind());
    }
    report = eval::evaluate_with_adjacency(setup, prior.adjacency);
  }

  json mj = report.to_json();
  mj["config_hash"] = cfg.hash_hex();
  mj["mode"] = cfg.mode;
  if (with_baseline) {
    int64_t period = 86400 / data.raw.train.frequency_seconds;
    if (period < 1) period = 1;
    eval::MetricReport ha = eval::evaluate_historical_average(
        data.raw.train, data.raw.test, cfg.window, period, cfg.target_features, horizons);
    mj["historical_average"] = ha.to_json();
  }

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "metrics.json", mj.dump(2) + "\n");
  write_text(fs::path(out_dir) / "metrics.csv", metrics_csv(report));
  std::printf("test MAE %.6f rmse %.6f over %lld entries\n", report.overall.mae,
              report.overall.rmse, (long long)report.overall.count);
  return 0;
}

int cmd_export_graph(const std::string& config_path, const std::string& checkpoint_dir,
                     const std::string& out_dir, double threshold) {
  ExperimentConfig cfg = ExperimentConfig::from_file(config_path);
  train::Checkpoint ckpt = train::Checkpoint::load(checkpoint_dir);
  check_config_hash(cfg, ckpt);
  if (threshold < 0.0 || threshold > 1.0)
    throw ConfigError("--threshold", "must be in [0, 1]");

  train::PreparedData data = train::prepare(cfg);
  model::ModelSpec spec = train::resolve_model(cfg, data);
  Tensor theta;
  if (spec.learned) {
    theta = model::link_probabilities_value(ckpt.params, data.std.train, spec);
  } else if (!cfg.prior_path.empty()) {
    theta = synth::load_graph_csv(cfg.prior_path, spec.nodes);
  } else {
    theta = structure::build_knn_prior(data.std.train, cfg.knn_k,
                                       cfg.knn_similarity_kind())
                .adjacency;
  }

  fs::create_directories(out_dir);
  write_matrix_csv(fs::path(out_dir) / "theta.csv", theta, "%.6f");

  std::string edges = "src,dst,weight\n";
  char buf[96];
  int64_t count = 0;
  for (int64_t i = 0; i < theta.rows(); ++i)
    for (int64_t j = 0; j < theta.cols(); ++j)
      if (i != j && theta.at(i, j) > threshold) {
        std::snprintf(buf, sizeof buf, "%lld,%lld,%.6f\n", (long long)i, (long long)j,
                      theta.at(i, j));
        edges += buf;
        ++count;
      }
  write_text(fs::path(out_dir) / "edges.csv", edges);
  std::printf("wrote %lld x %lld link probabilities and %lld edges above %.3g to %s\n",
              (long long)theta.rows(), (long long)theta.cols(), (long long)count,
              threshold, out_dir.c_str());
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& lambdas_csv,
              const std::string& out_dir) {
  ExperimentConfig base = ExperimentConfig::from_file(config_path);
  if (base.mode != "learned")
    throw ConfigError("training.mode", "sweep requires learned mode");
  std::vector<double> lambdas = parse_double_list(lambdas_csv, "--lambdas");
  if (lambdas.empty()) throw ConfigError("--lambdas", "list is empty");

  train::PreparedData data = train::prepare(base);
  structure::PriorGraph prior;
  if (!base.prior_path.empty()) {
    prior.adjacency =
        synth::load_graph_csv(base.prior_path, data.std.train.series_count());
    prior.provenance = "file:" + base.prior_path;
  } else {
    prior = structure::build_knn_prior(data.std.train, base.knn_k,
                                       base.knn_similarity_kind());
  }

  std::string csv = "lambda,val_mae,test_mae,test_rmse,ce_per_pair\n";
  std::vector<double> xs, test_maes, ces;
  char buf[256];
  for (double lambda : lambdas) {
    if (lambda < 0.0) throw ConfigError("--lambdas", "lambda must be >= 0");
    ExperimentConfig cfg = base;
    cfg.lambda = lambda;
    train::FitResult fit = train::fit(cfg, data);

    eval::MetricReport report = test_report(cfg, data, fit, {}, fit.best_params);
    double n_pairs = static_cast<double>(fit.spec.nodes * (fit.spec.nodes - 1));
    double ce = structure::regularization_loss_value(fit.final_theta, prior.adjacency) /
                n_pairs;
    std::snprintf(buf, sizeof buf, "%g,%.6f,%.6f,%.6f,%.6f\n", lambda, fit.best_val_mae,
                  report.overall.mae, report.overall.rmse, ce);
    csv += buf;
    xs.push_back(lambda);
    test_maes.push_back(report.overall.mae);
    ces.push_back(ce);
    std::printf("lambda %-8g val MAE %.6f  test MAE %.6f  CE/pair %.6f\n", lambda,
                fit.best_val_mae, report.overall.mae, ce);
  }

  fs::create_directories(out_dir);
  write_text(fs::path(out_dir) / "sweep.csv", csv);
  write_atomic(fs::path(out_dir) / "sweep.svg", [&](const std::string& p) {
    svg::write_line_chart(p, "Structural prior sweep", "lambda", "value",
                          {{"test MAE", xs, test_maes}, {"CE per pair", xs, ces}});
  });
  return 0;
}

}  // namespace

int run(int argc, const char* const* argv) {
  CLI::App app{"Joint graph structure learning and forecasting for multivariate time series"};
  app.require_subcommand(1);

  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic diffusion dataset");
  std::string synth_out;
  int64_t synth_nodes = 8, synth_steps = 600, synth_freq = 300;
  double synth_density = 0.25, synth_noise = 0.05;
  uint64_t synth_seed = 7;
  synth_cmd->add_option("--out", synth_out, "output dataset directory")->required();
  synth_cmd->add_option("--nodes", synth_nodes, "number of series");
  synth_cmd->add_option("--steps", synth_steps, "number of observed steps");
  synth_cmd->add_option("--density", synth_density, "edge probability");
  synth_cmd->add_option("--noise", synth_noise, "observation noise std");
  synth_cmd->add_option("--seed", synth_seed, "generator seed");
  synth_cmd->add_option("--frequency", synth_freq, "seconds between steps");

  auto* train_cmd = app.add_subcommand("train", "Train a model from a config file");
  std::string train_config, train_out;
  uint64_t train_seed = 0;
  bool train_seed_set = false;
  train_cmd->add_option("--config", train_config, "experiment config JSON")->required();
  train_cmd->add_option("--out", train_out, "artifact output directory")->required();
  train_cmd->add_option("--seed", train_seed, "override training.seed")
      ->each([&](const std::string&) { train_seed_set = true; });

  auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on the test split");
  std::string eval_config, eval_ckpt, eval_out, eval_horizons;
  bool eval_baseline = false;
  eval_cmd->add_option("--config", eval_config, "experiment config JSON")->required();
  eval_cmd->add_option("--checkpoint", eval_ckpt, "checkpoint directory")->required();
  eval_cmd->add_option("--out", eval_out, "output directory")->required();
  eval_cmd->add_option("--horizons", eval_horizons, "comma-separated horizon steps");
  eval_cmd->add_flag("--baseline", eval_baseline, "include historical-average baseline");

  auto* export_cmd = app.add_subcommand("export-graph", "Threshold and export the learned graph");
  std::string export_config, export_ckpt, export_out;
  double export_threshold = 0.5;
  export_cmd->add_option("--config", export_config, "experiment config JSON")->required();
  export_cmd->add_option("--checkpoint", export_ckpt, "checkpoint directory")->required();
  export_cmd->add_option("--out", export_out, "output directory")->required();
  export_cmd->add_option("--threshold", export_threshold, "edge probability cutoff");

  auto* sweep_cmd = app.add_subcommand("sweep", "Train across a list of lambda values");
  std::string sweep_config, sweep_lambdas, sweep_out;
  sweep_cmd->add_option("--config", sweep_config, "experiment config JSON")->required();
  sweep_cmd->add_option("--lambdas", sweep_lambdas, "comma-separated lambda values")->required();
  sweep_cmd->add_option("--out", sweep_out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (synth_cmd->parsed())
      return cmd_synth(synth_out, synth_nodes, synth_steps, synth_density, synth_noise,
                       synth_seed, synth_freq);
    if (train_cmd->parsed())
      return cmd_train(train_config,
                       train_seed_set ? std::optional<uint64_t>(train_seed) : std::nullopt,
                       train_out);
    if (eval_cmd->parsed())
      return cmd_eval(eval_config, eval_ckpt, eval_out, eval_horizons, eval_baseline);
    if (export_cmd->parsed())
      return cmd_export_graph(export_config, export_ckpt, export_out, export_threshold);
    if (sweep_cmd->parsed()) return cmd_sweep(sweep_config, sweep_lambdas, sweep_out);
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  std::fprintf(stderr, "error: no subcommand\n");
  return 1;
}

}  // namespace gts::cli
