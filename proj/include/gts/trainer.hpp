#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gts/config.hpp"
#include "gts/model.hpp"

namespace gts::train {

// Dataset after cleaning, resampling, splitting and standardization.
// Raw segments keep original units for metric reporting.
struct PreparedData {
  data::SplitResult raw;
  data::SplitResult std;
  data::Standardizer scaler;
  data::CleanReport clean_report;
  uint64_t fingerprint = 0;  // of the processed full panel
};

PreparedData prepare(const ExperimentConfig& cfg);
PreparedData prepare(const ExperimentConfig& cfg, const data::TimeSeriesTensor& raw);

model::ModelSpec resolve_model(const ExperimentConfig& cfg, const PreparedData& data);

struct EpochStats {
  int64_t epoch = 0;
  double train_loss = 0.0;
  double val_mae = 0.0;  // original units, masked entries only
  double lr = 0.0;
  double temperature = 0.0;
  double seconds = 0.0;  // wall clock, excluded from determinism comparisons
};

void save_history_csv(const std::vector<EpochStats>& history, const std::string& path);

// Thrown when a training step produces a non-finite loss or gradient.
class TrainingDiverged : public Error {
 public:
  TrainingDiverged(int64_t epoch_, int64_t step_, const std::string& what,
                   std::vector<EpochStats> history_)
      : Error("training diverged at epoch " + std::to_string(epoch_) + ", step " +
              std::to_string(step_) + ": " + what),
        epoch(epoch_),
        step(step_),
        history(std::move(history_)) {}
  int64_t epoch, step;
  std::vector<EpochStats> history;
};

struct FitResult {
  ad::ParameterStore best_params;   // lowest validation MAE
  ad::ParameterStore final_params;  // after the last step
  std::vector<EpochStats> history;
  int64_t best_epoch = -1;
  double best_val_mae = 0.0;
  model::ModelSpec spec;
  structure::PriorGraph prior;  // adjacency empty when no prior was needed
  double final_temperature = 0.0;
  Tensor best_theta;   // link probabilities of best_params (learned mode)
  Tensor final_theta;  // link probabilities of final_params (learned mode)
  std::string rng_state;  // training stream state after the last step
};

FitResult fit(const ExperimentConfig& cfg, const PreparedData& data);

// Adam with bias correction; step count lives here.
struct AdamState {
  ad::ParameterStore m, v;
  int64_t t = 0;
  static AdamState init(const ad::ParameterStore& params);
};

double global_grad_norm(const ad::ParameterStore& grads);
// Scales all gradients by max_norm / norm when norm exceeds max_norm.
void clip_global_norm(ad::ParameterStore& grads, double max_norm);
void adam_update(ad::ParameterStore& params, const ad::ParameterStore& grads,
                 AdamState& state, double lr, double beta1 = 0.9, double beta2 = 0.999,
                 double eps = 1e-8);

// Learning rate after step decay: base * decay^(milestones passed), where a
// milestone passes once epoch >= floor(fraction * total_epochs).
double lr_at_epoch(double base, int64_t epoch, int64_t total_epochs,
                   const std::vector<double>& milestones, double decay);

struct Checkpoint {
  ad::ParameterStore params;
  nlohmann::json meta;

  // Writes <dir>/checkpoint.bin and <dir>/checkpoint.json.
  void save(const std::string& dir) const;
  static Checkpoint load(const std::string& dir);
};

}  // namespace gts::train
