#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "gts/forecaster.hpp"
#include "gts/pipeline.hpp"
#include "gts/structure.hpp"
#include "json.hpp"

namespace gts {

// Experiment description parsed from JSON. Validation errors throw
// ConfigError carrying the dotted field path. Unknown keys are rejected.
struct ExperimentConfig {
  // data
  std::string data_path;  // required; relative paths resolve via GTS_DATA_DIR
  bool bounds_set = false;
  double bounds_lower = 0.0, bounds_upper = 0.0;
  int64_t resample_factor = 1;
  data::SplitFractions split;
  data::WindowSpec window;  // required
  std::vector<int64_t> target_features{0};

  // model
  structure::ExtractorConfig extractor;
  structure::PredictorConfig predictor;
  gnn::ForecasterConfig forecaster;  // input/target dims resolved from data later

  // training
  int64_t epochs = 100;
  int64_t batch_size = 16;
  double lr = 0.01;
  std::vector<double> lr_milestones{0.6, 0.8};
  double lr_decay = 0.1;
  double clip_norm = 5.0;
  double lambda = 0.0;
  std::string mode = "learned";  // learned | fixed_prior
  int64_t knn_k = 5;
  std::string knn_similarity = "abs_pearson";  // or abs_cosine
  std::string prior_path;  // optional adjacency CSV overriding the knn prior
  double anneal_s0 = 0.5;
  double anneal_s_min = 0.1;
  uint64_t seed = 42;

  // evaluation
  int64_t eval_samples = 10;
  bool average_predictions = true;

  static ExperimentConfig from_json(const nlohmann::json& j);
  static ExperimentConfig from_file(const std::string& path);
  nlohmann::json to_json() const;

  // FNV-1a over the canonical serialized form; checkpoints store it so an
  // evaluation against a different configuration is caught.
  uint64_t hash() const;
  std::string hash_hex() const;

  // data_path resolved against GTS_DATA_DIR when relative.
  std::string resolved_data_path() const;

  structure::Similarity knn_similarity_kind() const;
};

}  // namespace gts
