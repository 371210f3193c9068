#include "gts/config.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>

namespace gts {

using nlohmann::json;

namespace {

// Tracks which keys of an object were consumed so leftovers can be named.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(path_, "expected an object");
  }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key);
  }

  const json& get(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  std::string sub(const std::string& key) const {
    return path_.empty() ? key : path_ + "." + key;
  }

  void finish() const {
    for (const auto& [key, v] : j_.items())
      if (!seen_.count(key)) throw ConfigError(sub(key), "unknown field");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

int64_t read_int(ObjectReader& r, const std::string& key, int64_t fallback,
                 int64_t lo, int64_t hi) {
  if (!r.has(key)) return fallback;
  const json& v = r.get(key);
  if (!v.is_number_integer()) throw ConfigError(r.sub(key), "expected an integer");
  int64_t x = v.get<int64_t>();
  if (x < lo || x > hi)
    throw ConfigError(r.sub(key), "must be in [" + std::to_string(lo) + ", " +
                                       std::to_string(hi) + "]");
  return x;
}

int64_t require_int(ObjectReader& r, const std::string& key, int64_t lo, int64_t hi) {
  if (!r.has(key)) throw ConfigError(r.sub(key), "required");
  return read_int(r, key, 0, lo, hi);
}

double read_num(ObjectReader& r, const std::string& key, double fallback, double lo,
                double hi) {
  if (!r.has(key)) return fallback;
  const json& v = r.get(key);
  if (!v.is_number()) throw ConfigError(r.sub(key), "expected a number");
  double x = v.get<double>();
  if (!(x >= lo && x <= hi))
    throw ConfigError(r.sub(key), "must be in [" + std::to_string(lo) + ", " +
                                       std::to_string(hi) + "]");
  return x;
}

std::string read_str(ObjectReader& r, const std::string& key, std::string fallback) {
  if (!r.has(key)) return fallback;
  const json& v = r.get(key);
  if (!v.is_string()) throw ConfigError(r.sub(key), "expected a string");
  return v.get<std::string>();
}

bool read_bool(ObjectReader& r, const std::string& key, bool fallback) {
  if (!r.has(key)) return fallback;
  const json& v = r.get(key);
  if (!v.is_boolean()) throw ConfigError(r.sub(key), "expected a boolean");
  return v.get<bool>();
}

}  // namespace

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  ExperimentConfig c;
  ObjectReader root(j, "");

  {
    if (!root.has("data")) throw ConfigError("data", "required");
    ObjectReader data(root.get("data"), "data");
    if (!data.has("path")) throw ConfigError("data.path", "required");
    c.data_path = read_str(data, "path", "");
    if (c.data_path.empty()) throw ConfigError("data.path", "must be non-empty");
    if (data.has("bounds")) {
      const json& b = data.get("bounds");
      if (!b.is_array() || b.size() != 2 || !b[0].is_number() || !b[1].is_number())
        throw ConfigError("data.bounds", "expected [lower, upper]");
      c.bounds_set = true;
      c.bounds_lower = b[0].get<double>();
      c.bounds_upper = b[1].get<double>();
      if (c.bounds_lower > c.bounds_upper)
        throw ConfigError("data.bounds", "lower exceeds upper");
    }
    c.resample_factor = read_int(data, "resample_factor", 1, 1, 1000000);
    if (data.has("split")) {
      ObjectReader split(data.get("split"), "data.split");
      c.split.train = read_num(split, "train", 0.7, 0.0, 1.0);
      c.split.val = read_num(split, "val", 0.1, 0.0, 1.0);
      c.split.test = read_num(split, "test", 0.2, 0.0, 1.0);
      split.finish();
      double sum = c.split.train + c.split.val + c.split.test;
      if (std::fabs(sum - 1.0) > 1e-9)
        throw ConfigError("data.split", "fractions must sum to 1");
    }
    if (data.has("target_features")) {
      const json& tf = data.get("target_features");
      if (!tf.is_array() || tf.empty())
        throw ConfigError("data.target_features", "expected a non-empty array");
      c.target_features.clear();
      for (const auto& v : tf) {
        if (!v.is_number_integer() || v.get<int64_t>() < 0)
          throw ConfigError("data.target_features", "entries must be non-negative integers");
        c.target_features.push_back(v.get<int64_t>());
      }
    }
    data.finish();
  }

  {
    if (!root.has("window")) throw ConfigError("window", "required");
    ObjectReader win(root.get("window"), "window");
    c.window.input_steps = require_int(win, "T", 1, 100000);
    c.window.horizon_steps = require_int(win, "tau", 1, 100000);
    win.finish();
  }

  if (root.has("model")) {
    ObjectReader model(root.get("model"), "model");
    if (model.has("extractor")) {
      ObjectReader ex(model.get("extractor"), "model.extractor");
      c.extractor.channels = read_int(ex, "channels", 8, 1, 4096);
      c.extractor.kernel = read_int(ex, "kernel", 10, 1, 100000);
      c.extractor.stride = read_int(ex, "stride", 1, 1, 100000);
      c.extractor.embedding = read_int(ex, "embedding", 16, 1, 4096);
      ex.finish();
    }
    // unless set explicitly, the pair-scoring hidden width follows the
    // embedding size
    c.predictor.hidden = c.extractor.embedding;
    if (model.has("predictor")) {
      ObjectReader pr(model.get("predictor"), "model.predictor");
      c.predictor.hidden = read_int(pr, "hidden", c.extractor.embedding, 1, 4096);
      pr.finish();
    }
    if (model.has("forecaster")) {
      ObjectReader fc(model.get("forecaster"), "model.forecaster");
      c.forecaster.hidden = read_int(fc, "hidden", 32, 1, 4096);
      c.forecaster.diffusion_steps = read_int(fc, "diffusion_steps", 2, 0, 16);
      c.forecaster.layers = read_int(fc, "layers", 1, 1, 8);
      fc.finish();
    }
    model.finish();
  }

  if (root.has("training")) {
    ObjectReader tr(root.get("training"), "training");
    c.epochs = read_int(tr, "epochs", 100, 1, 1000000);
    c.batch_size = read_int(tr, "batch_size", 16, 1, 1000000);
    c.lr = read_num(tr, "lr", 0.01, 1e-12, 1e6);
    if (tr.has("lr_milestones")) {
      const json& ms = tr.get("lr_milestones");
      if (!ms.is_array()) throw ConfigError("training.lr_milestones", "expected an array");
      c.lr_milestones.clear();
      double prev = 0.0;
      for (const auto& v : ms) {
        if (!v.is_number()) throw ConfigError("training.lr_milestones", "entries must be numbers");
        double m = v.get<double>();
        if (m <= 0.0 || m >= 1.0 || m < prev)
          throw ConfigError("training.lr_milestones",
                            "entries must be increasing fractions in (0, 1)");
        prev = m;
        c.lr_milestones.push_back(m);
      }
    }
    c.lr_decay = read_num(tr, "lr_decay", 0.1, 1e-6, 1.0);
    c.clip_norm = read_num(tr, "clip_norm", 5.0, 1e-6, 1e9);
    c.lambda = read_num(tr, "lambda", 0.0, 0.0, 1e12);
    c.mode = read_str(tr, "mode", "learned");
    if (c.mode != "learned" && c.mode != "fixed_prior")
      throw ConfigError("training.mode", "must be 'learned' or 'fixed_prior'");
    c.knn_k = read_int(tr, "knn_k", 5, 1, 1000000);
    c.knn_similarity = read_str(tr, "knn_similarity", "abs_pearson");
    if (c.knn_similarity != "abs_pearson" && c.knn_similarity != "abs_cosine")
      throw ConfigError("training.knn_similarity",
                        "must be 'abs_pearson' or 'abs_cosine'");
    c.prior_path = read_str(tr, "prior_path", "");
    if (tr.has("anneal")) {
      ObjectReader an(tr.get("anneal"), "training.anneal");
      c.anneal_s0 = read_num(an, "s0", 0.5, 1e-9, 1e6);
      c.anneal_s_min = read_num(an, "s_min", 0.1, 1e-9, 1e6);
      an.finish();
      if (c.anneal_s_min > c.anneal_s0)
        throw ConfigError("training.anneal", "s_min exceeds s0");
    }
    if (tr.has("seed")) {
      const json& v = tr.get("seed");
      if (!v.is_number_integer() || v.get<int64_t>() < 0)
        throw ConfigError("training.seed", "expected a non-negative integer");
      c.seed = v.get<uint64_t>();
    }
    tr.finish();
  }

  if (root.has("eval")) {
    ObjectReader ev(root.get("eval"), "eval");
    c.eval_samples = read_int(ev, "samples", 10, 1, 100000);
    c.average_predictions = read_bool(ev, "average_predictions", true);
    ev.finish();
  }

  root.finish();
  return c;
}

ExperimentConfig ExperimentConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("(file)", "cannot open '" + path + "'");
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw ConfigError("(file)", "invalid JSON in '" + path + "': " + e.what());
  }
  return from_json(j);
}

json ExperimentConfig::to_json() const {
  json j;
  j["data"]["path"] = data_path;
  if (bounds_set) j["data"]["bounds"] = {bounds_lower, bounds_upper};
  j["data"]["resample_factor"] = resample_factor;
  j["data"]["split"] = {{"train", split.train}, {"val", split.val}, {"test", split.test}};
  j["data"]["target_features"] = target_features;
  j["window"] = {{"T", window.input_steps}, {"tau", window.horizon_steps}};
  j["model"]["extractor"] = {{"channels", extractor.channels},
                             {"kernel", extractor.kernel},
                             {"stride", extractor.stride},
                             {"embedding", extractor.embedding}};
  j["model"]["predictor"] = {{"hidden", predictor.hidden}};
  j["model"]["forecaster"] = {{"hidden", forecaster.hidden},
                              {"diffusion_steps", forecaster.diffusion_steps},
                              {"layers", forecaster.layers}};
  j["training"] = {{"epochs", epochs},
                   {"batch_size", batch_size},
                   {"lr", lr},
                   {"lr_milestones", lr_milestones},
                   {"lr_decay", lr_decay},
                   {"clip_norm", clip_norm},
                   {"lambda", lambda},
                   {"mode", mode},
                   {"knn_k", knn_k},
                   {"knn_similarity", knn_similarity},
                   {"prior_path", prior_path},
                   {"anneal", {{"s0", anneal_s0}, {"s_min", anneal_s_min}}},
                   {"seed", seed}};
  j["eval"] = {{"samples", eval_samples}, {"average_predictions", average_predictions}};
  return j;
}

uint64_t ExperimentConfig::hash() const { return fnv1a64(to_json().dump()); }

std::string ExperimentConfig::hash_hex() const {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)hash());
  return buf;
}

structure::Similarity ExperimentConfig::knn_similarity_kind() const {
  return knn_similarity == "abs_cosine" ? structure::Similarity::kAbsCosine
                                        : structure::Similarity::kAbsPearson;
}

std::string ExperimentConfig::resolved_data_path() const {
  std::filesystem::path p(data_path);
  if (p.is_absolute()) return p.string();
  const char* base = std::getenv("GTS_DATA_DIR");
  if (base && *base) return (std::filesystem::path(base) / p).string();
  return p.string();
}

}  // namespace gts
