#include "gts/structure.hpp"

#include <algorithm>
#include <cmath>

namespace gts::structure {

namespace {

// Glorot-uniform fill, row-major draw order.
void glorot(Tensor& t, int64_t fan_in, int64_t fan_out, Rng& rng) {
  double lim = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
  for (double& v : t.data) v = rng.uniform(-lim, lim);
}

Tensor half_eye(int64_t n) {
  Tensor t{Shape{n, n}};
  for (int64_t i = 0; i < n; ++i) t.at(i, i) = 0.5;
  return t;
}

Tensor ones_off_diagonal(int64_t n) {
  Tensor t{Shape{n, n}, 1.0};
  for (int64_t i = 0; i < n; ++i) t.at(i, i) = 0.0;
  return t;
}

}  // namespace

int64_t ExtractorConfig::conv_out_len(int64_t steps) const {
  if (kernel < 1 || stride < 1)
    throw Error("extractor: kernel and stride must be >= 1");
  if (steps < kernel)
    throw Error("extractor: training sequence has " + std::to_string(steps) +
                " steps, shorter than kernel " + std::to_string(kernel));
  return (steps - kernel) / stride + 1;
}

void init_extractor_params(ad::ParameterStore& params, const ExtractorConfig& cfg,
                           int64_t features, int64_t train_steps, Rng& rng) {
  const int64_t fc_in = cfg.fc_inputs(features, train_steps);
  Tensor kern{Shape{cfg.channels, cfg.kernel}};
  glorot(kern, cfg.kernel, cfg.channels, rng);
  params.add("extractor.conv.kernel", std::move(kern));
  params.add("extractor.conv.bias", Tensor{Shape{cfg.channels}, 0.0});
  Tensor w{Shape{fc_in, cfg.embedding}};
  glorot(w, fc_in, cfg.embedding, rng);
  params.add("extractor.fc.weight", std::move(w));
  params.add("extractor.fc.bias", Tensor{Shape{cfg.embedding}, 0.0});
}

ad::Var extract_features(ad::Graph& g, const ad::BoundParams& bound,
                         const data::TimeSeriesTensor& train_std,
                         const ExtractorConfig& cfg) {
  const int64_t F = train_std.feature_count();
  const int64_t S = train_std.step_count();
  const int64_t n = train_std.series_count();
  cfg.conv_out_len(S);

  ad::Var kernel = bound.at("extractor.conv.kernel");
  ad::Var kbias = bound.at("extractor.conv.bias");

  ad::Var flat;  // [n, F * channels * conv_out]
  for (int64_t f = 0; f < F; ++f) {
    Tensor rows{Shape{n, S}};
    for (int64_t i = 0; i < n; ++i)
      for (int64_t t = 0; t < S; ++t) rows.at(i, t) = train_std.values.at(f, t, i);
    ad::Var x = g.input(std::move(rows), "extractor.series.f" + std::to_string(f));
    ad::Var conv = g.relu(g.conv1d(x, kernel, kbias, cfg.stride));
    flat = flat.valid() ? g.concat_cols(flat, conv) : conv;
  }
  ad::Var z = g.add_rows(g.matmul(flat, bound.at("extractor.fc.weight")),
                         bound.at("extractor.fc.bias"));
  return z;
}

void init_predictor_params(ad::ParameterStore& params, const PredictorConfig& cfg,
                           int64_t embedding, Rng& rng) {
  if (cfg.hidden < 1) throw Error("predictor: hidden width must be >= 1");
  Tensor w1{Shape{2 * embedding, cfg.hidden}};
  glorot(w1, 2 * embedding, cfg.hidden, rng);
  params.add("predictor.fc1.weight", std::move(w1));
  params.add("predictor.fc1.bias", Tensor{Shape{cfg.hidden}, 0.0});
  Tensor w2{Shape{cfg.hidden, 1}};
  glorot(w2, cfg.hidden, 1, rng);
  params.add("predictor.fc2.weight", std::move(w2));
  params.add("predictor.fc2.bias", Tensor{Shape{1}, 0.0});
}

ad::Var predict_link_probs(ad::Graph& g, const ad::BoundParams& bound, ad::Var z) {
  const Tensor& zv = g.value(z);
  if (zv.rank() != 2) throw ShapeError("predict_link_probs: embeddings must be rank-2");
  const int64_t n = zv.rows();

  std::vector<int64_t> left(static_cast<size_t>(n * n));
  std::vector<int64_t> right(static_cast<size_t>(n * n));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      left[static_cast<size_t>(i * n + j)] = i;
      right[static_cast<size_t>(i * n + j)] = j;
    }
  ad::Var pairs = g.concat_cols(g.gather_rows(z, std::move(left)),
                                g.gather_rows(z, std::move(right)));
  ad::Var h = g.relu(g.add_rows(g.matmul(pairs, bound.at("predictor.fc1.weight")),
                                bound.at("predictor.fc1.bias")));
  ad::Var score = g.add_rows(g.matmul(h, bound.at("predictor.fc2.weight")),
                             bound.at("predictor.fc2.bias"));
  ad::Var theta = g.sigmoid(g.reshape(score, Shape{n, n}));
  // kill self-loops exactly
  return g.mul(theta, g.input(ones_off_diagonal(n), "offdiag.mask"));
}

Tensor sample_logistic_noise(int64_t n, Rng& rng) {
  Tensor noise{Shape{n, n}};
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      if (i == j) continue;
      double g1 = rng.gumbel();
      double g2 = rng.gumbel();
      noise.at(i, j) = g1 - g2;
    }
  return noise;
}

ad::Var sample_adjacency(ad::Graph& g, ad::Var theta, double temperature,
                         const Tensor& noise) {
  const Tensor& tv = g.value(theta);
  if (tv.rank() != 2 || tv.rows() != tv.cols())
    throw ShapeError("sample_adjacency: theta must be square, got " + shape_str(tv.shape));
  if (!(temperature > 0.0)) throw Error("sample_adjacency: temperature must be positive");
  const int64_t n = tv.rows();
  if (!noise.same_shape(tv))
    throw ShapeError("sample_adjacency: noise shape " + shape_str(noise.shape) +
                     " does not match theta " + shape_str(tv.shape));
  for (int64_t i = 0; i < n; ++i)
    if (tv.at(i, i) != 0.0)
      throw Error("sample_adjacency: theta diagonal must be zero");

  // Diagonal gets a neutral 0.5 before the logit so log stays finite there;
  // it is masked back to zero at the end.
  ad::Var shifted = g.add(theta, g.input(half_eye(n)));
  ad::Var p = g.clamp(shifted, 1e-10, 1.0 - 1e-10);
  ad::Var logit = g.sub(g.log(p), g.log(g.one_minus(p)));
  ad::Var y = g.mul_scalar(g.add(logit, g.input(noise)), 1.0 / temperature);
  return g.mul(g.sigmoid(y), g.input(ones_off_diagonal(n)));
}

SampledGraph sample_graph(const Tensor& theta, double temperature, Rng& rng) {
  if (theta.rank() != 2 || theta.rows() != theta.cols())
    throw ShapeError("sample_graph: theta must be square, got " + shape_str(theta.shape));
  Tensor noise = sample_logistic_noise(theta.rows(), rng);
  ad::Graph g;
  ad::Var th = g.input(theta);
  ad::Var a = sample_adjacency(g, th, temperature, noise);
  return SampledGraph{g.value(a), temperature};
}

PriorGraph build_knn_prior(const data::TimeSeriesTensor& train, int64_t k, Similarity sim) {
  const int64_t F = train.feature_count(), S = train.step_count(), n = train.series_count();
  if (k < 1 || k >= n)
    throw Error("knn prior: k must be in [1, " + std::to_string(n - 1) + "], got " +
                std::to_string(k));
  const int64_t len = F * S;
  std::vector<std::vector<double>> vecs(static_cast<size_t>(n),
                                        std::vector<double>(static_cast<size_t>(len)));
  for (int64_t i = 0; i < n; ++i)
    for (int64_t f = 0; f < F; ++f)
      for (int64_t t = 0; t < S; ++t)
        vecs[static_cast<size_t>(i)][static_cast<size_t>(f * S + t)] =
            train.values.at(f, t, i);

  auto similarity = [&](int64_t i, int64_t j) {
    const auto& a = vecs[static_cast<size_t>(i)];
    const auto& b = vecs[static_cast<size_t>(j)];
    double ma = 0.0, mb = 0.0;
    if (sim == Similarity::kAbsPearson) {
      for (int64_t t = 0; t < len; ++t) {
        ma += a[static_cast<size_t>(t)];
        mb += b[static_cast<size_t>(t)];
      }
      ma /= static_cast<double>(len);
      mb /= static_cast<double>(len);
    }
    double dot = 0.0, na = 0.0, nb = 0.0;
    for (int64_t t = 0; t < len; ++t) {
      double da = a[static_cast<size_t>(t)] - ma;
      double db = b[static_cast<size_t>(t)] - mb;
      dot += da * db;
      na += da * da;
      nb += db * db;
    }
    if (na == 0.0 || nb == 0.0) return 0.0;
    return std::fabs(dot / std::sqrt(na * nb));
  };

  PriorGraph out;
  out.adjacency = Tensor{Shape{n, n}};
  out.provenance = sim == Similarity::kAbsPearson ? "knn.abs_pearson" : "knn.abs_cosine";
  for (int64_t i = 0; i < n; ++i) {
    std::vector<std::pair<double, int64_t>> scored;
    for (int64_t j = 0; j < n; ++j)
      if (j != i) scored.emplace_back(similarity(i, j), j);
    // descending similarity, ties broken by lower index
    std::sort(scored.begin(), scored.end(), [](const auto& x, const auto& y) {
      if (x.first != y.first) return x.first > y.first;
      return x.second < y.second;
    });
    for (int64_t r = 0; r < k; ++r) out.adjacency.at(i, scored[static_cast<size_t>(r)].second) = 1.0;
  }
  return out;
}

ad::Var regularization_loss(ad::Graph& g, ad::Var theta, const Tensor& prior) {
  const Tensor& tv = g.value(theta);
  if (!prior.same_shape(tv))
    throw ShapeError("regularization_loss: prior " + shape_str(prior.shape) +
                     " vs theta " + shape_str(tv.shape));
  const int64_t n = tv.rows();
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < n; ++j) {
      double a = prior.at(i, j);
      if (a != 0.0 && a != 1.0)
        throw Error("regularization_loss: prior entries must be 0 or 1");
    }
  ad::Var p = g.clamp(g.add(theta, g.input(half_eye(n))), 1e-10, 1.0 - 1e-10);
  ad::Var aconst = g.input(prior, "prior.graph");
  ad::Var per_entry = g.mul_scalar(
      g.add(g.mul(aconst, g.log(p)),
            g.mul(g.one_minus(aconst), g.log(g.one_minus(p)))),
      -1.0);
  return g.sum_all(g.mul(per_entry, g.input(ones_off_diagonal(n))));
}

double regularization_loss_value(const Tensor& theta, const Tensor& prior) {
  ad::Graph g;
  ad::Var th = g.input(theta);
  return g.value(regularization_loss(g, th, prior)).at(0);
}

double AnnealSchedule::at(int64_t step) const {
  double s = s0 * std::exp(-rate * static_cast<double>(step));
  return s < s_min ? s_min : s;
}

AnnealSchedule AnnealSchedule::for_total_steps(int64_t total_steps, double s0, double s_min) {
  if (total_steps < 1) throw Error("anneal schedule: total_steps must be >= 1");
  if (!(s0 >= s_min) || s_min <= 0.0)
    throw Error("anneal schedule: need s0 >= s_min > 0");
  AnnealSchedule sch;
  sch.s0 = s0;
  sch.s_min = s_min;
  double half = 0.5 * static_cast<double>(total_steps);
  sch.rate = half > 0.0 ? std::log(s0 / s_min) / half : 0.0;
  return sch;
}

}  // namespace gts::structure
