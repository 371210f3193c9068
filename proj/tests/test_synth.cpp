#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <filesystem>
#include <vector>

#include "doctest.h"
#include "gts/dataset.hpp"
#include "gts/synth.hpp"
#include "gts/timeparse.hpp"

using namespace gts;
using namespace gts::synth;
namespace fs = std::filesystem;

namespace {

fs::path temp_dir(const char* name) {
  fs::path dir = fs::temp_directory_path() / "gts_synth_tests" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

// Largest |eigenvalue| via dense power iteration on M^T M would give a
// singular value; instead iterate M itself with renormalization.
double ref_spectral_radius(const Tensor& m) {
  const int64_t n = m.rows();
  std::vector<double> v(static_cast<size_t>(n), 1.0);
  double lambda = 0.0;
  for (int iter = 0; iter < 2000; ++iter) {
    std::vector<double> w(static_cast<size_t>(n), 0.0);
    for (int64_t i = 0; i < n; ++i)
      for (int64_t j = 0; j < n; ++j)
        w[static_cast<size_t>(i)] += m.at(i, j) * v[static_cast<size_t>(j)];
    double norm = 0.0;
    for (double x : w) norm += x * x;
    norm = std::sqrt(norm);
    if (norm == 0.0) return 0.0;
    lambda = norm;
    for (size_t i = 0; i < w.size(); ++i) v[i] = w[i] / norm;
  }
  return lambda;
}

}  // namespace

TEST_CASE("generate: deterministic for a seed, sensitive to it") {
  SynthConfig cfg;
  cfg.nodes = 5;
  cfg.steps = 120;
  cfg.seed = 31;
  SynthResult a = generate(cfg);
  SynthResult b = generate(cfg);
  CHECK(a.series.fingerprint() == b.series.fingerprint());
  CHECK(std::memcmp(a.graph.data.data(), b.graph.data.data(),
                    a.graph.data.size() * sizeof(double)) == 0);
  CHECK(std::memcmp(a.transition.data.data(), b.transition.data.data(),
                    a.transition.data.size() * sizeof(double)) == 0);

  cfg.seed = 32;
  SynthResult c = generate(cfg);
  CHECK(a.series.fingerprint() != c.series.fingerprint());
}

TEST_CASE("generate: panel dimensions, grid, and full observation") {
  SynthConfig cfg;
  cfg.nodes = 6;
  cfg.steps = 200;
  cfg.seed = 3;
  SynthResult r = generate(cfg);
  CHECK(r.series.feature_count() == 1);
  CHECK(r.series.step_count() == 200);
  CHECK(r.series.series_count() == 6);
  CHECK(r.series.frequency_seconds == cfg.frequency_seconds);
  CHECK(r.series.observed_count() == 200 * 6);
  CHECK(r.series.values.all_finite());
  CHECK(r.series.first_timestamp == data::parse_iso8601(cfg.start_timestamp));

  // mean per-series standard deviation lands on the requested scale
  double std_sum = 0.0;
  for (int64_t i = 0; i < 6; ++i) {
    double s = 0.0, sq = 0.0;
    for (int64_t t = 0; t < 200; ++t) {
      double v = r.series.values.at(0, t, i);
      s += v;
      sq += v * v;
    }
    double mean = s / 200.0;
    std_sum += std::sqrt(sq / 200.0 - mean * mean);
  }
  CHECK(std_sum / 6.0 == doctest::Approx(cfg.target_std).epsilon(0.12));
}

TEST_CASE("generate: transition respects the graph and the spectral radius") {
  SynthConfig cfg;
  cfg.nodes = 8;
  cfg.steps = 60;
  cfg.seed = 12;
  SynthResult r = generate(cfg);

  REQUIRE(r.graph.shape == Shape{8, 8});
  int64_t edges = 0;
  for (int64_t i = 0; i < 8; ++i) {
    CHECK(r.graph.at(i, i) == 0.0);
    CHECK(r.transition.at(i, i) != 0.0);  // self-dynamics always present
    for (int64_t j = 0; j < 8; ++j) {
      double g = r.graph.at(i, j);
      CHECK((g == 0.0 || g == 1.0));
      if (i == j) continue;
      edges += g != 0.0 ? 1 : 0;
      if (g == 0.0)
        CHECK(r.transition.at(i, j) == 0.0);
      else
        CHECK(r.transition.at(i, j) != 0.0);
    }
  }
  // density 0.25 over 56 candidate pairs: allow a generous binomial range
  CHECK(edges >= 3);
  CHECK(edges <= 28);

  CHECK(ref_spectral_radius(r.transition) ==
        doctest::Approx(cfg.spectral_radius).epsilon(1e-3));
  CHECK(spectral_radius_estimate(r.transition) ==
        doctest::Approx(cfg.spectral_radius).epsilon(1e-3));
}

TEST_CASE("graph csv round-trip") {
  fs::path dir = temp_dir("graph");
  Tensor g = Tensor::from(Shape{3, 3}, {0, 1, 0, 0, 0, 1, 1, 1, 0});
  std::string path = (dir / "g.csv").string();
  write_graph_csv(g, path);
  Tensor back = load_graph_csv(path, 3);
  CHECK(std::memcmp(g.data.data(), back.data.data(), g.data.size() * sizeof(double)) == 0);
  CHECK_THROWS_AS(load_graph_csv(path, 4), Error);
  CHECK_THROWS_AS(load_graph_csv((dir / "missing.csv").string(), 3), Error);
}

TEST_CASE("write: dataset directory load round-trip with the truth graph") {
  fs::path dir = temp_dir("dataset");
  SynthConfig cfg;
  cfg.nodes = 4;
  cfg.steps = 50;
  cfg.seed = 21;
  SynthResult r = generate(cfg);
  write(r, dir.string());

  CHECK(fs::exists(dir / "meta.json"));
  CHECK(fs::exists(dir / "truth_graph.csv"));
  data::TimeSeriesTensor back = data::load_dataset(dir.string());
  CHECK(back.fingerprint() == r.series.fingerprint());
  Tensor graph = load_graph_csv((dir / "truth_graph.csv").string(), 4);
  CHECK(std::memcmp(graph.data.data(), r.graph.data.data(),
                    graph.data.size() * sizeof(double)) == 0);
}
