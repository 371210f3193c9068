#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <vector>

#include "doctest.h"
#include "gts/evaluator.hpp"
#include "gts/synth.hpp"

using namespace gts;
using namespace gts::eval;

namespace {

data::TimeSeriesTensor eval_panel() {
  synth::SynthConfig sc;
  sc.nodes = 3;
  sc.steps = 30;
  sc.density = 0.5;
  sc.noise = 0.05;
  sc.seed = 19;
  data::TimeSeriesTensor panel = synth::generate(sc).series;
  // a few unobserved cells to exercise masking
  panel.set_observed(7, 1, false);
  panel.set_observed(20, 0, false);
  panel.set_observed(20, 2, false);
  for (int64_t f = 0; f < panel.feature_count(); ++f) {
    panel.values.at(f, 7, 1) = 0.0;
    panel.values.at(f, 20, 0) = 0.0;
    panel.values.at(f, 20, 2) = 0.0;
  }
  return panel;
}

struct Fixture {
  model::ModelSpec spec;
  ad::ParameterStore params;
  data::TimeSeriesTensor raw, std_panel;
  data::Standardizer scaler;
  Tensor adjacency;

  Fixture() {
    spec.learned = false;
    spec.nodes = 3;
    spec.features = 1;
    spec.target_features = {0};
    spec.forecaster.hidden = 4;
    spec.forecaster.diffusion_steps = 1;
    spec.forecaster.layers = 1;
    spec.forecaster.input_dim = 1;
    spec.forecaster.target_dim = 1;
    params = model::init_params(spec, 9);
    raw = eval_panel();
    spec.train_steps = raw.step_count();
    scaler = data::Standardizer::fit(raw);
    std_panel = scaler.transform(raw);
    adjacency = Tensor::from(Shape{3, 3}, {0, 1, 0, 0, 0, 1, 1, 0, 0});
  }

  EvalSetup setup(int64_t batch = 8) const {
    EvalSetup s;
    s.spec = &spec;
    s.params = &params;
    s.scaler = &scaler;
    s.seg_std = &std_panel;
    s.seg_raw = &raw;
    s.window = {3, 2};
    s.batch_size = batch;
    return s;
  }
};

}  // namespace

TEST_CASE("compute_metrics: frozen scalar oracle") {
  std::vector<double> pred = {1.0, 2.0, 5.0, -1.0, 3.0};
  std::vector<double> truth = {1.5, 0.0, 2.0, -3.0, 99.0};
  std::vector<uint8_t> mask = {1, 1, 1, 1, 0};
  MetricSlice s = compute_metrics(pred, truth, mask);
  CHECK(s.count == 4);
  CHECK(s.mape_count == 3);
  CHECK(s.mae == (0.5 + 2.0 + 3.0 + 2.0) / 4.0);
  CHECK(s.rmse == std::sqrt((0.25 + 4.0 + 9.0 + 4.0) / 4.0));
  double ape = 0.5 / 1.5;
  ape += 3.0 / 2.0;
  ape += 2.0 / 3.0;
  CHECK(s.mape == ape / 3.0);

  SUBCASE("zero truth everywhere: MAPE undefined") {
    MetricSlice z = compute_metrics({1.0, 2.0}, {0.0, 0.0}, {1, 1});
    CHECK(z.count == 2);
    CHECK(z.mape_count == 0);
    CHECK(std::isnan(z.mape));
    CHECK(z.mae == 1.5);
  }
  SUBCASE("nothing observed") {
    CHECK_THROWS_AS(compute_metrics({1.0}, {2.0}, {0}), Error);
  }
  SUBCASE("length mismatch") {
    CHECK_THROWS_AS(compute_metrics({1.0}, {2.0, 3.0}, {1, 1}), Error);
  }
  SUBCASE("MAE never exceeds RMSE") {
    Rng rng(4);
    std::vector<double> p(50), t(50);
    std::vector<uint8_t> m(50, 1);
    for (size_t i = 0; i < 50; ++i) {
      p[i] = rng.normal();
      t[i] = rng.normal();
    }
    MetricSlice r = compute_metrics(p, t, m);
    CHECK(r.mae <= r.rmse + 1e-15);
  }
}

TEST_CASE("metric report json: horizon keys and null MAPE") {
  MetricReport rep;
  rep.horizons = {1, 2};
  MetricSlice a;
  a.mae = 0.5;
  a.rmse = 0.7;
  a.mape = 0.25;
  a.count = 10;
  a.mape_count = 8;
  MetricSlice b = a;
  b.mape = std::numeric_limits<double>::quiet_NaN();
  b.mape_count = 0;
  rep.per_horizon = {a, b};
  rep.overall = a;
  rep.samples = 3;
  rep.temperature = 0.1;

  nlohmann::json j = rep.to_json();
  CHECK(j["samples"] == 3);
  CHECK(j["temperature"] == 0.1);
  REQUIRE(j["per_horizon"].contains("h1"));
  REQUIRE(j["per_horizon"].contains("h2"));
  CHECK(j["per_horizon"]["h1"]["mape"] == 0.25);
  CHECK(j["per_horizon"]["h2"]["mape"].is_null());
  CHECK(j["per_horizon"]["h2"]["mape_count"] == 0);
  CHECK(j["overall"]["mae"] == 0.5);
  CHECK(j["overall"]["count"] == 10);
}

TEST_CASE("evaluate_with_adjacency: matches a hand-rolled scoring loop") {
  Fixture fx;
  EvalSetup setup = fx.setup();
  MetricReport rep = evaluate_with_adjacency(setup, fx.adjacency);
  REQUIRE(rep.horizons == std::vector<int64_t>{1, 2});
  REQUIRE(rep.per_horizon.size() == 2);
  CHECK(rep.samples == 1);

  // independent assembly: one giant batch, then a scalar scoring loop in the
  // same (window, node) order
  auto windows = data::make_windows(fx.std_panel.step_count(), setup.window);
  const int64_t W = static_cast<int64_t>(windows.size());
  const int64_t n = 3;
  REQUIRE(W == 26);
  model::Batch batch = model::make_batch(fx.std_panel, windows, 0,
                                         static_cast<size_t>(W), setup.window, {0});
  std::vector<Tensor> preds =
      model::predict_values(fx.params, fx.spec, fx.adjacency, batch);

  for (int64_t h = 1; h <= 2; ++h) {
    std::vector<double> p, t;
    std::vector<uint8_t> m;
    for (int64_t w = 0; w < W; ++w) {
      int64_t step = windows[static_cast<size_t>(w)].start + setup.window.input_steps +
                     h - 1;
      for (int64_t i = 0; i < n; ++i) {
        p.push_back(fx.scaler.to_original(
            preds[static_cast<size_t>(h - 1)].at(w * n + i, 0), 0, i));
        t.push_back(fx.raw.values.at(0, step, i));
        m.push_back(fx.raw.observed(step, i) ? 1 : 0);
      }
    }
    MetricSlice want = compute_metrics(p, t, m);
    const MetricSlice& got = rep.per_horizon[static_cast<size_t>(h - 1)];
    CHECK(got.mae == want.mae);
    CHECK(got.rmse == want.rmse);
    CHECK(got.mape == want.mape);
    CHECK(got.count == want.count);
    CHECK(got.mape_count == want.mape_count);
    CHECK(got.count < W * n);  // the masked cells were skipped
  }

  SUBCASE("batch size does not change anything") {
    MetricReport one = evaluate_with_adjacency(fx.setup(1), fx.adjacency);
    MetricReport big = evaluate_with_adjacency(fx.setup(64), fx.adjacency);
    for (size_t hi = 0; hi < 2; ++hi) {
      CHECK(one.per_horizon[hi].mae == rep.per_horizon[hi].mae);
      CHECK(big.per_horizon[hi].mae == rep.per_horizon[hi].mae);
      CHECK(one.per_horizon[hi].rmse == rep.per_horizon[hi].rmse);
      CHECK(big.per_horizon[hi].rmse == rep.per_horizon[hi].rmse);
    }
    CHECK(one.overall.mae == rep.overall.mae);
    CHECK(big.overall.mae == rep.overall.mae);
  }
  SUBCASE("single requested horizon pools to itself") {
    EvalSetup s1 = fx.setup();
    s1.horizons = {2};
    MetricReport r1 = evaluate_with_adjacency(s1, fx.adjacency);
    REQUIRE(r1.horizons == std::vector<int64_t>{2});
    REQUIRE(r1.per_horizon.size() == 1);
    CHECK(r1.overall.mae == r1.per_horizon[0].mae);
    CHECK(r1.per_horizon[0].mae == rep.per_horizon[1].mae);
  }
  SUBCASE("horizon outside the window") {
    EvalSetup s1 = fx.setup();
    s1.horizons = {3};
    CHECK_THROWS_AS(evaluate_with_adjacency(s1, fx.adjacency), Error);
  }
  SUBCASE("masked mae helper returns the pooled value") {
    CHECK(masked_mae_with_adjacency(setup, fx.adjacency) == rep.overall.mae);
  }
}

TEST_CASE("evaluate_sampled: one sample equals a fixed-graph run on that draw") {
  Fixture fx;
  EvalSetup setup = fx.setup();
  Tensor theta{Shape{3, 3}};
  Rng trng(55);
  for (int64_t i = 0; i < 3; ++i)
    for (int64_t j = 0; j < 3; ++j)
      if (i != j) theta.at(i, j) = 0.2 + 0.6 * trng.uniform();

  Rng a(123), b(123);
  MetricReport rep = evaluate_sampled(setup, theta, 0.3, 1, true, a);
  structure::SampledGraph sg = structure::sample_graph(theta, 0.3, b);
  MetricReport want = evaluate_with_adjacency(setup, sg.adjacency);
  CHECK(rep.samples == 1);
  CHECK(rep.temperature == 0.3);
  CHECK(rep.overall.mae == want.overall.mae);
  CHECK(rep.overall.rmse == want.overall.rmse);
  for (size_t hi = 0; hi < 2; ++hi)
    CHECK(rep.per_horizon[hi].mae == want.per_horizon[hi].mae);

  SUBCASE("prediction averaging scores the mean trajectory") {
    Rng r1(321), r2(321);
    MetricReport got = evaluate_sampled(setup, theta, 0.3, 2, true, r1);
    CHECK(got.samples == 2);

    auto windows = data::make_windows(fx.std_panel.step_count(), setup.window);
    const int64_t W = static_cast<int64_t>(windows.size()), n = 3;
    model::Batch batch = model::make_batch(fx.std_panel, windows, 0,
                                           static_cast<size_t>(W), setup.window, {0});
    std::vector<Tensor> mean;
    for (int s = 0; s < 2; ++s) {
      structure::SampledGraph g = structure::sample_graph(theta, 0.3, r2);
      std::vector<Tensor> preds =
          model::predict_values(fx.params, fx.spec, g.adjacency, batch);
      if (s == 0) {
        mean = std::move(preds);
      } else {
        for (size_t h = 0; h < preds.size(); ++h)
          for (int64_t i = 0; i < preds[h].numel(); ++i)
            mean[h].at(i) += preds[h].at(i);
      }
    }
    for (auto& t : mean)
      for (double& v : t.data) v /= 2.0;

    for (int64_t h = 1; h <= 2; ++h) {
      std::vector<double> p, t;
      std::vector<uint8_t> m;
      for (int64_t w = 0; w < W; ++w) {
        int64_t step = windows[static_cast<size_t>(w)].start +
                       setup.window.input_steps + h - 1;
        for (int64_t i = 0; i < n; ++i) {
          p.push_back(fx.scaler.to_original(
              mean[static_cast<size_t>(h - 1)].at(w * n + i, 0), 0, i));
          t.push_back(fx.raw.values.at(0, step, i));
          m.push_back(fx.raw.observed(step, i) ? 1 : 0);
        }
      }
      MetricSlice want2 = compute_metrics(p, t, m);
      CHECK(got.per_horizon[static_cast<size_t>(h - 1)].mae == want2.mae);
      CHECK(got.per_horizon[static_cast<size_t>(h - 1)].rmse == want2.rmse);
    }
  }

  SUBCASE("metric averaging averages the per-sample reports") {
    Rng r1(77), r2(77);
    MetricReport got = evaluate_sampled(setup, theta, 0.3, 2, false, r1);
    structure::SampledGraph g1 = structure::sample_graph(theta, 0.3, r2);
    MetricReport m1 = evaluate_with_adjacency(setup, g1.adjacency);
    structure::SampledGraph g2 = structure::sample_graph(theta, 0.3, r2);
    MetricReport m2 = evaluate_with_adjacency(setup, g2.adjacency);
    CHECK(got.overall.mae == (m1.overall.mae + m2.overall.mae) / 2.0);
    CHECK(got.overall.rmse == (m1.overall.rmse + m2.overall.rmse) / 2.0);
    for (size_t hi = 0; hi < 2; ++hi)
      CHECK(got.per_horizon[hi].mae ==
            (m1.per_horizon[hi].mae + m2.per_horizon[hi].mae) / 2.0);
  }

  SUBCASE("sample count must be positive") {
    Rng r(1);
    CHECK_THROWS_AS(evaluate_sampled(setup, theta, 0.3, 0, true, r), Error);
  }
}

TEST_CASE("historical average: phase means keyed by absolute timestamps") {
  data::TimeSeriesTensor panel;
  panel.features = {"f0"};
  panel.series = {"a", "b"};
  panel.frequency_seconds = 60;
  panel.first_timestamp = 120;  // phase offset of two steps
  const int64_t S = 7;
  panel.values = Tensor{Shape{1, S, 2}};
  panel.mask.assign(static_cast<size_t>(S * 2), 0);
  for (int64_t t = 0; t < S; ++t) {
    panel.values.at(0, t, 0) = static_cast<double>(t + 1);
    panel.set_observed(t, 0, true);
  }
  panel.values.at(0, 2, 1) = 30.0;  // series b observed exactly once
  panel.set_observed(2, 1, true);

  HistoricalAverage ha = HistoricalAverage::fit(panel, 3);
  CHECK(ha.period_steps() == 3);

  // phase of step t is (2 + t) mod 3; series a means: phase2 {1,4,7} -> 4,
  // phase0 {2,5} -> 3.5, phase1 {3,6} -> 4.5
  CHECK(ha.predict(0, 0, 120 + 60 * 9) == 4.0);    // phase 2
  CHECK(ha.predict(0, 0, 120 + 60 * 10) == 3.5);   // phase 0
  CHECK(ha.predict(0, 0, 120 + 60 * 11) == 4.5);   // phase 1
  CHECK(ha.predict(0, 1, 120 + 60 * 2) == 30.0);   // seen phase
  CHECK(ha.predict(0, 1, 120 + 60 * 3) == 30.0);   // unseen phase: fallback mean
  CHECK(ha.predict(0, 1, 120 + 60 * 4) == 30.0);

  CHECK_THROWS_AS(HistoricalAverage::fit(panel, 0), Error);

  SUBCASE("baseline evaluation scores the phase means") {
    data::TimeSeriesTensor test;
    test.features = {"f0"};
    test.series = {"a", "b"};
    test.frequency_seconds = 60;
    test.first_timestamp = 120 + 60 * S;  // continues the grid
    const int64_t St = 5;
    test.values = Tensor{Shape{1, St, 2}};
    test.mask.assign(static_cast<size_t>(St * 2), 1);
    Rng rng(3);
    for (int64_t t = 0; t < St; ++t)
      for (int64_t i = 0; i < 2; ++i) test.values.at(0, t, i) = 1.0 + rng.uniform();

    data::WindowSpec win{2, 2};
    MetricReport rep = evaluate_historical_average(panel, test, win, 3, {0});
    REQUIRE(rep.horizons == std::vector<int64_t>{1, 2});

    auto windows = data::make_windows(St, win);
    for (int64_t h = 1; h <= 2; ++h) {
      std::vector<double> p, t;
      std::vector<uint8_t> m;
      for (const auto& w : windows) {
        int64_t step = w.start + win.input_steps + h - 1;
        for (int64_t i = 0; i < 2; ++i) {
          p.push_back(ha.predict(0, i, test.timestamp_at(step)));
          t.push_back(test.values.at(0, step, i));
          m.push_back(1);
        }
      }
      MetricSlice want = compute_metrics(p, t, m);
      CHECK(rep.per_horizon[static_cast<size_t>(h - 1)].mae == want.mae);
      CHECK(rep.per_horizon[static_cast<size_t>(h - 1)].rmse == want.rmse);
      CHECK(rep.per_horizon[static_cast<size_t>(h - 1)].count == want.count);
    }
  }
}
