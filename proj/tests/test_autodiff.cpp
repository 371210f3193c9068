#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>

#include "doctest.h"
#include "gts/autodiff.hpp"
#include "gts/grad_check.hpp"
#include "gts/param_store.hpp"
#include "gts/rng.hpp"

using namespace gts;
using ad::Graph;
using ad::Var;

namespace {

Tensor rand_tensor(Shape s, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t{std::move(s)};
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// random values with |v| >= margin, for ops with kinks at zero
Tensor rand_away_from_zero(Shape s, Rng& rng, double margin) {
  Tensor t{std::move(s)};
  for (double& v : t.data) {
    double m = rng.uniform(margin, 1.0);
    v = rng.uniform() < 0.5 ? -m : m;
  }
  return t;
}

void expect_grads_ok(const ad::Program& program, const ad::ParameterStore& params,
                     double tolerance = 1e-6) {
  ad::GradCheckReport report = ad::grad_check(program, params, 1e-5, tolerance);
  INFO(report.summary());
  CHECK(report.pass);
}

}  // namespace

TEST_CASE("elementwise binary ops differentiate") {
  Rng rng(101);
  ad::ParameterStore p;
  p.add("a", rand_tensor({3, 4}, rng));
  p.add("b", rand_tensor({3, 4}, rng));
  auto with = [&](auto fn) {
    return [fn](Graph& g, const ad::BoundParams& b) {
      return g.sum_all(fn(g, b.at("a"), b.at("b")));
    };
  };
  expect_grads_ok(with([](Graph& g, Var a, Var b) { return g.add(a, b); }), p);
  expect_grads_ok(with([](Graph& g, Var a, Var b) { return g.sub(a, b); }), p);
  expect_grads_ok(with([](Graph& g, Var a, Var b) { return g.mul(a, b); }), p);
}

TEST_CASE("division differentiates away from zero denominators") {
  Rng rng(102);
  ad::ParameterStore p;
  p.add("a", rand_tensor({2, 5}, rng));
  p.add("b", rand_away_from_zero({2, 5}, rng, 0.4));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        return g.sum_all(g.div(b.at("a"), b.at("b")));
      },
      p);
}

TEST_CASE("scalar and unary smooth ops differentiate") {
  Rng rng(103);
  ad::ParameterStore p;
  p.add("x", rand_tensor({3, 3}, rng));
  auto with = [&](auto fn) {
    return [fn](Graph& g, const ad::BoundParams& b) {
      return g.sum_all(fn(g, b.at("x")));
    };
  };
  expect_grads_ok(with([](Graph& g, Var x) { return g.add_scalar(x, 2.5); }), p);
  expect_grads_ok(with([](Graph& g, Var x) { return g.mul_scalar(x, -1.75); }), p);
  expect_grads_ok(with([](Graph& g, Var x) { return g.sigmoid(x); }), p);
  expect_grads_ok(with([](Graph& g, Var x) { return g.tanh(x); }), p);
  expect_grads_ok(with([](Graph& g, Var x) { return g.exp(x); }), p);
  expect_grads_ok(with([](Graph& g, Var x) { return g.one_minus(x); }), p);
}

TEST_CASE("log differentiates on positive inputs") {
  Rng rng(104);
  ad::ParameterStore p;
  p.add("x", rand_tensor({4, 2}, rng, 0.1, 2.0));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) { return g.sum_all(g.log(b.at("x"))); }, p);
}

TEST_CASE("kinked ops differentiate away from their kinks") {
  Rng rng(105);
  ad::ParameterStore p;
  p.add("x", rand_away_from_zero({3, 4}, rng, 0.2));
  auto with = [&](auto fn) {
    return [fn](Graph& g, const ad::BoundParams& b) {
      return g.sum_all(fn(g, b.at("x")));
    };
  };
  expect_grads_ok(with([](Graph& g, Var x) { return g.relu(x); }), p);
  expect_grads_ok(with([](Graph& g, Var x) { return g.abs(x); }), p);
  // clamp bounds at +-0.9 keep the random +-[0.2, 1.0] entries off the kink
  // only with margin; use +-1.5 so every entry is strictly interior
  expect_grads_ok(with([](Graph& g, Var x) { return g.clamp(x, -1.5, 1.5); }), p);
  // and a case where some entries are strictly clipped
  expect_grads_ok(with([](Graph& g, Var x) { return g.clamp(x, -0.1, 0.1); }), p);
}

TEST_CASE("matrix ops differentiate") {
  Rng rng(106);
  ad::ParameterStore p;
  p.add("a", rand_tensor({3, 4}, rng));
  p.add("b", rand_tensor({4, 2}, rng));
  p.add("bias", rand_tensor({2}, rng));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        Var y = g.matmul(b.at("a"), b.at("b"));
        return g.sum_all(g.add_rows(y, b.at("bias")));
      },
      p);
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        return g.sum_all(g.matmul(g.transpose(b.at("b")), g.transpose(b.at("a"))));
      },
      p);
}

TEST_CASE("shape ops differentiate, gather accumulates repeated rows") {
  Rng rng(107);
  ad::ParameterStore p;
  p.add("a", rand_tensor({4, 3}, rng));
  p.add("b", rand_tensor({4, 2}, rng));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        Var cat = g.concat_cols(b.at("a"), b.at("b"));  // [4,5]
        Var rows = g.gather_rows(cat, {2, 0, 2, 3, 1, 2});
        Var s1 = g.slice_cols(rows, 1, 4);
        Var s2 = g.slice_rows(s1, 0, 5);
        return g.mean_all(g.mul(s2, s2));
      },
      p);
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        Var cat = g.concat_rows(b.at("a"), g.mul(b.at("a"), b.at("a")));  // [8,3]
        Var r = g.reshape(cat, {4, 6});
        Var sums = g.row_sums(r);  // [4,1]
        return g.sum_all(g.mul(sums, sums));
      },
      p);
}

TEST_CASE("conv1d differentiates for both strides") {
  Rng rng(108);
  ad::ParameterStore p;
  p.add("x", rand_tensor({2, 9}, rng));
  p.add("w", rand_tensor({3, 4}, rng));
  p.add("b", rand_tensor({3}, rng));
  for (int64_t stride : {1, 2}) {
    expect_grads_ok(
        [stride](Graph& g, const ad::BoundParams& b) {
          Var y = g.conv1d(b.at("x"), b.at("w"), b.at("b"), stride);
          return g.mean_all(g.mul(y, y));
        },
        p);
  }
}

TEST_CASE("row_normalize differentiates on positive rows") {
  Rng rng(109);
  ad::ParameterStore p;
  p.add("a", rand_tensor({3, 4}, rng, 0.2, 1.5));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        Var y = g.row_normalize(b.at("a"));
        return g.sum_all(g.mul(y, y));
      },
      p);
}

TEST_CASE("block_matmul differentiates") {
  Rng rng(110);
  ad::ParameterStore p;
  p.add("p", rand_tensor({3, 3}, rng));
  p.add("y", rand_tensor({6, 2}, rng));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        Var out = g.block_matmul(b.at("p"), b.at("y"), 3);
        return g.sum_all(g.mul(out, out));
      },
      p);
}

TEST_CASE("a composite expression differentiates end to end") {
  Rng rng(111);
  ad::ParameterStore p;
  p.add("w1", rand_tensor({5, 4}, rng));
  p.add("w2", rand_tensor({4, 1}, rng));
  p.add("x", rand_tensor({3, 5}, rng));
  expect_grads_ok(
      [](Graph& g, const ad::BoundParams& b) {
        Var h = g.tanh(g.matmul(b.at("x"), b.at("w1")));
        Var y = g.sigmoid(g.matmul(h, b.at("w2")));
        Var t = g.mul_scalar(g.one_minus(y), 0.7);
        return g.mean_all(g.abs(g.add_scalar(t, -0.21)));
      },
      p, 1e-4);
}

TEST_CASE("matmul value matches hand arithmetic") {
  Graph g;
  Var a = g.input(Tensor::from({2, 3}, {1, 2, 3, 4, 5, 6}));
  Var b = g.input(Tensor::from({3, 2}, {7, 8, 9, 10, 11, 12}));
  const Tensor& y = g.value(g.matmul(a, b));
  CHECK(y.at(0, 0) == 58.0);
  CHECK(y.at(0, 1) == 64.0);
  CHECK(y.at(1, 0) == 139.0);
  CHECK(y.at(1, 1) == 154.0);
}

TEST_CASE("conv1d value matches hand arithmetic, channel-major layout") {
  Graph g;
  Var x = g.input(Tensor::from({1, 5}, {1, 2, 3, 4, 5}));
  Var w = g.input(Tensor::from({2, 3}, {1, 0, -1, 0.5, 0.5, 0.5}));
  Var b = g.input(Tensor::from({2}, {0.5, -1}));
  const Tensor& y1 = g.value(g.conv1d(x, w, b, 1));
  REQUIRE(y1.shape == Shape{1, 6});
  const double expected1[6] = {-1.5, -1.5, -1.5, 2.0, 3.5, 5.0};
  for (int i = 0; i < 6; ++i) CHECK(y1.at(i) == doctest::Approx(expected1[i]).epsilon(1e-15));

  const Tensor& y2 = g.value(g.conv1d(x, w, b, 2));
  REQUIRE(y2.shape == Shape{1, 4});
  const double expected2[4] = {-1.5, -1.5, 2.0, 5.0};
  for (int i = 0; i < 4; ++i) CHECK(y2.at(i) == doctest::Approx(expected2[i]).epsilon(1e-15));
}

TEST_CASE("row_normalize keeps zero rows at zero and normalizes the rest") {
  Graph g;
  Var a = g.input(Tensor::from({3, 2}, {2, 6, 0, 0, 1, 3}));
  const Tensor& y = g.value(g.row_normalize(a));
  CHECK(y.at(0, 0) == 0.25);
  CHECK(y.at(0, 1) == 0.75);
  CHECK(y.at(1, 0) == 0.0);
  CHECK(y.at(1, 1) == 0.0);
  CHECK(y.at(2, 0) == 0.25);
  CHECK(y.at(2, 1) == 0.75);
}

TEST_CASE("row_normalize backward leaves zero rows without gradient") {
  Graph g;
  Var a = g.param(Tensor::from({2, 2}, {1, 3, 0, 0}), "a");
  Var loss = g.sum_all(g.mul(g.row_normalize(a), g.input(Tensor::from({2, 2}, {1, 2, 3, 4}))));
  g.backward(loss);
  Tensor grad = g.grad(a);
  CHECK(grad.at(1, 0) == 0.0);
  CHECK(grad.at(1, 1) == 0.0);
  // nonzero row: out = (1/4, 3/4), da_i = (g_i - g.out) / rowsum
  CHECK(grad.at(0, 0) ==
        doctest::Approx((1.0 - (1 * 0.25 + 2 * 0.75)) / 4.0).epsilon(1e-12));
  CHECK(grad.at(0, 1) ==
        doctest::Approx((2.0 - (1 * 0.25 + 2 * 0.75)) / 4.0).epsilon(1e-12));
}

TEST_CASE("block_matmul applies the matrix to each block independently") {
  Graph g;
  Var p = g.input(Tensor::from({2, 2}, {0, 1, 1, 0}));  // row swap
  Var y = g.input(Tensor::from({4, 2}, {1, 2, 3, 4, 5, 6, 7, 8}));
  const Tensor& out = g.value(g.block_matmul(p, y, 2));
  const double expected[8] = {3, 4, 1, 2, 7, 8, 5, 6};
  for (int i = 0; i < 8; ++i) CHECK(out.at(i) == expected[i]);
}

TEST_CASE("sigmoid is stable in both tails") {
  Graph g;
  Var x = g.input(Tensor::from({1, 3}, {-800, 0, 800}));
  const Tensor& y = g.value(g.sigmoid(x));
  CHECK(y.at(0) >= 0.0);
  CHECK(y.at(0) < 1e-300);
  CHECK(y.at(1) == 0.5);
  CHECK(y.at(2) == 1.0);
}

TEST_CASE("clamp passes gradient on the closed interval") {
  Graph g;
  Var x = g.param(Tensor::from({1, 4}, {-2.0, -1.0, 0.3, 1.0}), "x");
  Var loss = g.sum_all(g.clamp(x, -1.0, 1.0));
  g.backward(loss);
  Tensor grad = g.grad(x);
  CHECK(grad.at(0) == 0.0);  // strictly outside
  CHECK(grad.at(1) == 1.0);  // exactly at the bound
  CHECK(grad.at(2) == 1.0);
  CHECK(grad.at(3) == 1.0);
}

TEST_CASE("shape mismatches throw ShapeError") {
  Graph g;
  Var a = g.input(Tensor{{2, 3}});
  Var b = g.input(Tensor{{3, 2}});
  Var v = g.input(Tensor{{4}});
  CHECK_THROWS_AS((void)g.add(a, b), ShapeError);
  CHECK_THROWS_AS((void)g.mul(a, b), ShapeError);
  CHECK_THROWS_AS((void)g.matmul(a, a), ShapeError);
  CHECK_THROWS_AS((void)g.add_rows(a, v), ShapeError);
  CHECK_THROWS_AS((void)g.concat_cols(a, b), ShapeError);
  CHECK_THROWS_AS((void)g.concat_rows(a, b), ShapeError);
  CHECK_THROWS_AS((void)g.slice_cols(a, 2, 5), ShapeError);
  CHECK_THROWS_AS((void)g.slice_rows(a, 1, 0), ShapeError);
  CHECK_THROWS_AS((void)g.gather_rows(a, {0, 2}), ShapeError);
  CHECK_THROWS_AS((void)g.reshape(a, {4, 2}), ShapeError);
  CHECK_THROWS_AS((void)g.block_matmul(a, b, 3), ShapeError);
  CHECK_THROWS_AS((void)g.conv1d(a, g.input(Tensor{{1, 9}}), g.input(Tensor{{1}}), 1),
                  ShapeError);
}

TEST_CASE("non-finite outputs throw NonFiniteError naming the op") {
  {
    Graph g;
    Var x = g.input(Tensor::from({1, 2}, {0.0, 1.0}));
    try {
      (void)g.log(x);
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(e.op_name == "log");
    }
  }
  {
    Graph g;
    Var a = g.input(Tensor::from({1, 1}, {1.0}));
    Var b = g.input(Tensor::from({1, 1}, {0.0}));
    try {
      (void)g.div(a, b);
      FAIL("expected NonFiniteError");
    } catch (const NonFiniteError& e) {
      CHECK(e.op_name == "div");
    }
  }
  {
    Graph g;
    Var x = g.input(Tensor::from({1, 1}, {1000.0}));
    CHECK_THROWS_AS((void)g.exp(x), NonFiniteError);
  }
  {
    Graph g;
    g.check_finite = false;
    Var x = g.input(Tensor::from({1, 1}, {1000.0}));
    Var y = g.exp(x);
    CHECK_FALSE(g.value(y).all_finite());
  }
}

TEST_CASE("graphs are single-use and losses must be scalar") {
  Graph g;
  Var x = g.param(Tensor::from({2, 2}, {1, 2, 3, 4}), "x");
  CHECK_THROWS_AS(g.backward(x), Error);  // not scalar
  Var loss = g.sum_all(x);
  g.backward(loss);
  CHECK_THROWS_AS(g.backward(loss), Error);  // second backward
}

TEST_CASE("gradients flow only to parameters") {
  Graph g;
  Var x = g.input(Tensor::from({2, 2}, {1, 2, 3, 4}), "x");
  Var w = g.param(Tensor::from({2, 2}, {1, 1, 1, 1}), "w");
  CHECK_FALSE(g.requires_grad(x));
  CHECK(g.requires_grad(w));
  Var prod = g.mul(x, w);
  CHECK(g.requires_grad(prod));
  g.backward(g.sum_all(prod));
  Tensor gw = g.grad(w);
  for (int i = 0; i < 4; ++i) CHECK(gw.at(i) == double(i + 1));
  Tensor gx = g.grad(x);
  for (int i = 0; i < 4; ++i) CHECK(gx.at(i) == 0.0);
}

TEST_CASE("grad_check detects a corrupted adjoint") {
  Rng rng(112);
  ad::ParameterStore p;
  p.add("w", rand_tensor({3, 3}, rng));
  ad::GradCheckReport bad = ad::grad_check(
      [](Graph& g, const ad::BoundParams& b) {
        g.debug_scale_grad("w", 2.0);
        return g.sum_all(g.mul(b.at("w"), b.at("w")));
      },
      p);
  CHECK_FALSE(bad.pass);
  CHECK(bad.worst_param == "w");
  CHECK(bad.max_rel_err > 0.1);

  ad::GradCheckReport good = ad::grad_check(
      [](Graph& g, const ad::BoundParams& b) {
        return g.sum_all(g.mul(b.at("w"), b.at("w")));
      },
      p);
  CHECK(good.pass);
}

TEST_CASE("grad_check rejects non-deterministic programs") {
  Rng rng(113);
  ad::ParameterStore p;
  p.add("w", rand_tensor({2, 2}, rng));
  int calls = 0;
  CHECK_THROWS_AS(ad::grad_check(
                      [&calls](Graph& g, const ad::BoundParams& b) {
                        double jitter = (calls++ == 0) ? 0.0 : 1e-9;
                        return g.add_scalar(g.sum_all(b.at("w")), jitter);
                      },
                      p),
                  Error);
}
