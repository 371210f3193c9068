#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <cmath>
#include <cstring>
#include <set>

#include "doctest.h"
#include "gts/rng.hpp"
#include "gts/tensor.hpp"

using namespace gts;

TEST_CASE("raw stream matches an independent generator implementation") {
  Rng r(42);
  // frozen from a separate xoshiro256** + splitmix64 implementation
  const uint64_t expected[6] = {0x15780b2e0c2ec716ull, 0x6104d9866d113a7eull,
                                0xae17533239e499a1ull, 0xecb8ad4703b360a1ull,
                                0xfde6dc7fe2ec5e64ull, 0xc50da53101795238ull};
  for (uint64_t e : expected) CHECK(r.next_u64() == e);

  Rng u(42);
  const double uniforms[4] = {0.08386297105988216, 0.3789802506626686,
                              0.6800434110281394, 0.9246929453253876};
  for (double e : uniforms) CHECK(u.uniform() == doctest::Approx(e).epsilon(1e-15));
}

TEST_CASE("fnv1a64 matches published test vectors") {
  CHECK(fnv1a64(std::string{}) == 0xcbf29ce484222325ull);
  CHECK(fnv1a64(std::string{"a"}) == 0xaf63dc4c8601ec8cull);
  CHECK(fnv1a64(std::string{"foobar"}) == 0x85944171f73967e8ull);
}

TEST_CASE("same seed gives the same sequence, different seeds differ") {
  Rng a(7), b(7), c(8);
  bool all_equal = true, any_diff = false;
  for (int i = 0; i < 100; ++i) {
    uint64_t va = a.next_u64();
    all_equal = all_equal && va == b.next_u64();
    any_diff = any_diff || va != c.next_u64();
  }
  CHECK(all_equal);
  CHECK(any_diff);
}

TEST_CASE("uniform stays in [0, 1) and covers both halves") {
  Rng r(3);
  int low = 0;
  for (int i = 0; i < 10000; ++i) {
    double v = r.uniform();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    low += v < 0.5;
  }
  CHECK(low > 4500);
  CHECK(low < 5500);
}

TEST_CASE("uniform(lo, hi) respects its bounds") {
  Rng r(4);
  for (int i = 0; i < 1000; ++i) {
    double v = r.uniform(-2.5, 3.5);
    REQUIRE(v >= -2.5);
    REQUIRE(v < 3.5);
  }
}

TEST_CASE("uniform_int covers all residues without bias") {
  Rng r(5);
  int counts[7] = {0};
  for (int i = 0; i < 70000; ++i) {
    int64_t v = r.uniform_int(7);
    REQUIRE(v >= 0);
    REQUIRE(v < 7);
    counts[v]++;
  }
  for (int c : counts) {
    CHECK(c > 9300);  // 10000 expected, ~5.3 sigma slack
    CHECK(c < 10700);
  }
  CHECK_THROWS_AS((void)r.uniform_int(0), Error);
  CHECK_THROWS_AS((void)r.uniform_int(-3), Error);
}

TEST_CASE("normal has standard moments") {
  Rng r(6);
  const int n = 100000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = r.normal();
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean) < 0.02);
  CHECK(std::fabs(var - 1.0) < 0.03);
}

TEST_CASE("gumbel matches Euler-Mascheroni mean and pi^2/6 variance") {
  Rng r(7);
  const int n = 200000;
  double sum = 0.0, sum2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = r.gumbel();
    REQUIRE(std::isfinite(v));
    sum += v;
    sum2 += v * v;
  }
  double mean = sum / n;
  double var = sum2 / n - mean * mean;
  CHECK(std::fabs(mean - 0.5772156649) < 0.02);
  CHECK(std::fabs(var - 1.6449340668) < 0.05);
}

TEST_CASE("split streams are independent of the parent and each other") {
  Rng root(42);
  Rng a = root.split("gumbel");
  // frozen from the independent implementation: seed 42 ^ fnv1a64("gumbel")
  CHECK(a.next_u64() == 0x505b0beb6fd4bd59ull);
  Rng c = root.split("val", 2);
  CHECK(c.next_u64() == 0x7ce59727a244445full);

  // splitting does not advance the parent
  Rng fresh(42);
  CHECK(root.next_u64() == fresh.next_u64());

  // distinct labels and indices give distinct streams
  std::set<uint64_t> firsts;
  firsts.insert(Rng(11).split("order").next_u64());
  firsts.insert(Rng(11).split("gumbel").next_u64());
  firsts.insert(Rng(11).split("val", 0).next_u64());
  firsts.insert(Rng(11).split("val", 1).next_u64());
  firsts.insert(Rng(11).split("val", 2).next_u64());
  CHECK(firsts.size() == 5);
}

TEST_CASE("state string round-trips mid-stream") {
  Rng r(99);
  for (int i = 0; i < 17; ++i) r.next_u64();
  std::string s = r.state_string();
  Rng back = Rng::from_state_string(s);
  for (int i = 0; i < 50; ++i) CHECK(back.next_u64() == r.next_u64());
  CHECK(back.state_string() == r.state_string());
  CHECK_THROWS_AS(Rng::from_state_string("not-a-state"), Error);
}
