#include <doctest.h>

#include <cmath>
#include <set>

#include "spes/rng.hpp"

using namespace spes;

TEST_CASE("substreams are deterministic and decoupled") {
  Rng a(42), b(42);
  CHECK(a.substream("x").next_u64() == b.substream("x").next_u64());
  CHECK(a.substream("x").next_u64() != a.substream("y").next_u64());
  CHECK(a.substream("x", 0).next_u64() != a.substream("x", 1).next_u64());

  // drawing from one substream does not disturb a sibling
  Rng parent(7);
  Rng s1 = parent.substream("noise", 0);
  Rng s2 = parent.substream("noise", 1);
  (void)s1.next_u64();
  Rng s2_again = parent.substream("noise", 1);
  CHECK(s2.next_u64() == s2_again.next_u64());
}

TEST_CASE("uniform01 stays in [0,1)") {
  Rng rng(1);
  for (int i = 0; i < 10000; ++i) {
    double u = rng.uniform01();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments") {
  Rng rng(3);
  const int n = 200000;
  double sum = 0.0, sum_sq = 0.0;
  for (int i = 0; i < n; ++i) {
    double x = rng.normal();
    sum += x;
    sum_sq += x * x;
  }
  double mean = sum / n;
  double var = sum_sq / n - mean * mean;
  CHECK(std::abs(mean) < 0.02);
  CHECK(std::abs(var - 1.0) < 0.02);
}

TEST_CASE("sample_without_replacement gives distinct indices") {
  Rng rng(5);
  auto s = rng.sample_without_replacement(50, 20);
  std::set<int> uniq(s.begin(), s.end());
  CHECK(uniq.size() == 20);
  for (int v : s) {
    CHECK(v >= 0);
    CHECK(v < 50);
  }
}

TEST_CASE("uniform_index covers the range") {
  Rng rng(9);
  std::set<uint64_t> seen;
  for (int i = 0; i < 1000; ++i) seen.insert(rng.uniform_index(7));
  CHECK(seen.size() == 7);
}
