#include <doctest.h>

#include <cmath>
#include <vector>

#include "fedpredi/rng.hpp"

using fedpredi::Rng;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42), c(43);
  bool differs = false;
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next_u64();
    CHECK(x == b.next_u64());
    differs |= x != c.next_u64();
  }
  CHECK(differs);
}

TEST_CASE("uniform_index stays in range and hits every bucket") {
  Rng r(7);
  std::vector<int> hits(5, 0);
  for (int i = 0; i < 5000; ++i) {
    const auto v = r.uniform_index(5);
    REQUIRE(v < 5);
    ++hits[v];
  }
  for (int h : hits) CHECK(h > 800);
}

TEST_CASE("normal and gamma have the expected first moments") {
  Rng r(11);
  const int n = 200000;
  double s = 0.0, ss = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = r.normal();
    s += x;
    ss += x * x;
  }
  CHECK(std::abs(s / n) < 0.01);
  CHECK(std::abs(ss / n - 1.0) < 0.02);

  for (double shape : {0.1, 0.5, 1.0, 3.0}) {
    double g = 0.0;
    for (int i = 0; i < n; ++i) g += r.gamma(shape);
    CHECK(std::abs(g / n - shape) < 0.03 * std::max(1.0, shape));
  }
}

TEST_CASE("mix_seed is order sensitive") {
  CHECK(fedpredi::mix_seed({1, 2}) != fedpredi::mix_seed({2, 1}));
  CHECK(fedpredi::mix_seed({1, 2}) == fedpredi::mix_seed({1, 2}));
}
