#include <doctest.h>

#include <cmath>
#include <set>

#include "rkhs/rng.hpp"

using rkhs::CounterRng;

TEST_CASE("streams are reproducible and distinct") {
  CounterRng a(7, 3), b(7, 3), c(7, 4), d(8, 3);
  for (int i = 0; i < 100; ++i) {
    const auto x = a();
    CHECK(x == b());
    CHECK(x != c());
    CHECK(x != d());
  }
}

TEST_CASE("uniform lies in [0, 1) and has the right mean") {
  CounterRng g(1, 0);
  double s = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double u = g.uniform();
    REQUIRE(u >= 0.0);
    REQUIRE(u < 1.0);
    s += u;
  }
  // mean 1/2, SE = 1/sqrt(12 n)
  CHECK(std::abs(s / n - 0.5) < 4.0 / std::sqrt(12.0 * n));
}

TEST_CASE("below is unbiased over a small range") {
  CounterRng g(2, 0);
  int counts[5] = {};
  const int n = 100000;
  for (int i = 0; i < n; ++i) ++counts[g.below(5)];
  for (int c : counts) CHECK(std::abs(c - n / 5) < 4.0 * std::sqrt(n * 0.2 * 0.8));
}

TEST_CASE("normal moments") {
  CounterRng g(3, 0);
  double s = 0.0, s2 = 0.0;
  const int n = 200000;
  for (int i = 0; i < n; ++i) {
    const double z = g.normal();
    s += z;
    s2 += z * z;
  }
  CHECK(std::abs(s / n) < 4.0 / std::sqrt(n));
  CHECK(std::abs(s2 / n - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("split gives a fresh stream") {
  CounterRng g(5, 0);
  auto h = g.split(1);
  CHECK(h.key() != g.key());
  CHECK(h.key() == g.split(1).key());
}
