#include "scfl/rng.hpp"

#include <doctest.h>

#include <algorithm>
#include <cmath>

using namespace scfl;

TEST_CASE("identical seeds give identical streams") {
  Rng a(42), b(42);
  for (int i = 0; i < 1000; ++i) CHECK(a.uniform() == b.uniform());
}

TEST_CASE("derive_seed separates streams by tag") {
  const Seed s1 = derive_seed(7, 1);
  const Seed s2 = derive_seed(7, 2);
  const Seed s3 = derive_seed(7, 1, 1);
  CHECK(s1 != s2);
  CHECK(s1 != s3);
  CHECK(derive_seed(7, 1) == s1);
}

TEST_CASE("uniform stays in [0, 1)") {
  Rng rng(11);
  for (int i = 0; i < 10000; ++i) {
    const double u = rng.uniform();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
}

TEST_CASE("normal moments match the standard normal") {
  Rng rng(5);
  const int n = 200000;
  double mean = 0, var = 0;
  for (int i = 0; i < n; ++i) {
    const double x = rng.normal();
    mean += x;
    var += x * x;
  }
  mean /= n;
  var = var / n - mean * mean;
  // 4 standard errors: se(mean) = 1/sqrt(n), se(var) ~ sqrt(2/n)
  CHECK(std::abs(mean) < 4.0 / std::sqrt(n));
  CHECK(std::abs(var - 1.0) < 4.0 * std::sqrt(2.0 / n));
}

TEST_CASE("exponential matches its mean") {
  Rng rng(9);
  const int n = 200000;
  const double target = 2.5;
  double mean = 0;
  for (int i = 0; i < n; ++i) mean += rng.exponential(target);
  mean /= n;
  CHECK(std::abs(mean - target) < 4.0 * target / std::sqrt(n));
}

TEST_CASE("bernoulli frequency tracks p") {
  Rng rng(13);
  const int n = 100000;
  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.bernoulli(0.3);
  CHECK(std::abs(hits / static_cast<double>(n) - 0.3) < 4.0 * std::sqrt(0.3 * 0.7 / n));
  Rng always(1), never(2);
  for (int i = 0; i < 100; ++i) {
    CHECK(always.bernoulli(1.0));
    CHECK_FALSE(never.bernoulli(0.0));
  }
}

TEST_CASE("random_permutation is a permutation") {
  Rng rng(21);
  auto p = random_permutation(rng, 57);
  std::sort(p.begin(), p.end());
  for (Index i = 0; i < 57; ++i) CHECK(p[static_cast<std::size_t>(i)] == i);
}

TEST_CASE("matrix fills are deterministic") {
  Rng a(3), b(3);
  CHECK(normal_matrix(a, 4, 5) == normal_matrix(b, 4, 5));
}
