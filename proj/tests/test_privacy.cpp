#include "scfl/privacy.hpp"

#include "scfl/rng.hpp"

#include <doctest.h>

#include <cmath>

using namespace scfl;

namespace {

// Brute-force h^2: explicit double loop over columns and entries.
double h2_oracle(const Matrix& x) {
  double best = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < x.cols(); ++j) {
    double sum = 0, max_sq = 0;
    for (Index i = 0; i < x.rows(); ++i) {
      const double sq = x(i, j) * x(i, j);
      sum += sq;
      if (sq > max_sq) max_sq = sq;
    }
    if (sum - max_sq < best) best = sum - max_sq;
  }
  return best;
}

}  // namespace

TEST_CASE("a single-row device has h = 0") {
  Matrix x(1, 3);
  x << 0.5, -0.2, 1.0;
  const auto [h, h2] = h_value(x);
  CHECK(h == 0.0);
  CHECK(h2 == 0.0);
}

TEST_CASE("two equal unit entries give h^2 = 1") {
  Matrix x(2, 1);
  x << 1.0, 1.0;
  const auto [h, h2] = h_value(x);
  CHECK(h2 == doctest::Approx(1.0));
  CHECK(h == doctest::Approx(1.0));
}

TEST_CASE("h matches the exhaustive scan on random matrices") {
  Rng rng(7);
  for (int t = 0; t < 50; ++t) {
    Matrix x = uniform_matrix(rng, 8, 3, -1.0, 1.0);
    const auto [h, h2] = h_value(x);
    CHECK(h2 == doctest::Approx(h2_oracle(x)).epsilon(1e-12));
  }
}

TEST_CASE("unit substitution gives half a bit") {
  const PrivacyBudget b = epsilon(0.0, 1, 1.0);
  CHECK_FALSE(b.unbounded);
  CHECK(b.bits == doctest::Approx(0.5));
}

TEST_CASE("epsilon falls monotonically as noise grows") {
  double prev = epsilon(0.3, 100, 0.0).bits;
  for (double s2 : {1e2, 1e4, 1e6}) {
    const double cur = epsilon(0.3, 100, s2).bits;
    CHECK(cur < prev);
    prev = cur;
  }
  CHECK(prev < 1e-3);
}

TEST_CASE("epsilon is strictly decreasing in sigma2 and h2, increasing in c") {
  const double base = epsilon(0.5, 64, 0.25).bits;
  CHECK(epsilon(0.5, 64, 0.26).bits < base);
  CHECK(epsilon(0.51, 64, 0.25).bits < base);
  CHECK(epsilon(0.5, 65, 0.25).bits > base);
}

TEST_CASE("zero h2 and zero noise is reported as unbounded, not infinity by surprise") {
  const PrivacyBudget b = epsilon(0.0, 10, 0.0);
  CHECK(b.unbounded);
}

TEST_CASE("inverse of the unit case") {
  CHECK(epsilon_inverse(0.5, 0.0, 1) == doctest::Approx(1.0));
}

TEST_CASE("boundary budget maps to zero noise") {
  const double cap = epsilon(0.7, 50, 0.0).bits;
  CHECK(epsilon_inverse(cap, 0.7, 50) == doctest::Approx(0.0).epsilon(1e-9));
}

TEST_CASE("epsilon and its inverse round-trip") {
  Rng rng(3);
  for (int t = 0; t < 100; ++t) {
    const double h2 = rng.uniform(0.0, 4.0);
    const Index c = 1 + static_cast<Index>(rng.below(500));
    const double sigma2 = rng.uniform(0.0, 10.0);
    if (h2 + sigma2 <= 0) continue;
    const double eps = epsilon(h2, c, sigma2).bits;
    const double back = epsilon_inverse(eps, h2, c);
    CHECK(back == doctest::Approx(sigma2).epsilon(1e-10));
    CHECK(epsilon(h2, c, back).bits == doctest::Approx(eps).epsilon(1e-10));
  }
}

TEST_CASE("inverse rejects budgets beyond the noiseless cap") {
  const double cap = epsilon(1.0, 10, 0.0).bits;
  CHECK_THROWS_AS(epsilon_inverse(cap + 0.1, 1.0, 10), std::invalid_argument);
  CHECK_THROWS_AS(epsilon_inverse(0.0, 1.0, 10), std::invalid_argument);
}

TEST_CASE("noiseless sharing leaks at least as much as any noisy level") {
  // the coded-projection-only schemes are the sigma = 0 special case
  for (double s2 : {0.1, 1.0, 25.0}) {
    CHECK(epsilon(0.4, 80, 0.0).bits >= epsilon(0.4, 80, s2).bits);
  }
}

TEST_CASE("system budget is the worst device") {
  auto mk = [](double h2, Index c, double s2) {
    PrivacyProfile p;
    p.h2 = h2;
    p.coded_count = c;
    p.sigma2 = s2;
    p.epsilon = epsilon(h2, c, s2);
    return p;
  };
  SUBCASE("identical devices") {
    const std::vector<PrivacyProfile> ps = {mk(0.5, 32, 0.2), mk(0.5, 32, 0.2)};
    CHECK(system_budget(ps).bits == ps[0].epsilon.bits);
  }
  SUBCASE("the noise-free device dominates") {
    const std::vector<PrivacyProfile> ps = {mk(0.5, 32, 0.0), mk(0.5, 32, 5.0)};
    CHECK(system_budget(ps).bits == ps[0].epsilon.bits);
  }
  SUBCASE("mixed fleet equals the max scan") {
    Rng rng(11);
    std::vector<PrivacyProfile> ps;
    double best = -1;
    for (int i = 0; i < 8; ++i) {
      ps.push_back(mk(rng.uniform(0.1, 2.0), 64, rng.uniform(0.0, 3.0)));
      best = std::max(best, ps.back().epsilon.bits);
    }
    CHECK(system_budget(ps).bits == best);
  }
}
