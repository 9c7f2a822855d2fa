#pragma once

#include "scfl/types.hpp"

#include <random>

namespace scfl {

// Mixes tags into a master seed to derive independent child stream seeds.
// splitmix64 finalizer; identical inputs give identical seeds on every platform.
Seed derive_seed(Seed master, Seed tag0, Seed tag1 = 0, Seed tag2 = 0);

// Deterministic random stream. All distributions are implemented on top of
// the (standardized) mt19937_64 output so sequences are reproducible across
// standard libraries, unlike std::*_distribution.
class Rng {
 public:
  explicit Rng(Seed seed) : gen_(seed) {}

  // Uniform in [0, 1), 53-bit resolution.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal, Marsaglia polar method (cached second variate).
  double normal();

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Exponential with the given mean, inverse-CDF sampling.
  double exponential(double mean);

  bool bernoulli(double p) { return uniform() < p; }

  // Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n);

  Seed next_seed() { return gen_(); }

 private:
  std::mt19937_64 gen_;
  double cached_ = 0.0;
  bool has_cached_ = false;
};

// Matrix filled with iid N(0, stddev^2) entries, row-major fill order.
Matrix normal_matrix(Rng& rng, Index rows, Index cols, double stddev = 1.0);

// Matrix filled with iid U[lo, hi) entries, row-major fill order.
Matrix uniform_matrix(Rng& rng, Index rows, Index cols, double lo, double hi);

// Fisher-Yates permutation of [0, n).
std::vector<Index> random_permutation(Rng& rng, Index n);

}  // namespace scfl
