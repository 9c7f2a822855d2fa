#pragma once

#include "scfl/incentive.hpp"
#include "scfl/rng.hpp"

#include <vector>

namespace scfl::testing {

// Brute-force oracle for the reduced contract problem: enumerate monotone
// non-increasing budget tuples on a shared grid (respecting per-device caps)
// and return the best sum of Phi_i. Independent of the production solver.
inline double monotone_grid_best(const std::vector<DeviceEcon>& econ, double lambda,
                                 const Gamma& gamma, int points) {
  const std::size_t n = econ.size();
  std::vector<double> caps(n);
  double max_cap = 0;
  for (std::size_t i = 0; i < n; ++i) {
    caps[i] = budget_cap(econ[i]);
    max_cap = std::max(max_cap, caps[i]);
  }
  std::vector<double> grid(static_cast<std::size_t>(points));
  for (int t = 0; t < points; ++t)
    grid[static_cast<std::size_t>(t)] = max_cap * (t + 1) / static_cast<double>(points);

  double best = -std::numeric_limits<double>::infinity();
  std::vector<double> eps(n);
  // recursive descent over non-increasing tuples
  auto recurse = [&](auto&& self, std::size_t level, int hi_index, double acc) -> void {
    if (level == n) {
      best = std::max(best, acc);
      return;
    }
    for (int t = hi_index; t >= 0; --t) {
      const double e = grid[static_cast<std::size_t>(t)];
      if (e > caps[level]) continue;
      self(self, level + 1, t, acc + phi(e, static_cast<Index>(level), lambda, econ, gamma));
    }
  };
  recurse(recurse, 0, points - 1, 0.0);
  return best;
}

// Random solvable econ instance with ascending mu.
inline std::vector<DeviceEcon> random_econ(Rng& rng, Index n) {
  std::vector<DeviceEcon> econ;
  double mu = rng.uniform(0.5, 1.5);
  const Index c = 50 + static_cast<Index>(rng.below(200));
  for (Index i = 0; i < n; ++i) {
    DeviceEcon dev;
    dev.mu = mu;
    dev.h2 = rng.uniform(0.2, 6.0);
    dev.coded_count = c;
    econ.push_back(dev);
    mu += rng.uniform(0.0, 0.8);
  }
  return econ;
}

}  // namespace scfl::testing
