#pragma once

#include "scfl/types.hpp"

#include <vector>

namespace scfl {

// Privacy budgets are in bits (log base 2) throughout.
struct PrivacyBudget {
  double bits = 0;
  bool unbounded = false;  // h^2 + sigma^2 == 0, no finite budget
};

struct PrivacyProfile {
  double h2 = 0;
  Index coded_count = 0;
  double sigma2 = 0;
  PrivacyBudget epsilon;
};

// h(X^(i)): per feature column, the sum of squared entries minus the largest
// one; h is the square root of the minimum over columns. Expects features
// normalized to |x| <= 1. Returns {h, h^2}.
std::pair<double, double> h_value(MatrixView local_features);

// 1/2 log2(1 + c / (h^2 + sigma^2)).
PrivacyBudget epsilon(double h2, Index c, double sigma2);

// sigma^2 = c / (2^(2 eps) - 1) - h^2; valid for 0 < eps <= epsilon(h2, c, 0).
double epsilon_inverse(double eps_bits, double h2, Index c);

// System budget: the worst (largest) device budget.
PrivacyBudget system_budget(const std::vector<PrivacyProfile>& profiles);

}  // namespace scfl
