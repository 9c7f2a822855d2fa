#include "scfl/privacy.hpp"

#include <cmath>
#include <stdexcept>

namespace scfl {

std::pair<double, double> h_value(MatrixView local_features) {
  if (local_features.rows() < 1) throw std::invalid_argument("h_value: empty local feature matrix");
  double min_h2 = std::numeric_limits<double>::infinity();
  for (Index j = 0; j < local_features.cols(); ++j) {
    const auto col = local_features.col(j);
    const double sum_sq = col.squaredNorm();
    const double max_sq = col.cwiseAbs2().maxCoeff();
    min_h2 = std::min(min_h2, sum_sq - max_sq);
  }
  min_h2 = std::max(min_h2, 0.0);  // guard tiny negative from cancellation
  return {std::sqrt(min_h2), min_h2};
}

PrivacyBudget epsilon(double h2, Index c, double sigma2) {
  if (c < 1) throw std::invalid_argument("epsilon: c must be >= 1");
  if (h2 < 0 || sigma2 < 0) throw std::invalid_argument("epsilon: h2 and sigma2 must be >= 0");
  PrivacyBudget b;
  if (h2 + sigma2 == 0) {
    b.unbounded = true;
    b.bits = std::numeric_limits<double>::infinity();
    return b;
  }
  b.bits = 0.5 * std::log2(1.0 + static_cast<double>(c) / (h2 + sigma2));
  return b;
}

double epsilon_inverse(double eps_bits, double h2, Index c) {
  if (eps_bits <= 0) throw std::invalid_argument("epsilon_inverse: eps must be > 0");
  const PrivacyBudget cap = epsilon(h2, c, 0.0);
  if (!cap.unbounded && eps_bits > cap.bits + 1e-12)
    throw std::invalid_argument("epsilon_inverse: eps exceeds the noiseless budget q(0)");
  const double sigma2 = static_cast<double>(c) / (std::exp2(2.0 * eps_bits) - 1.0) - h2;
  return std::max(sigma2, 0.0);
}

PrivacyBudget system_budget(const std::vector<PrivacyProfile>& profiles) {
  if (profiles.empty()) throw std::invalid_argument("system_budget: no profiles");
  PrivacyBudget worst;
  worst.bits = -std::numeric_limits<double>::infinity();
  for (const auto& p : profiles) {
    if (p.epsilon.unbounded) return p.epsilon;
    if (p.epsilon.bits > worst.bits) worst = p.epsilon;
  }
  return worst;
}

}  // namespace scfl
