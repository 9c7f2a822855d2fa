#include "scfl/incentive.hpp"

#include "scfl/privacy.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace scfl {

namespace {

constexpr double kEpsFloorFactor = 1e-12;  // lower edge of the budget search bracket
constexpr double kGoldenTol = 1e-8;

// Golden-section maximization of a unimodal (concave) scalar function.
double golden_max(const std::function<double(double)>& f, double lo, double hi,
                  double tol = kGoldenTol) {
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double x1 = b - inv_phi * (b - a);
  double x2 = a + inv_phi * (b - a);
  double f1 = f(x1), f2 = f(x2);
  while (b - a > tol) {
    if (f1 < f2) {
      a = x1;
      x1 = x2;
      f1 = f2;
      x2 = a + inv_phi * (b - a);
      f2 = f(x2);
    } else {
      b = x2;
      x2 = x1;
      f2 = f1;
      x1 = b - inv_phi * (b - a);
      f1 = f(x1);
    }
  }
  const double mid = 0.5 * (a + b);
  // Endpoints can win when the maximizer sits on the bracket edge.
  double best = mid, best_f = f(mid);
  for (double cand : {lo, hi}) {
    const double fc = f(cand);
    if (fc > best_f) {
      best = cand;
      best_f = fc;
    }
  }
  return best;
}

void validate_econ(const std::vector<DeviceEcon>& econ) {
  if (econ.empty()) throw std::invalid_argument("incentive: empty device list");
  double prev = 0;
  for (const auto& dev : econ) {
    if (dev.mu <= 0) throw std::invalid_argument("incentive: mu must be > 0");
    if (dev.mu < prev) throw std::invalid_argument("incentive: mu list must be ascending");
    if (dev.coded_count < 1) throw std::invalid_argument("incentive: coded_count must be >= 1");
    if (dev.h2 < 0 || dev.sigma_min2 < 0)
      throw std::invalid_argument("incentive: h2 and sigma_min2 must be >= 0");
    if (dev.h2 + dev.sigma_min2 <= 0)
      throw std::invalid_argument(
          "incentive: device with h2 = 0 needs sigma_min2 > 0 for a finite budget cap");
    prev = dev.mu;
  }
}

void probe_gamma(const Gamma& gamma, double sigma2_hi) {
  // Grid probe for the non-increasing concave requirement.
  const int n = 64;
  double prev = gamma(0.0);
  double prev_diff = std::numeric_limits<double>::infinity();
  const double step = sigma2_hi > 0 ? sigma2_hi / n : 1.0 / n;
  for (int i = 1; i <= n; ++i) {
    const double v = gamma(i * step);
    const double diff = v - prev;
    if (diff > 1e-9 * (1.0 + std::abs(prev)))
      throw std::invalid_argument("incentive: Gamma is not non-increasing");
    if (diff > prev_diff + 1e-9 * (1.0 + std::abs(diff)))
      throw std::invalid_argument("incentive: Gamma is not concave");
    prev_diff = diff;
    prev = v;
  }
}

}  // namespace

Gamma default_gamma() {
  return [](double sigma2) { return -sigma2 * sigma2; };
}

double budget_of_noise(const DeviceEcon& dev, double sigma2) {
  const PrivacyBudget b = epsilon(dev.h2, dev.coded_count, sigma2);
  if (b.unbounded) throw std::invalid_argument("budget_of_noise: unbounded budget (h2 + sigma2 = 0)");
  return b.bits;
}

double noise_of_budget(const DeviceEcon& dev, double eps_bits) {
  return epsilon_inverse(eps_bits, dev.h2, dev.coded_count);
}

double budget_cap(const DeviceEcon& dev) { return budget_of_noise(dev, dev.sigma_min2); }

double server_utility(const std::vector<double>& sigma2s, const std::vector<double>& rewards,
                      double lambda, const Gamma& gamma) {
  if (sigma2s.size() != rewards.size())
    throw std::invalid_argument("server_utility: length mismatch");
  if (lambda <= 0) throw std::invalid_argument("server_utility: lambda must be > 0");
  double util = 0;
  for (std::size_t i = 0; i < sigma2s.size(); ++i) util += gamma(sigma2s[i]) - lambda * rewards[i];
  return util;
}

double device_utility(double eps_bits, double reward, double mu) { return reward - mu * eps_bits; }

FeasibilityReport check_feasibility(const Contract& contract, const std::vector<DeviceEcon>& econ,
                                    double slack_tol) {
  const std::size_t n = contract.items.size();
  if (n != econ.size()) throw std::invalid_argument("check_feasibility: length mismatch");
  FeasibilityReport rep;
  auto flag = [&](const char* kind, Index i, Index j, double slack, bool& ok) {
    if (slack < -slack_tol) {
      ok = false;
      rep.violations.push_back({kind, i, j, slack});
    }
  };

  for (std::size_t i = 0; i < n; ++i) {
    const auto& it = contract.items[i];
    flag("ir", static_cast<Index>(i), static_cast<Index>(i),
         device_utility(it.epsilon_bits, it.reward, econ[i].mu), rep.ir_ok);
    for (std::size_t j = 0; j < n; ++j) {
      if (i == j) continue;
      const double own = device_utility(it.epsilon_bits, it.reward, econ[i].mu);
      const double other =
          device_utility(contract.items[j].epsilon_bits, contract.items[j].reward, econ[i].mu);
      flag("ic", static_cast<Index>(i), static_cast<Index>(j), own - other, rep.ic_ok);
    }
  }

  for (std::size_t i = 0; i + 1 < n; ++i) {
    const auto& a = contract.items[i];
    const auto& b = contract.items[i + 1];
    flag("monotone", static_cast<Index>(i), static_cast<Index>(i + 1),
         a.epsilon_bits - b.epsilon_bits, rep.monotone_ok);
    flag("monotone", static_cast<Index>(i), static_cast<Index>(i + 1), a.reward - b.reward,
         rep.monotone_ok);
    // Local IC sandwich from the feasibility lemma.
    flag("monotone", static_cast<Index>(i), static_cast<Index>(i + 1),
         (b.reward - econ[i + 1].mu * b.epsilon_bits + econ[i + 1].mu * a.epsilon_bits) - a.reward,
         rep.monotone_ok);
    flag("monotone", static_cast<Index>(i), static_cast<Index>(i + 1),
         a.reward - (b.reward - econ[i].mu * b.epsilon_bits + econ[i].mu * a.epsilon_bits),
         rep.monotone_ok);
  }
  if (n > 0) {
    const auto& last = contract.items[n - 1];
    flag("monotone", static_cast<Index>(n - 1), static_cast<Index>(n - 1),
         last.reward - econ[n - 1].mu * last.epsilon_bits, rep.monotone_ok);
    flag("monotone", static_cast<Index>(n - 1), static_cast<Index>(n - 1), last.epsilon_bits,
         rep.monotone_ok);
  }
  return rep;
}

std::vector<double> optimal_rewards(const std::vector<double>& eps, const std::vector<double>& mu) {
  const std::size_t n = eps.size();
  if (n == 0 || mu.size() != n) throw std::invalid_argument("optimal_rewards: bad input lengths");
  for (std::size_t i = 0; i + 1 < n; ++i) {
    if (eps[i] < eps[i + 1] - 1e-12)
      throw std::invalid_argument("optimal_rewards: budgets must be non-increasing");
    if (mu[i] > mu[i + 1])
      throw std::invalid_argument("optimal_rewards: mu must be ascending");
  }
  if (eps[n - 1] <= 0) throw std::invalid_argument("optimal_rewards: budgets must be positive");

  std::vector<double> r(n);
  r[n - 1] = mu[n - 1] * eps[n - 1];
  for (std::size_t i = n - 1; i-- > 0;) r[i] = r[i + 1] - mu[i] * eps[i + 1] + mu[i] * eps[i];
  return r;
}

double phi(double eps_bits, Index index, double lambda, const std::vector<DeviceEcon>& econ,
           const Gamma& gamma) {
  const std::size_t i = static_cast<std::size_t>(index);
  if (i >= econ.size()) throw std::invalid_argument("phi: index out of range");
  if (eps_bits <= 0 || eps_bits > budget_cap(econ[i]) * (1.0 + 1e-12))
    throw std::invalid_argument("phi: eps outside (0, q_i(sigma_min2)]");
  const double mu_i = econ[i].mu;
  const double mu_prev = i > 0 ? econ[i - 1].mu : 0.0;
  const double rank = static_cast<double>(i + 1);
  return gamma(noise_of_budget(econ[i], eps_bits)) -
         lambda * (rank * mu_i - (rank - 1.0) * mu_prev) * eps_bits;
}

std::vector<double> bunching_ironing(const std::vector<DeviceEcon>& econ, double lambda,
                                     const Gamma& gamma) {
  validate_econ(econ);
  if (lambda <= 0) throw std::invalid_argument("bunching_ironing: lambda must be > 0");
  const std::size_t n = econ.size();

  double probe_hi = 0;
  std::vector<double> caps(n), floors(n);
  for (std::size_t i = 0; i < n; ++i) {
    caps[i] = budget_cap(econ[i]);
    floors[i] = caps[i] * kEpsFloorFactor;
    probe_hi = std::max(probe_hi, noise_of_budget(econ[i], caps[i] * 1e-3));
  }
  probe_gamma(gamma, probe_hi);

  // Pool of adjacent devices sharing one budget value.
  struct Pool {
    std::size_t lo, hi;  // inclusive device index range
    double value;
  };
  auto pool_argmax = [&](std::size_t lo, std::size_t hi) {
    double bracket_hi = caps[lo];
    double bracket_lo = floors[lo];
    for (std::size_t l = lo; l <= hi; ++l) {
      bracket_hi = std::min(bracket_hi, caps[l]);
      bracket_lo = std::max(bracket_lo, floors[l]);
    }
    auto objective = [&](double eps) {
      double s = 0;
      for (std::size_t l = lo; l <= hi; ++l) s += phi(eps, static_cast<Index>(l), lambda, econ, gamma);
      return s;
    };
    return golden_max(objective, bracket_lo, bracket_hi);
  };

  // Right-to-left scan; merge whenever the left neighbour undercuts a pool.
  std::vector<Pool> pools;
  for (std::size_t idx = n; idx-- > 0;) {
    Pool cur{idx, idx, pool_argmax(idx, idx)};
    while (!pools.empty() && cur.value < pools.back().value) {
      cur.hi = pools.back().hi;
      pools.pop_back();
      cur.value = pool_argmax(cur.lo, cur.hi);
    }
    pools.push_back(cur);
  }

  std::vector<double> eps(n);
  for (const auto& pool : pools)
    for (std::size_t l = pool.lo; l <= pool.hi; ++l) eps[l] = pool.value;
  for (std::size_t i = 0; i + 1 < n; ++i)
    eps[i] = std::max(eps[i], eps[i + 1]);  // guard golden-section ties
  return eps;
}

ContractSolution design_contract(const std::vector<DeviceEcon>& econ, double lambda,
                                 const Gamma& gamma) {
  const auto eps = bunching_ironing(econ, lambda, gamma);
  std::vector<double> mu(econ.size());
  for (std::size_t i = 0; i < econ.size(); ++i) mu[i] = econ[i].mu;
  const auto rewards = optimal_rewards(eps, mu);

  ContractSolution sol;
  std::vector<double> sigma2s(econ.size());
  for (std::size_t i = 0; i < econ.size(); ++i) {
    sigma2s[i] = noise_of_budget(econ[i], eps[i]);
    sol.contract.items.push_back({eps[i], rewards[i], sigma2s[i]});
    sol.total_reward += rewards[i];
  }
  sol.server_utility = server_utility(sigma2s, rewards, lambda, gamma);

  const auto rep = check_feasibility(sol.contract, econ);
  if (!rep.ok())
    throw std::runtime_error("design_contract: solved contract failed the feasibility check");
  return sol;
}

StackelbergResult stackelbergresponse_impl(const std::vector<DeviceEcon>& econ, double total_reward,
                                           const Gamma& gamma, double tol, int max_iters) {
  validate_econ(econ);
  if (total_reward < 0) throw std::invalid_argument("stackelberg: total reward must be >= 0");
  const std::size_t n = econ.size();

  std::vector<double> caps(n), floors(n), eps(n);
  for (std::size_t i = 0; i < n; ++i) {
    caps[i] = budget_cap(econ[i]);
    floors[i] = caps[i] * 1e-9;
    eps[i] = 0.5 * caps[i];
  }

  StackelbergResult res;
  res.total_reward = total_reward;
  res.converged = false;
  int it = 0;
  for (; it < max_iters; ++it) {
    double max_change = 0;
    for (std::size_t i = 0; i < n; ++i) {
      double others = 0;
      for (std::size_t j = 0; j < n; ++j)
        if (j != i) others += eps[j];
      auto utility = [&](double e) {
        const double share = (e + others) > 0 ? total_reward * e / (e + others) : 0.0;
        return share - econ[i].mu * e;
      };
      const double next = golden_max(utility, floors[i], caps[i], 1e-10);
      max_change = std::max(max_change, std::abs(next - eps[i]));
      eps[i] = next;
    }
    if (max_change < tol) {
      res.converged = true;
      ++it;
      break;
    }
  }
  res.iterations = it;

  double eps_sum = 0;
  for (double e : eps) eps_sum += e;
  for (std::size_t i = 0; i < n; ++i) {
    const double reward = eps_sum > 0 ? total_reward * eps[i] / eps_sum : 0.0;
    const double sigma2 = noise_of_budget(econ[i], eps[i]);
    res.allocation.items.push_back({eps[i], reward, sigma2});
    res.performance += gamma(sigma2);
  }
  return res;
}

StackelbergResult stackelberg_response(const std::vector<DeviceEcon>& econ, double total_reward,
                                       const Gamma& gamma, double tol, int max_iters) {
  return stackelbergresponse_impl(econ, total_reward, gamma, tol, max_iters);
}

StackelbergResult stackelberg_baseline(const std::vector<DeviceEcon>& econ, double lambda_s,
                                       const Gamma& gamma) {
  validate_econ(econ);
  if (lambda_s <= 0) throw std::invalid_argument("stackelberg_baseline: lambda must be > 0");

  double ref = 0;
  for (const auto& dev : econ) ref += dev.mu * budget_cap(dev);

  StackelbergResult best;
  double best_util = -std::numeric_limits<double>::infinity();
  const int points = 60;
  for (int i = 0; i < points; ++i) {
    const double r = ref * 1e-3 * std::pow(1e4, static_cast<double>(i) / (points - 1));
    auto res = stackelbergresponse_impl(econ, r, gamma, 1e-6, 1000);
    const double util = res.performance - lambda_s * r;
    if (util > best_util) {
      best_util = util;
      best = std::move(res);
    }
  }
  return best;
}

std::vector<LambdaRow> lambda_table(const std::vector<DeviceEcon>& econ,
                                    const std::vector<double>& lambdas, const Gamma& gamma) {
  if (lambdas.empty()) throw std::invalid_argument("lambda_table: empty grid");
  std::vector<LambdaRow> rows;
  for (double lambda : lambdas) {
    const auto sol = design_contract(econ, lambda, gamma);
    LambdaRow row;
    row.lambda = lambda;
    row.total_reward = sol.total_reward;
    for (const auto& item : sol.contract.items) row.total_sigma2 += item.sigma2;
    row.server_utility = sol.server_utility;
    rows.push_back(row);
  }
  return rows;
}

}  // namespace scfl
