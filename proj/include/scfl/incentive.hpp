#pragma once

#include "scfl/types.hpp"

#include <functional>
#include <string>
#include <vector>

namespace scfl {

// Per-device economics. The list handed to the solvers must be sorted
// ascending by mu. sigma_min2 > 0 tightens the budget cap to q_i(sigma_min2);
// devices with h2 == 0 need sigma_min2 > 0 for the cap to be finite.
struct DeviceEcon {
  double mu = 0;          // privacy sensitivity, reward units per bit
  double h2 = 0;
  Index coded_count = 0;  // c
  double sigma_min2 = 0;
};

// Performance model of the added noise, non-increasing and concave.
using Gamma = std::function<double(double)>;

// The default Gamma(sigma^2) = -sigma^4.
Gamma default_gamma();

struct ContractItem {
  double epsilon_bits = 0;
  double reward = 0;
  double sigma2 = 0;  // q_i^{-1}(epsilon)
};

struct Contract {
  std::vector<ContractItem> items;  // index-aligned with the sorted econ list
};

// Budget from noise level and its inverse for one device.
double budget_of_noise(const DeviceEcon& dev, double sigma2);
double noise_of_budget(const DeviceEcon& dev, double eps_bits);
// Largest admissible budget, q_i(sigma_min2).
double budget_cap(const DeviceEcon& dev);

// sum Gamma(sigma_i^2) - lambda sum r_i
double server_utility(const std::vector<double>& sigma2s, const std::vector<double>& rewards,
                      double lambda, const Gamma& gamma);

// r_i - mu_i eps_i
double device_utility(double eps_bits, double reward, double mu);

struct FeasibilityReport {
  bool ir_ok = true;
  bool ic_ok = true;
  bool monotone_ok = true;
  struct Violation {
    std::string kind;  // "ir", "ic", "monotone"
    Index i = 0;
    Index j = 0;       // other item for IC
    double slack = 0;  // negative
  };
  std::vector<Violation> violations;
  bool ok() const { return ir_ok && ic_ok && monotone_ok; }
};

// IR for every device, IC over the full N^2 scan, and the three feasibility
// monotonicity conditions. Slacks below -1e-9 count as violations.
FeasibilityReport check_feasibility(const Contract& contract, const std::vector<DeviceEcon>& econ,
                                    double slack_tol = 1e-9);

// Minimal rewards for given budgets: r_N = mu_N eps_N, then backwards
// r_i = r_{i+1} - mu_i eps_{i+1} + mu_i eps_i.
std::vector<double> optimal_rewards(const std::vector<double>& eps, const std::vector<double>& mu);

// Phi_i(eps) = Gamma(q_i^{-1}(eps)) - lambda i mu_i eps + lambda (i-1) mu_{i-1} eps,
// with 1-based i and mu_0 = 0. index is 0-based here.
double phi(double eps_bits, Index index, double lambda, const std::vector<DeviceEcon>& econ,
           const Gamma& gamma);

// Solves the reduced problem max sum Phi_i subject to eps_1 >= ... >= eps_N > 0
// by per-device golden-section maximization and right-to-left pooling of
// adjacent violators (each pool re-maximized jointly). Gamma is probed for
// concavity on a grid first.
std::vector<double> bunching_ironing(const std::vector<DeviceEcon>& econ, double lambda,
                                     const Gamma& gamma);

struct ContractSolution {
  Contract contract;
  double server_utility = 0;
  double total_reward = 0;
};

// Budgets from bunching_ironing, rewards from optimal_rewards; the result is
// feasibility-checked before being returned.
ContractSolution design_contract(const std::vector<DeviceEcon>& econ, double lambda,
                                 const Gamma& gamma);

struct StackelbergResult {
  Contract allocation;       // contract-shaped for comparison
  double total_reward = 0;   // the posted reward R
  double performance = 0;    // sum Gamma(sigma_i^2)
  bool converged = true;
  int iterations = 0;
};

// Proportional-allocation fixed point at a posted total reward R: each device
// best-responds in its budget given the others, r_i = R eps_i / sum eps_j.
StackelbergResult stackelberg_response(const std::vector<DeviceEcon>& econ, double total_reward,
                                       const Gamma& gamma, double tol = 1e-6, int max_iters = 1000);

// Server grid-searches the posted reward maximizing sum Gamma - lambda_s R.
StackelbergResult stackelberg_baseline(const std::vector<DeviceEcon>& econ, double lambda_s,
                                       const Gamma& gamma);

struct LambdaRow {
  double lambda = 0;
  double total_reward = 0;
  double total_sigma2 = 0;
  double server_utility = 0;
};

// One design_contract run per lambda; the reference table a server consults
// to pick lambda for a reward budget.
std::vector<LambdaRow> lambda_table(const std::vector<DeviceEcon>& econ,
                                    const std::vector<double>& lambdas, const Gamma& gamma);

}  // namespace scfl
