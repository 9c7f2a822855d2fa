#pragma once

#include "scfl/data.hpp"
#include "scfl/types.hpp"

#include <functional>
#include <vector>

namespace scfl {

// Constants instantiating the bounded-data assumption on a concrete dataset.
// alpha_i^2 and zeta_i^2 are the exact per-device squared Frobenius norms;
// kappa_i^2 bounds the residual over the phi-ball as (||X_i|| phi + ||Y_i||)^2.
// The unsubscripted zeta/kappa in the coded-gradient bound are taken as the
// max over devices, recorded here as zeta_global/kappa_global.
struct ProblemConstants {
  std::vector<double> alpha_sq;
  std::vector<double> zeta_sq;
  std::vector<double> kappa_sq;
  double phi = 0;
  double alpha = 0;         // sum of alpha_i^2
  double smoothness = 0;    // L = lambda_max(X^T X)
  double zeta_global = 0;   // max_i zeta_i^2
  double kappa_global = 0;  // max_i kappa_i^2
};

struct VarianceBound {
  double rho1 = 0;
  double rho2 = 0;
  double rho() const { return 0.25 * rho1 + 0.25 * rho2; }
};

ProblemConstants estimate_constants(const Dataset& ds, const DevicePartition& part, double phi);

// Largest eigenvalue of X^T X by power iteration to the given relative
// tolerance.
double spectral_smoothness(const Matrix& features, double rel_tol = 1e-6);

// Device-side gradient estimation error bound:
// 2 tau sum_i ((1-p_i)/p_i) zeta_i^2 kappa_i^2
//   + 2 tau sum_i (l_i (l_i - b_i) / b_i) zeta_i^2 kappa_i^2.
double rho1(const ProblemConstants& consts, const std::vector<double>& p,
            const std::vector<Index>& batches, const std::vector<Index>& local_sizes, Index tau);

// Server-side (coded) gradient estimation error bound:
// (4 tau / c) (m + m^2) zeta kappa + (4 tau / c) (d + d^2) phi^2 sum sigma_i^4
//   + (4 d m n tau / c^2) (zeta phi^2 + kappa) sum sigma_i^2.
// n_dim is the undetermined dimension symbol; callers bind it (label
// dimension o by default at the call sites).
double rho2(const ProblemConstants& consts, const std::vector<double>& sigma2s, Index c, Index m,
            Index d, Index n_dim, Index tau);

// Optimality-gap bound:
// (1 - alpha eta_0) / (2 sum eta_k) ||W0 - W*||_F^2
//   + (sum eta_k^2 / sum eta_k) rho.
double theorem1_bound(const ProblemConstants& consts, const VarianceBound& bound,
                      const std::function<double(Index)>& schedule, Index rounds, const Matrix& w0,
                      const Matrix& w_opt);

// Monte Carlo self-check of the four second-moment identities behind the
// variance bounds. reference values: (m+m^2)/c, (d+d^2)/c * sum sigma_i^4,
// c(c-b_s)/b_s, l(l-b)/b.
struct MomentCheck {
  double estimate = 0;
  double reference = 0;
  double rel_error = 0;  // |estimate - reference| / reference (absolute error when reference is 0)
};

struct WishartReport {
  MomentCheck projection;      // (1/c) G^T G vs I_m
  MomentCheck noise;           // (1/c) N^T N vs sigma^2 I_d
  MomentCheck server_sampling; // (c/b_s) S^T S vs I_c
  MomentCheck device_sampling; // (l/b) S^T S vs I_l
};

WishartReport wishart_selfcheck(Index m, Index c, Index d, const std::vector<double>& sigma2s,
                                int draws, Seed seed, Index b_s, Index l, Index b);

// Bound-report CSV with columns quantity,value,empirical,ratio.
void write_moment_report_csv(const std::string& path, const WishartReport& report);

}  // namespace scfl
