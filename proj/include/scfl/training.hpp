#pragma once

#include "scfl/coding.hpp"
#include "scfl/data.hpp"
#include "scfl/rng.hpp"
#include "scfl/system.hpp"
#include "scfl/types.hpp"

#include <vector>

namespace scfl {

// f(W) = 1/2 ||X W - Y||_F^2
double loss(MatrixView features, MatrixView labels, const Matrix& w);
double loss(const Dataset& ds, const Matrix& w);

// grad f = X^T (X W - Y)
Matrix full_gradient(MatrixView features, MatrixView labels, const Matrix& w);

// Thresholded (o = 1) or argmax (o > 1) agreement between X W and the labels.
double accuracy(MatrixView features, MatrixView labels, const Matrix& w);

struct OptimalSolution {
  Matrix w;              // minimum-norm least-squares solution
  bool rank_deficient = false;
};

// Normal-equations optimum; the gradient at the returned W is zero up to
// numerical tolerance whether or not X^T X is singular.
OptimalSolution solve_optimal(const Dataset& ds);

// Learning-rate schedules. The inverse kind is eta_k = tau s / ((k + beta) L)
// with s clamped to 0.99 beta / tau so eta_0 L < 1 always holds; the constant
// kind rejects eta0 L >= 1 outright.
struct ScheduleSpec {
  enum class Kind { constant, inverse };
  Kind kind = Kind::constant;
  double eta0 = 0.1;   // constant
  double beta = 1.0;   // inverse
  double scale = 0.99; // inverse; clamped to 0.99 * beta / tau
};

class LrSchedule {
 public:
  LrSchedule() = default;
  static LrSchedule constant(double eta0);
  static LrSchedule inverse(Index tau, double beta, double scale, double smoothness);

  double operator()(Index k) const;
  double eta0() const { return (*this)(0); }

 private:
  ScheduleSpec::Kind kind_ = ScheduleSpec::Kind::constant;
  double eta0_ = 0;
  double beta_ = 1;
  double coeff_ = 0;  // tau * s / L
};

LrSchedule make_schedule(const ScheduleSpec& spec, Index tau, double smoothness);

// Eq.-style device gradient: Bernoulli(b/l) diagonal row mask S, then
// (l/b) Xhat^T (Xhat W - Yhat). An all-zero mask is a legal draw and yields a
// zero gradient.
Matrix device_gradient(MatrixView features, MatrixView labels, const Matrix& w, Index batch,
                       Rng& rng);

// tau SGD steps from w0; returns the sum of the tau stochastic gradients
// (not the updated model). Throws on non-finite intermediates, naming the step.
Matrix local_train(MatrixView features, MatrixView labels, const Matrix& w0, Index tau, double eta,
                   Index batch, Rng& rng);

// Server-side coded gradient including the noise make-up term:
// (1/b_s) Xhat^T (Xhat W - Yhat) - sigma^2 W over a Bernoulli(b_s/c) mask.
Matrix server_gradient(const GlobalCodedDataset& coded, const Matrix& w, Index server_batch,
                       Rng& rng);

// tau server steps from w0 with W <- W - eta * server_gradient; returns the
// accumulated sum of the per-step gradients (make-up term included each step).
Matrix server_train(const GlobalCodedDataset& coded, const Matrix& w0, Index tau, double eta,
                    Index server_batch, Rng& rng);

struct LocalUpdate {
  Matrix accumulated;   // sum of the tau stochastic gradients
  Index device_id = 0;
  bool arrived = false;
  Index batch_used = 0;
};

// Eq.-5 aggregation: 1/2 (sum_i (1_i / p_i) g_i + g_server), summed in
// ascending device order. p_i = 0 is rejected.
Matrix aggregate(const std::vector<LocalUpdate>& updates, const std::vector<double>& p,
                 const Matrix& server_update);

enum class Framework { scfl, fedavg, codedfedl, dpcfl };

Framework framework_from_name(const std::string& name);
std::string framework_name(Framework kind);

enum class BatchMode { fixed, adaptive };

struct RoundMetrics {
  Index round = 0;       // 1-based
  double time_s = 0;     // round * T
  double train_loss = 0;
  double test_loss = 0;
  double test_accuracy = 0;  // NaN for regression tasks
  Index arrived_count = 0;
  double mean_batch = 0;
};

struct TrainState {
  Matrix model;               // W_K, the last iterate
  Index rounds_run = 0;
  Matrix weighted_model_sum;  // sum_k eta_k W_k, maintained incrementally
  double lr_sum = 0;
  std::vector<RoundMetrics> metrics;
  std::vector<Matrix> model_log;  // W_k per round when logging is enabled

  // (sum eta_k W_k) / (sum eta_k); the last iterate when no rounds ran.
  Matrix averaged_model() const;
};

// The model a framework reports after training: the learning-rate-weighted
// average for scfl/codedfedl, the last iterate for fedavg/dpcfl.
Matrix final_model(const TrainState& state, Framework kind);

struct SimConfig {
  Index rounds = 0;
  Index tau = 1;
  LrSchedule schedule;
  BatchMode mode = BatchMode::fixed;
  Index device_batch = 0;      // fixed mode; 0 means the full local batch
  Index server_batch = 0;      // 0 means the largest batch meeting the deadline
  double server_mac_rate = 0;  // MAC/s; used when server_batch == 0
  Index coded_count = 0;       // c
  std::vector<double> sigma2s; // per-device noise levels
  int workers = 1;
  bool log_models = false;
  bool classification = false; // emit accuracy instead of NaN
  double init_scale = 1.0;     // stddev of the random W_0
};

// Arrival weights used in aggregation: closed-form p_i at the configured
// batch (fixed mode) or at b = 1 (adaptive mode).
std::vector<double> arrival_probabilities(const std::vector<DeviceProfile>& devices,
                                          const ChannelModel& ch, Index tau, BatchMode mode,
                                          Index device_batch);

// Stream derivation used by the engine, exposed so run manifests and tests
// can reproduce any stream. Entity 0 is the server, device i is entity i + 1.
Seed init_stream_seed(Seed master);
Seed coding_stream_seed(Seed master, Index device);
Seed round_stream_seed(Seed master, Index round, Index entity);

// One engine behind all four frameworks. test may alias train.
TrainState run_framework(Framework kind, const Dataset& train, const Dataset& test,
                         const DevicePartition& part, const std::vector<DeviceProfile>& devices,
                         const ChannelModel& ch, const SimConfig& cfg, Seed master_seed);

TrainState run_scfl(const Dataset& train, const Dataset& test, const DevicePartition& part,
                    const std::vector<DeviceProfile>& devices, const ChannelModel& ch,
                    const SimConfig& cfg, Seed master_seed);

TrainState run_baseline(Framework kind, const Dataset& train, const Dataset& test,
                        const DevicePartition& part, const std::vector<DeviceProfile>& devices,
                        const ChannelModel& ch, const SimConfig& cfg, Seed master_seed);

}  // namespace scfl
