#include "scfl/training.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <future>
#include <mutex>
#include <stdexcept>

namespace scfl {

double loss(MatrixView features, MatrixView labels, const Matrix& w) {
  return 0.5 * (features * w - labels).squaredNorm();
}

double loss(const Dataset& ds, const Matrix& w) { return loss(ds.features, ds.labels, w); }

Matrix full_gradient(MatrixView features, MatrixView labels, const Matrix& w) {
  return features.transpose() * (features * w - labels);
}

double accuracy(MatrixView features, MatrixView labels, const Matrix& w) {
  const Matrix pred = features * w;
  const Index m = features.rows();
  Index hits = 0;
  if (labels.cols() == 1) {
    for (Index i = 0; i < m; ++i)
      if ((pred(i, 0) >= 0.5) == (labels(i, 0) >= 0.5)) ++hits;
  } else {
    for (Index i = 0; i < m; ++i) {
      Index pi, yi;
      pred.row(i).maxCoeff(&pi);
      labels.row(i).maxCoeff(&yi);
      if (pi == yi) ++hits;
    }
  }
  return static_cast<double>(hits) / static_cast<double>(m);
}

OptimalSolution solve_optimal(const Dataset& ds) {
  Eigen::CompleteOrthogonalDecomposition<Matrix> cod(ds.features);
  OptimalSolution sol;
  sol.w = cod.solve(ds.labels);
  sol.rank_deficient = cod.rank() < ds.feature_dim();
  return sol;
}

LrSchedule LrSchedule::constant(double eta0) {
  LrSchedule s;
  s.kind_ = ScheduleSpec::Kind::constant;
  s.eta0_ = eta0;
  return s;
}

LrSchedule LrSchedule::inverse(Index tau, double beta, double scale, double smoothness) {
  if (beta <= 0) throw std::invalid_argument("LrSchedule: beta must be > 0");
  if (smoothness <= 0) throw std::invalid_argument("LrSchedule: smoothness must be > 0");
  const double s_eff = std::min(scale, 0.99 * beta / static_cast<double>(tau));
  if (s_eff <= 0) throw std::invalid_argument("LrSchedule: scale must be > 0");
  LrSchedule s;
  s.kind_ = ScheduleSpec::Kind::inverse;
  s.beta_ = beta;
  s.coeff_ = static_cast<double>(tau) * s_eff / smoothness;
  return s;
}

double LrSchedule::operator()(Index k) const {
  if (kind_ == ScheduleSpec::Kind::constant) return eta0_;
  return coeff_ / (static_cast<double>(k) + beta_);
}

LrSchedule make_schedule(const ScheduleSpec& spec, Index tau, double smoothness) {
  if (spec.kind == ScheduleSpec::Kind::constant) {
    if (spec.eta0 * smoothness >= 1.0)
      throw std::invalid_argument("make_schedule: constant schedule violates eta0 * L < 1");
    return LrSchedule::constant(spec.eta0);
  }
  return LrSchedule::inverse(tau, spec.beta, spec.scale, smoothness);
}

namespace {

// Bernoulli(b/l) row mask; returns the selected row indices in order.
std::vector<Index> draw_mask(Index rows, Index batch, Rng& rng) {
  const double p = static_cast<double>(batch) / static_cast<double>(rows);
  std::vector<Index> sel;
  sel.reserve(static_cast<std::size_t>(batch));
  for (Index j = 0; j < rows; ++j)
    if (rng.bernoulli(p)) sel.push_back(j);
  return sel;
}

Matrix masked_gradient(MatrixView features, MatrixView labels, const Matrix& w,
                       const std::vector<Index>& sel, double scale) {
  if (sel.empty()) return Matrix::Zero(w.rows(), w.cols());
  Matrix xs(static_cast<Index>(sel.size()), features.cols());
  Matrix ys(static_cast<Index>(sel.size()), labels.cols());
  for (std::size_t i = 0; i < sel.size(); ++i) {
    xs.row(static_cast<Index>(i)) = features.row(sel[i]);
    ys.row(static_cast<Index>(i)) = labels.row(sel[i]);
  }
  return scale * (xs.transpose() * (xs * w - ys));
}

}  // namespace

Matrix device_gradient(MatrixView features, MatrixView labels, const Matrix& w, Index batch,
                       Rng& rng) {
  const Index l = features.rows();
  if (batch < 1 || batch > l) throw std::invalid_argument("device_gradient: need 1 <= b <= l_i");
  const auto sel = draw_mask(l, batch, rng);
  return masked_gradient(features, labels, w, sel,
                         static_cast<double>(l) / static_cast<double>(batch));
}

Matrix local_train(MatrixView features, MatrixView labels, const Matrix& w0, Index tau, double eta,
                   Index batch, Rng& rng) {
  if (tau < 1) throw std::invalid_argument("local_train: tau must be >= 1");
  Matrix w = w0;
  Matrix acc = Matrix::Zero(w0.rows(), w0.cols());
  for (Index u = 0; u < tau; ++u) {
    const Matrix g = device_gradient(features, labels, w, batch, rng);
    acc += g;
    w -= eta * g;
    if (!w.allFinite())
      throw std::runtime_error("local_train: model diverged at local step " + std::to_string(u));
  }
  return acc;
}

Matrix server_gradient(const GlobalCodedDataset& coded, const Matrix& w, Index server_batch,
                       Rng& rng) {
  const Index c = coded.coded_count();
  if (server_batch < 1 || server_batch > c)
    throw std::invalid_argument("server_gradient: need 1 <= b_s <= c");
  const auto sel = draw_mask(c, server_batch, rng);
  Matrix g = masked_gradient(coded.coded_features, coded.coded_labels, w, sel,
                             1.0 / static_cast<double>(server_batch));
  g -= coded.total_noise * w;  // make-up term cancels the noise bias
  return g;
}

Matrix server_train(const GlobalCodedDataset& coded, const Matrix& w0, Index tau, double eta,
                    Index server_batch, Rng& rng) {
  if (tau < 1) throw std::invalid_argument("server_train: tau must be >= 1");
  Matrix w = w0;
  Matrix acc = Matrix::Zero(w0.rows(), w0.cols());
  for (Index u = 0; u < tau; ++u) {
    const Matrix g = server_gradient(coded, w, server_batch, rng);
    acc += g;
    w -= eta * g;
    if (!w.allFinite())
      throw std::runtime_error("server_train: model diverged at server step " + std::to_string(u));
  }
  return acc;
}

Matrix aggregate(const std::vector<LocalUpdate>& updates, const std::vector<double>& p,
                 const Matrix& server_update) {
  if (updates.size() != p.size()) throw std::invalid_argument("aggregate: updates/p length mismatch");
  Matrix sum = Matrix::Zero(server_update.rows(), server_update.cols());
  for (std::size_t i = 0; i < updates.size(); ++i) {
    if (p[i] <= 0)
      throw std::invalid_argument("aggregate: device " + std::to_string(i) +
                                  " has zero arrival probability; exclude it at configuration time");
    if (updates[i].arrived) sum += updates[i].accumulated / p[i];
  }
  return 0.5 * (sum + server_update);
}

Framework framework_from_name(const std::string& name) {
  if (name == "scfl") return Framework::scfl;
  if (name == "fedavg") return Framework::fedavg;
  if (name == "codedfedl") return Framework::codedfedl;
  if (name == "dpcfl") return Framework::dpcfl;
  throw std::invalid_argument("unknown framework '" + name + "'");
}

std::string framework_name(Framework kind) {
  switch (kind) {
    case Framework::scfl: return "scfl";
    case Framework::fedavg: return "fedavg";
    case Framework::codedfedl: return "codedfedl";
    case Framework::dpcfl: return "dpcfl";
  }
  return "?";
}

Matrix TrainState::averaged_model() const {
  if (lr_sum <= 0) return model;
  return weighted_model_sum / lr_sum;
}

Matrix final_model(const TrainState& state, Framework kind) {
  if (kind == Framework::scfl || kind == Framework::codedfedl) return state.averaged_model();
  return state.model;
}

std::vector<double> arrival_probabilities(const std::vector<DeviceProfile>& devices,
                                          const ChannelModel& ch, Index tau, BatchMode mode,
                                          Index device_batch) {
  std::vector<double> p;
  p.reserve(devices.size());
  for (const auto& dev : devices) {
    const Index b = mode == BatchMode::adaptive
                        ? 1
                        : (device_batch > 0 ? device_batch : dev.local_samples);
    p.push_back(arrival_probability(dev, ch, tau, b));
  }
  return p;
}

Seed init_stream_seed(Seed master) { return derive_seed(master, 1); }

Seed coding_stream_seed(Seed master, Index device) {
  return derive_seed(master, 2, static_cast<Seed>(device));
}

Seed round_stream_seed(Seed master, Index round, Index entity) {
  return derive_seed(master, 3, static_cast<Seed>(round), static_cast<Seed>(entity));
}

namespace {

struct DeviceRound {
  LocalUpdate update;
  Index attempted_batch = 0;
};

template <typename Fn>
void parallel_for(Index n, int workers, Fn&& fn) {
  if (workers <= 1 || n <= 1) {
    for (Index i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::future<void>> futures;
  std::atomic<Index> next{0};
  const int count = std::min<int>(workers, static_cast<int>(n));
  for (int w = 0; w < count; ++w) {
    futures.push_back(std::async(std::launch::async, [&]() {
      for (Index i = next.fetch_add(1); i < n; i = next.fetch_add(1)) fn(i);
    }));
  }
  for (auto& f : futures) f.get();
}

}  // namespace

TrainState run_framework(Framework kind, const Dataset& train, const Dataset& test,
                         const DevicePartition& part, const std::vector<DeviceProfile>& devices,
                         const ChannelModel& ch, const SimConfig& cfg, Seed master_seed) {
  const Index n_dev = part.device_count();
  const Index d = train.feature_dim();
  const Index o = train.label_dim();
  const bool uses_devices = kind != Framework::dpcfl;
  const bool uses_coded = kind != Framework::fedavg;
  const Index tau = kind == Framework::codedfedl ? 1 : cfg.tau;

  if (uses_devices && static_cast<Index>(devices.size()) != n_dev)
    throw std::invalid_argument("run_framework: device profile count does not match partition");
  if (cfg.mode == BatchMode::fixed && cfg.device_batch > 0) {
    for (const auto& r : part.ranges)
      if (cfg.device_batch > r.size)
        throw std::invalid_argument("run_framework: fixed batch exceeds a device's local samples");
  }

  // Coded data is prepared once, before training starts.
  GlobalCodedDataset coded;
  Index server_batch = 0;
  if (uses_coded) {
    if (cfg.coded_count < 1) throw std::invalid_argument("run_framework: coded_count must be >= 1");
    if (static_cast<Index>(cfg.sigma2s.size()) != n_dev)
      throw std::invalid_argument("run_framework: sigma2s must list one noise level per device");
    std::vector<CodedShard> shards;
    shards.reserve(static_cast<std::size_t>(n_dev));
    for (Index i = 0; i < n_dev; ++i) {
      const double sigma2 = kind == Framework::codedfedl ? 0.0 : cfg.sigma2s[static_cast<std::size_t>(i)];
      shards.push_back(encode_local(part.features_of(train, i), part.labels_of(train, i),
                                    cfg.coded_count, sigma2, coding_stream_seed(master_seed, i)));
    }
    coded = build_global(shards);

    if (cfg.server_batch > 0) {
      server_batch = std::min(cfg.server_batch, cfg.coded_count);
    } else {
      if (cfg.server_mac_rate <= 0)
        throw std::invalid_argument("run_framework: need server_batch or server_mac_rate");
      const double bound = ch.round_deadline_s * cfg.server_mac_rate /
                           (static_cast<double>(tau) * ch.mac_per_sample);
      server_batch = std::min<Index>(static_cast<Index>(std::floor(bound)), cfg.coded_count);
      if (server_batch < 1)
        throw std::invalid_argument("run_framework: server cannot process one sample per deadline");
    }
  }

  std::vector<double> p;
  if (uses_devices) {
    p = arrival_probabilities(devices, ch, tau, cfg.mode, cfg.device_batch);
    if (kind == Framework::scfl || kind == Framework::codedfedl) {
      for (std::size_t i = 0; i < p.size(); ++i)
        if (p[i] <= 0)
          throw std::invalid_argument("run_framework: device " + std::to_string(i) +
                                      " has zero arrival probability");
    }
  }

  TrainState state;
  {
    Rng init(init_stream_seed(master_seed));
    state.model = normal_matrix(init, d, o, cfg.init_scale);
  }
  state.weighted_model_sum = Matrix::Zero(d, o);

  const double nan = std::numeric_limits<double>::quiet_NaN();

  for (Index k = 0; k < cfg.rounds; ++k) {
    const double eta = cfg.schedule(k);
    const Matrix w_k = state.model;
    if (cfg.log_models) state.model_log.push_back(w_k);

    std::vector<DeviceRound> dev_rounds(static_cast<std::size_t>(uses_devices ? n_dev : 0));
    if (uses_devices) {
      std::exception_ptr failure;
      std::mutex failure_mu;
      parallel_for(n_dev, cfg.workers, [&](Index i) {
        try {
          Rng stream(round_stream_seed(master_seed, k, i + 1));
          const auto& dev = devices[static_cast<std::size_t>(i)];
          auto& out = dev_rounds[static_cast<std::size_t>(i)];
          out.update.device_id = i;

          Index batch = 0;
          bool arrived = false;
          if (cfg.mode == BatchMode::adaptive) {
            const double gain = stream.exponential(ch.mean_gain);
            batch = adapt_batch(dev, ch, tau, gain);
            arrived = batch >= 1;
          } else {
            batch = cfg.device_batch > 0 ? cfg.device_batch : dev.local_samples;
            arrived = draw_round(dev, ch, tau, batch, stream).arrived;
          }
          out.attempted_batch = batch;
          out.update.arrived = arrived;
          out.update.batch_used = batch;
          if (arrived) {
            out.update.accumulated = local_train(part.features_of(train, i),
                                                 part.labels_of(train, i), w_k, tau, eta, batch,
                                                 stream);
          } else {
            out.update.accumulated = Matrix::Zero(d, o);  // stale straggler work is discarded
          }
        } catch (...) {
          std::scoped_lock lock(failure_mu);
          if (!failure) failure = std::current_exception();
        }
      });
      if (failure) {
        try {
          std::rethrow_exception(failure);
        } catch (const std::exception& e) {
          throw std::runtime_error("round " + std::to_string(k) + ": " + e.what());
        }
      }
    }

    Matrix w_next;
    if (kind == Framework::dpcfl) {
      // Server-only training, no make-up term, the model moves step by step.
      Rng stream(round_stream_seed(master_seed, k, 0));
      Matrix w = w_k;
      for (Index u = 0; u < tau; ++u) {
        const Matrix g = server_gradient(coded, w, server_batch, stream) + coded.total_noise * w;
        w -= eta * g;
      }
      w_next = std::move(w);
    } else {
      Matrix server_update = Matrix::Zero(d, o);
      if (uses_coded) {
        Rng stream(round_stream_seed(master_seed, k, 0));
        try {
          server_update = server_train(coded, w_k, tau, eta, server_batch, stream);
        } catch (const std::exception& e) {
          throw std::runtime_error("round " + std::to_string(k) + ": " + e.what());
        }
      }
      Matrix update;
      if (kind == Framework::fedavg) {
        update = Matrix::Zero(d, o);
        for (const auto& dr : dev_rounds)
          if (dr.update.arrived) update += dr.update.accumulated;
      } else {
        std::vector<LocalUpdate> updates;
        updates.reserve(dev_rounds.size());
        for (auto& dr : dev_rounds) updates.push_back(std::move(dr.update));
        update = aggregate(updates, p, server_update);
      }
      w_next = w_k - eta * update;
    }

    state.weighted_model_sum += eta * w_k;
    state.lr_sum += eta;
    state.model = std::move(w_next);
    if (!state.model.allFinite())
      throw std::runtime_error("round " + std::to_string(k) + ": global model diverged");
    state.rounds_run = k + 1;

    RoundMetrics rm;
    rm.round = k + 1;
    rm.time_s = static_cast<double>(k + 1) * ch.round_deadline_s;
    rm.train_loss = loss(train, state.model);
    rm.test_loss = loss(test, state.model);
    rm.test_accuracy = cfg.classification ? accuracy(test.features, test.labels, state.model) : nan;
    if (uses_devices) {
      double batch_sum = 0;
      for (const auto& dr : dev_rounds) {
        if (dr.update.arrived) ++rm.arrived_count;
        batch_sum += static_cast<double>(dr.attempted_batch);
      }
      rm.mean_batch = batch_sum / static_cast<double>(n_dev);
    }
    state.metrics.push_back(rm);
  }
  return state;
}

TrainState run_scfl(const Dataset& train, const Dataset& test, const DevicePartition& part,
                    const std::vector<DeviceProfile>& devices, const ChannelModel& ch,
                    const SimConfig& cfg, Seed master_seed) {
  return run_framework(Framework::scfl, train, test, part, devices, ch, cfg, master_seed);
}

TrainState run_baseline(Framework kind, const Dataset& train, const Dataset& test,
                        const DevicePartition& part, const std::vector<DeviceProfile>& devices,
                        const ChannelModel& ch, const SimConfig& cfg, Seed master_seed) {
  return run_framework(kind, train, test, part, devices, ch, cfg, master_seed);
}

}  // namespace scfl
