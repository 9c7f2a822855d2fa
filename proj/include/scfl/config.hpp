#pragma once

#include "scfl/data.hpp"
#include "scfl/incentive.hpp"
#include "scfl/system.hpp"
#include "scfl/training.hpp"
#include "scfl/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>
#include <vector>

namespace scfl {

struct DatasetSpec {
  enum class Kind { synthetic, csv };
  Kind kind = Kind::synthetic;
  // synthetic
  Index m = 0, d = 0, o = 1;
  double noise_std = 0;
  Index test_m = 0;  // 0 means same size as m
  // csv
  std::string path, test_path;
  bool normalize_features = true;
};

struct PartitionSpec {
  enum class Kind { noniid, contiguous };
  Kind kind = Kind::noniid;
  Index devices = 1;
  Index shards_per_device = 1;
};

// Per-device radio/compute parameters, either listed explicitly or sampled
// uniformly from a range (the per-run fleet seed fixes the draw).
struct FleetSpec {
  std::vector<double> tx_power_dbm;
  double tx_low_dbm = 15, tx_high_dbm = 25;
  std::vector<double> mac_rate_kmacs;
  double mac_low = 0.8, mac_high = 1.0, mac_scale_kmacs = 1536;
};

struct SystemSpec {
  double bandwidth_hz = 180e3;
  double noise_power_w = 1e-10;
  double mean_gain = 1e-8;
  double update_size_bits = 5e5;
  double t_download_s = 0.5;
  double round_deadline_s = 10;
  double n_mac = 0;  // 0 means d * o
  double server_mac_rate_kmacs = 15360;
  BatchMode mode = BatchMode::fixed;
  std::optional<double> straggler_ratio;  // calibrate bandwidth when set
  FleetSpec fleet;
};

struct CodingSpec {
  Index c = 0;
  std::vector<double> sigma2s;    // per device; scalar configs are broadcast
  double sigma2_uniform = 0;
  bool uniform = true;
};

struct TrainingSpec {
  Index rounds = 100;
  Index tau = 1;
  ScheduleSpec schedule;
  Index batch = 0;         // 0 = full local batch
  Index server_batch = 0;  // 0 = largest batch meeting the deadline
  double init_scale = 1.0;
  bool classification = false;
};

struct IncentiveSpec {
  std::vector<double> mu;  // empty: mu_i = mu_base + mu_step * (i + 1)
  double mu_base = 1.0;
  double mu_step = 0.02;
  double lambda = 1e3;
  double sigma_min2 = 0;
};

struct ExperimentConfig {
  DatasetSpec dataset;
  PartitionSpec partition;
  SystemSpec system;
  CodingSpec coding;
  TrainingSpec training;
  IncentiveSpec incentive;
  Seed master_seed = 1;
  int workers = 1;
  std::string output_dir = "runs/out";
  nlohmann::json raw;
};

ExperimentConfig parse_config(const nlohmann::json& j);
ExperimentConfig load_config(const std::string& path);

// A fully instantiated experiment: data generated/loaded, fleet sampled,
// channel calibrated, schedule resolved against the measured smoothness, and
// all cross-field constraints checked.
struct Experiment {
  Dataset train;
  Dataset test;
  DevicePartition partition;
  std::vector<DeviceProfile> devices;
  ChannelModel channel;
  SimConfig sim;
  std::vector<double> arrival_p;
  double smoothness = 0;
  Seed train_seed = 0;
};

Experiment build_experiment(const ExperimentConfig& cfg);

// Device economics derived from the partitioned data (h^2 of each device's
// normalized features) and the incentive spec; sorted ascending by mu.
std::vector<DeviceEcon> build_econ(const ExperimentConfig& cfg, const Experiment& exp);

}  // namespace scfl
