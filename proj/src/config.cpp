#include "scfl/config.hpp"

#include "scfl/analysis.hpp"
#include "scfl/privacy.hpp"

#include <algorithm>
#include <fstream>
#include <stdexcept>

namespace scfl {

namespace {

// Harness-level stream roots, all derived from the master seed.
constexpr Seed kDatasetTag = 50;
constexpr Seed kPartitionTag = 51;
constexpr Seed kFleetTag = 52;
constexpr Seed kTrainingTag = 53;

template <typename T>
T get_or(const nlohmann::json& j, const char* key, T fallback) {
  if (!j.contains(key)) return fallback;
  return j.at(key).get<T>();
}

std::vector<double> number_list(const nlohmann::json& j) {
  std::vector<double> v;
  for (const auto& x : j) v.push_back(x.get<double>());
  return v;
}

void parse_dataset(const nlohmann::json& j, DatasetSpec& spec) {
  const std::string kind = get_or<std::string>(j, "kind", "synthetic");
  if (kind == "synthetic") {
    spec.kind = DatasetSpec::Kind::synthetic;
    spec.m = j.at("m").get<Index>();
    spec.d = j.at("d").get<Index>();
    spec.o = get_or<Index>(j, "o", 1);
    spec.noise_std = get_or<double>(j, "noise_std", 0.0);
    spec.test_m = get_or<Index>(j, "test_m", 0);
  } else if (kind == "csv") {
    spec.kind = DatasetSpec::Kind::csv;
    spec.path = j.at("path").get<std::string>();
    spec.test_path = get_or<std::string>(j, "test_path", "");
    spec.d = j.at("d").get<Index>();
    spec.o = get_or<Index>(j, "o", 1);
    spec.normalize_features = get_or<bool>(j, "normalize", true);
  } else {
    throw std::invalid_argument("config: dataset.kind must be 'synthetic' or 'csv'");
  }
}

void parse_partition(const nlohmann::json& j, PartitionSpec& spec) {
  spec.devices = j.at("devices").get<Index>();
  const std::string kind = get_or<std::string>(j, "kind", "noniid");
  if (kind == "noniid") {
    spec.kind = PartitionSpec::Kind::noniid;
  } else if (kind == "contiguous") {
    spec.kind = PartitionSpec::Kind::contiguous;
  } else {
    throw std::invalid_argument("config: partition.kind must be 'noniid' or 'contiguous'");
  }
  spec.shards_per_device = get_or<Index>(j, "shards_per_device", 1);
}

void parse_system(const nlohmann::json& j, SystemSpec& spec) {
  spec.bandwidth_hz = get_or<double>(j, "bandwidth_hz", spec.bandwidth_hz);
  spec.noise_power_w = get_or<double>(j, "noise_power_w", spec.noise_power_w);
  spec.mean_gain = get_or<double>(j, "mean_gain", spec.mean_gain);
  spec.update_size_bits = get_or<double>(j, "update_size_bits", spec.update_size_bits);
  spec.t_download_s = get_or<double>(j, "t_download_s", spec.t_download_s);
  spec.round_deadline_s = get_or<double>(j, "round_deadline_s", spec.round_deadline_s);
  spec.n_mac = get_or<double>(j, "n_mac", 0.0);
  spec.server_mac_rate_kmacs = get_or<double>(j, "server_mac_rate_kmacs", spec.server_mac_rate_kmacs);
  const std::string mode = get_or<std::string>(j, "mode", "fixed");
  if (mode == "fixed") {
    spec.mode = BatchMode::fixed;
  } else if (mode == "adaptive") {
    spec.mode = BatchMode::adaptive;
  } else {
    throw std::invalid_argument("config: system.mode must be 'fixed' or 'adaptive'");
  }
  if (j.contains("straggler_ratio") && !j.at("straggler_ratio").is_null())
    spec.straggler_ratio = j.at("straggler_ratio").get<double>();

  if (j.contains("tx_power_dbm")) {
    const auto& t = j.at("tx_power_dbm");
    if (t.is_array()) {
      spec.fleet.tx_power_dbm = number_list(t);
    } else if (t.is_number()) {
      spec.fleet.tx_low_dbm = spec.fleet.tx_high_dbm = t.get<double>();
    } else {
      spec.fleet.tx_low_dbm = t.at("low").get<double>();
      spec.fleet.tx_high_dbm = t.at("high").get<double>();
    }
  }
  if (j.contains("mac_rate_kmacs")) {
    const auto& t = j.at("mac_rate_kmacs");
    if (t.is_array()) {
      spec.fleet.mac_rate_kmacs = number_list(t);
    } else if (t.is_number()) {
      spec.fleet.mac_scale_kmacs = t.get<double>();
      spec.fleet.mac_low = spec.fleet.mac_high = 1.0;
    } else {
      spec.fleet.mac_low = t.at("low").get<double>();
      spec.fleet.mac_high = t.at("high").get<double>();
      spec.fleet.mac_scale_kmacs = get_or<double>(t, "scale_kmacs", 1536.0);
    }
  }
}

void parse_coding(const nlohmann::json& j, CodingSpec& spec) {
  spec.c = j.at("c").get<Index>();
  if (j.contains("sigma2")) {
    const auto& s = j.at("sigma2");
    if (s.is_array()) {
      spec.sigma2s = number_list(s);
      spec.uniform = false;
    } else {
      spec.sigma2_uniform = s.get<double>();
      spec.uniform = true;
    }
  }
}

void parse_training(const nlohmann::json& j, TrainingSpec& spec) {
  spec.rounds = j.at("rounds").get<Index>();
  spec.tau = get_or<Index>(j, "tau", 1);
  spec.batch = get_or<Index>(j, "batch", 0);
  spec.server_batch = get_or<Index>(j, "server_batch", 0);
  spec.init_scale = get_or<double>(j, "init_scale", 1.0);
  spec.classification = get_or<bool>(j, "classification", false);
  if (j.contains("schedule")) {
    const auto& s = j.at("schedule");
    const std::string kind = get_or<std::string>(s, "kind", "inverse");
    if (kind == "constant") {
      spec.schedule.kind = ScheduleSpec::Kind::constant;
      spec.schedule.eta0 = s.at("eta0").get<double>();
    } else if (kind == "inverse") {
      spec.schedule.kind = ScheduleSpec::Kind::inverse;
      spec.schedule.beta = get_or<double>(s, "beta", 1.0);
      spec.schedule.scale = get_or<double>(s, "scale", 1e9);  // clamped to 0.99 beta / tau
    } else {
      throw std::invalid_argument("config: schedule.kind must be 'constant' or 'inverse'");
    }
  }
}

void parse_incentive(const nlohmann::json& j, IncentiveSpec& spec) {
  if (j.contains("mu")) {
    const auto& t = j.at("mu");
    if (t.is_array()) {
      spec.mu = number_list(t);
    } else {
      spec.mu_base = get_or<double>(t, "base", 1.0);
      spec.mu_step = get_or<double>(t, "step", 0.02);
    }
  }
  spec.lambda = get_or<double>(j, "lambda", spec.lambda);
  spec.sigma_min2 = get_or<double>(j, "sigma_min2", 0.0);
}

}  // namespace

ExperimentConfig parse_config(const nlohmann::json& j) {
  ExperimentConfig cfg;
  cfg.raw = j;
  parse_dataset(j.at("dataset"), cfg.dataset);
  parse_partition(j.at("partition"), cfg.partition);
  if (j.contains("system")) parse_system(j.at("system"), cfg.system);
  parse_coding(j.at("coding"), cfg.coding);
  parse_training(j.at("training"), cfg.training);
  if (j.contains("incentive")) parse_incentive(j.at("incentive"), cfg.incentive);
  cfg.master_seed = get_or<Seed>(j, "master_seed", 1);
  cfg.workers = get_or<int>(j, "workers", 1);
  cfg.output_dir = get_or<std::string>(j, "output_dir", "runs/out");
  return cfg;
}

ExperimentConfig load_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("config: cannot open '" + path + "'");
  nlohmann::json j = nlohmann::json::parse(in);
  return parse_config(j);
}

Experiment build_experiment(const ExperimentConfig& cfg) {
  Experiment exp;

  // Dataset.
  const Seed dataset_seed = derive_seed(cfg.master_seed, kDatasetTag);
  if (cfg.dataset.kind == DatasetSpec::Kind::synthetic) {
    const Index test_m = cfg.dataset.test_m > 0 ? cfg.dataset.test_m : cfg.dataset.m;
    // One draw for train + test so both share the underlying true model.
    const Dataset both = generate_synthetic(dataset_seed, cfg.dataset.m + test_m, cfg.dataset.d,
                                            cfg.dataset.o, cfg.dataset.noise_std);
    exp.train.features = both.features.topRows(cfg.dataset.m);
    exp.train.labels = both.labels.topRows(cfg.dataset.m);
    exp.test.features = both.features.bottomRows(test_m);
    exp.test.labels = both.labels.bottomRows(test_m);
  } else {
    exp.train = load_csv(cfg.dataset.path, cfg.dataset.d, cfg.dataset.o);
    if (cfg.dataset.normalize_features) exp.train = normalize(exp.train);
    if (!cfg.dataset.test_path.empty()) {
      exp.test = load_csv(cfg.dataset.test_path, cfg.dataset.d, cfg.dataset.o);
      if (cfg.dataset.normalize_features) exp.test = normalize(exp.test);
    } else {
      exp.test = exp.train;
    }
  }

  // Partition (the non-IID split reorders the training rows).
  if (cfg.partition.kind == PartitionSpec::Kind::noniid) {
    LabelSortSpec ls;
    ls.shards_per_device = cfg.partition.shards_per_device;
    auto [reordered, part] = partition_noniid(exp.train, cfg.partition.devices, ls,
                                              derive_seed(cfg.master_seed, kPartitionTag));
    exp.train = std::move(reordered);
    exp.partition = std::move(part);
  } else {
    exp.partition = partition_contiguous(exp.train.samples(), cfg.partition.devices);
  }

  // Fleet.
  const Index n_dev = cfg.partition.devices;
  Rng fleet_rng(derive_seed(cfg.master_seed, kFleetTag));
  const auto& fs = cfg.system.fleet;
  if (!fs.tx_power_dbm.empty() && static_cast<Index>(fs.tx_power_dbm.size()) != n_dev)
    throw std::invalid_argument("config: tx_power_dbm list length must equal devices");
  if (!fs.mac_rate_kmacs.empty() && static_cast<Index>(fs.mac_rate_kmacs.size()) != n_dev)
    throw std::invalid_argument("config: mac_rate_kmacs list length must equal devices");
  for (Index i = 0; i < n_dev; ++i) {
    DeviceProfile dev;
    const double dbm = !fs.tx_power_dbm.empty()
                           ? fs.tx_power_dbm[static_cast<std::size_t>(i)]
                           : fleet_rng.uniform(fs.tx_low_dbm, fs.tx_high_dbm);
    const double kmacs = !fs.mac_rate_kmacs.empty()
                             ? fs.mac_rate_kmacs[static_cast<std::size_t>(i)]
                             : fs.mac_scale_kmacs * fleet_rng.uniform(fs.mac_low, fs.mac_high);
    dev.tx_power_w = watts_from_dbm(dbm);
    dev.mac_rate = kmacs * 1000.0;
    dev.local_samples = exp.partition.ranges[static_cast<std::size_t>(i)].size;
    exp.devices.push_back(dev);
  }

  // Channel.
  exp.channel.bandwidth_hz = cfg.system.bandwidth_hz;
  exp.channel.noise_power_w = cfg.system.noise_power_w;
  exp.channel.mean_gain = cfg.system.mean_gain;
  exp.channel.update_size_bits = cfg.system.update_size_bits;
  exp.channel.t_download_s = cfg.system.t_download_s;
  exp.channel.round_deadline_s = cfg.system.round_deadline_s;
  exp.channel.mac_per_sample =
      cfg.system.n_mac > 0 ? cfg.system.n_mac
                           : static_cast<double>(cfg.dataset.d) * static_cast<double>(exp.train.label_dim());
  if (cfg.system.straggler_ratio) {
    const Index calib_batch = cfg.system.mode == BatchMode::adaptive ? 1 : cfg.training.batch;
    exp.channel = straggler_calibrate(*cfg.system.straggler_ratio, exp.devices, exp.channel,
                                      cfg.training.tau, calib_batch);
  }

  // Cross-field validation.
  if (cfg.training.batch > 0) {
    for (const auto& r : exp.partition.ranges)
      if (cfg.training.batch > r.size)
        throw std::invalid_argument("config: training.batch exceeds a device's local sample count");
  }

  exp.smoothness = spectral_smoothness(exp.train.features);

  exp.sim.rounds = cfg.training.rounds;
  exp.sim.tau = cfg.training.tau;
  exp.sim.schedule = make_schedule(cfg.training.schedule, cfg.training.tau, exp.smoothness);
  exp.sim.mode = cfg.system.mode;
  exp.sim.device_batch = cfg.training.batch;
  exp.sim.server_batch = cfg.training.server_batch;
  exp.sim.server_mac_rate = cfg.system.server_mac_rate_kmacs * 1000.0;
  exp.sim.coded_count = cfg.coding.c;
  exp.sim.sigma2s = cfg.coding.uniform
                        ? std::vector<double>(static_cast<std::size_t>(n_dev), cfg.coding.sigma2_uniform)
                        : cfg.coding.sigma2s;
  if (static_cast<Index>(exp.sim.sigma2s.size()) != n_dev)
    throw std::invalid_argument("config: coding.sigma2 list length must equal devices");
  exp.sim.workers = cfg.workers;
  exp.sim.log_models = true;
  exp.sim.classification = cfg.training.classification;
  exp.sim.init_scale = cfg.training.init_scale;

  exp.arrival_p = arrival_probabilities(exp.devices, exp.channel, exp.sim.tau, exp.sim.mode,
                                        exp.sim.device_batch);
  for (std::size_t i = 0; i < exp.arrival_p.size(); ++i)
    if (exp.arrival_p[i] <= 0)
      throw std::invalid_argument("config: device " + std::to_string(i) +
                                  " has zero arrival probability under this system model");

  exp.train_seed = derive_seed(cfg.master_seed, kTrainingTag);
  return exp;
}

std::vector<DeviceEcon> build_econ(const ExperimentConfig& cfg, const Experiment& exp) {
  const Index n = exp.partition.device_count();
  std::vector<DeviceEcon> econ;
  for (Index i = 0; i < n; ++i) {
    DeviceEcon dev;
    dev.mu = !cfg.incentive.mu.empty()
                 ? cfg.incentive.mu[static_cast<std::size_t>(i)]
                 : cfg.incentive.mu_base + cfg.incentive.mu_step * static_cast<double>(i + 1);
    dev.h2 = h_value(exp.partition.features_of(exp.train, i)).second;
    dev.coded_count = cfg.coding.c;
    dev.sigma_min2 = cfg.incentive.sigma_min2;
    econ.push_back(dev);
  }
  if (!cfg.incentive.mu.empty() && static_cast<Index>(cfg.incentive.mu.size()) != n)
    throw std::invalid_argument("config: incentive.mu list length must equal devices");
  std::stable_sort(econ.begin(), econ.end(),
                   [](const DeviceEcon& a, const DeviceEcon& b) { return a.mu < b.mu; });
  return econ;
}

}  // namespace scfl
