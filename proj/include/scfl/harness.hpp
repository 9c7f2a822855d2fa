#pragma once

#include "scfl/config.hpp"
#include "scfl/training.hpp"

#include <optional>
#include <string>
#include <vector>

namespace scfl {

struct RunSummary {
  std::string run_dir;
  Framework kind = Framework::scfl;
  Seed seed = 0;
  double final_train_loss = 0;
  double final_test_loss = 0;
  double final_test_accuracy = 0;
  double gap = 0;          // f(final) - f(W*) on the training objective
  double initial_gap = 0;  // f(W_0) - f(W*)
  double rho1 = 0, rho2 = 0, rho = 0;
  double theorem1 = 0;
  double epsilon_system_bits = 0;
  std::vector<double> epsilon_bits;  // per device
};

// Runs one deterministic experiment into `dir`: config echo, per-round
// metrics CSV, per-device privacy CSV, summary CSV and a seed manifest.
RunSummary run_experiment_at(const ExperimentConfig& cfg, const std::string& dir, Seed master_seed,
                             Framework kind = Framework::scfl,
                             const std::vector<double>* sigma2_override = nullptr);

// cfg.output_dir, cfg.master_seed, SCFL.
RunSummary run_experiment(const ExperimentConfig& cfg);

enum class SweepAxis { tau, straggler_ratio, coded_count_c, sigma2, lambda, total_reward };

SweepAxis sweep_axis_from_name(const std::string& name);
std::string sweep_axis_name(SweepAxis axis);

struct SweepSpec {
  SweepAxis axis = SweepAxis::sigma2;
  std::vector<double> values;
  int repetitions = 1;
};

struct SweepRow {
  double value = 0;
  int seeds = 0;
  double mean_train_loss = 0, sd_train_loss = 0;
  double mean_test_loss = 0, sd_test_loss = 0;
  double mean_gap = 0, sd_gap = 0;
};

// One row per axis value, aggregated over seed repetitions; per-seed rows are
// kept in details.csv and failed points in failures.json.
std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep);

struct CompareRow {
  Framework kind = Framework::scfl;
  Seed seed = 0;
  double final_train_loss = 0;
  double final_test_loss = 0;
  double gap = 0;
};

// Runs each framework under identical seeds and time budget; emits
// per-framework time series and a final-metric table.
std::vector<CompareRow> compare_baselines(const ExperimentConfig& cfg,
                                          const std::vector<Framework>& kinds, int repetitions);

}  // namespace scfl
