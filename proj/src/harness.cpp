#include "scfl/harness.hpp"

#include "scfl/analysis.hpp"
#include "scfl/csv.hpp"
#include "scfl/privacy.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <stdexcept>

namespace scfl {

namespace {

namespace fs = std::filesystem;

constexpr Seed kSweepTag = 60;

void write_text(const std::string& path, const std::string& text) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("harness: cannot write '" + path + "'");
  out << text;
}

void write_metrics_csv(const std::string& path, const std::vector<RoundMetrics>& metrics) {
  csv::Table t;
  t.header = {"round", "k_time_s", "train_loss", "test_loss", "test_accuracy", "arrived_count",
              "mean_batch"};
  for (const auto& m : metrics) {
    t.rows.push_back({static_cast<double>(m.round), m.time_s, m.train_loss, m.test_loss,
                      m.test_accuracy, static_cast<double>(m.arrived_count), m.mean_batch});
  }
  csv::write(path, t);
}

void write_manifest(const std::string& path, const ExperimentConfig& cfg, Seed master_seed,
                    const Experiment& exp) {
  nlohmann::json m;
  m["master_seed"] = master_seed;
  m["streams"]["dataset"] = derive_seed(master_seed, 50);
  m["streams"]["partition"] = derive_seed(master_seed, 51);
  m["streams"]["fleet"] = derive_seed(master_seed, 52);
  m["streams"]["training_root"] = exp.train_seed;
  m["streams"]["model_init"] = init_stream_seed(exp.train_seed);
  nlohmann::json coding = nlohmann::json::array();
  for (Index i = 0; i < exp.partition.device_count(); ++i)
    coding.push_back(coding_stream_seed(exp.train_seed, i));
  m["streams"]["coding_per_device"] = coding;
  m["streams"]["round_per_entity"] =
      "round_stream_seed(training_root, round, entity); server entity 0, device i entity i + 1";
  m["workers"] = cfg.workers;
  write_text(path, m.dump(2) + "\n");
}

double phi_radius(const TrainState& state, const Matrix& w_opt) {
  double radius = std::max(w_opt.norm(), state.model.norm());
  for (const auto& w : state.model_log) radius = std::max(radius, w.norm());
  return radius * 1.05 + 1e-9;
}

}  // namespace

SweepAxis sweep_axis_from_name(const std::string& name) {
  if (name == "tau") return SweepAxis::tau;
  if (name == "straggler_ratio") return SweepAxis::straggler_ratio;
  if (name == "coded_count_c" || name == "c") return SweepAxis::coded_count_c;
  if (name == "sigma2") return SweepAxis::sigma2;
  if (name == "lambda") return SweepAxis::lambda;
  if (name == "total_reward") return SweepAxis::total_reward;
  throw std::invalid_argument("unknown sweep axis '" + name + "'");
}

std::string sweep_axis_name(SweepAxis axis) {
  switch (axis) {
    case SweepAxis::tau: return "tau";
    case SweepAxis::straggler_ratio: return "straggler_ratio";
    case SweepAxis::coded_count_c: return "coded_count_c";
    case SweepAxis::sigma2: return "sigma2";
    case SweepAxis::lambda: return "lambda";
    case SweepAxis::total_reward: return "total_reward";
  }
  return "?";
}

RunSummary run_experiment_at(const ExperimentConfig& cfg_in, const std::string& dir,
                             Seed master_seed, Framework kind,
                             const std::vector<double>* sigma2_override) {
  ExperimentConfig cfg = cfg_in;
  cfg.master_seed = master_seed;
  Experiment exp = build_experiment(cfg);
  if (sigma2_override) {
    if (sigma2_override->size() != exp.sim.sigma2s.size())
      throw std::invalid_argument("run_experiment_at: sigma2 override length mismatch");
    exp.sim.sigma2s = *sigma2_override;
  }

  fs::create_directories(dir);
  write_text(fs::path(dir) / "config_echo.json", cfg.raw.dump(2) + "\n");
  write_manifest(fs::path(dir) / "manifest.json", cfg, master_seed, exp);

  const TrainState state = run_framework(kind, exp.train, exp.test, exp.partition, exp.devices,
                                         exp.channel, exp.sim, exp.train_seed);
  write_metrics_csv(fs::path(dir) / "metrics.csv", state.metrics);

  RunSummary sum;
  sum.run_dir = dir;
  sum.kind = kind;
  sum.seed = master_seed;
  const Matrix final = final_model(state, kind);
  sum.final_train_loss = loss(exp.train, final);
  sum.final_test_loss = loss(exp.test, final);
  sum.final_test_accuracy = exp.sim.classification
                                ? accuracy(exp.test.features, exp.test.labels, final)
                                : std::numeric_limits<double>::quiet_NaN();

  const OptimalSolution opt = solve_optimal(exp.train);
  const double f_opt = loss(exp.train, opt.w);
  sum.gap = sum.final_train_loss - f_opt;
  Matrix w0;
  {
    Rng init(init_stream_seed(exp.train_seed));
    w0 = normal_matrix(init, exp.train.feature_dim(), exp.train.label_dim(), exp.sim.init_scale);
  }
  sum.initial_gap = loss(exp.train, w0) - f_opt;

  // Analytical quantities at the realized run.
  const ProblemConstants consts = estimate_constants(exp.train, exp.partition, phi_radius(state, opt.w));
  std::vector<Index> batches, sizes;
  for (const auto& r : exp.partition.ranges) {
    sizes.push_back(r.size);
    if (exp.sim.mode == BatchMode::adaptive) {
      batches.push_back(1);  // worst admissible batch keeps rho1 an upper bound
    } else {
      batches.push_back(exp.sim.device_batch > 0 ? exp.sim.device_batch : r.size);
    }
  }
  sum.rho1 = rho1(consts, exp.arrival_p, batches, sizes, exp.sim.tau);
  sum.rho2 = rho2(consts, exp.sim.sigma2s, exp.sim.coded_count, exp.train.samples(),
                  exp.train.feature_dim(), exp.train.label_dim(), exp.sim.tau);
  VarianceBound vb{sum.rho1, sum.rho2};
  sum.rho = vb.rho();
  sum.theorem1 = theorem1_bound(consts, vb, [&](Index k) { return exp.sim.schedule(k); },
                                exp.sim.rounds > 0 ? exp.sim.rounds : 1, w0, opt.w);

  // Per-device privacy budgets for the configured noise levels.
  csv::Table priv;
  priv.header = {"device", "h2", "sigma2", "epsilon_bits"};
  std::vector<PrivacyProfile> profiles;
  for (Index i = 0; i < exp.partition.device_count(); ++i) {
    PrivacyProfile p;
    p.h2 = h_value(exp.partition.features_of(exp.train, i)).second;
    p.coded_count = exp.sim.coded_count;
    p.sigma2 = exp.sim.sigma2s[static_cast<std::size_t>(i)];
    p.epsilon = epsilon(p.h2, p.coded_count, p.sigma2);
    profiles.push_back(p);
    sum.epsilon_bits.push_back(p.epsilon.bits);
    priv.rows.push_back({static_cast<double>(i), p.h2, p.sigma2, p.epsilon.bits});
  }
  sum.epsilon_system_bits = system_budget(profiles).bits;
  csv::write(fs::path(dir) / "privacy.csv", priv);

  // summary.csv keeps a string first column; emit it manually.
  {
    std::ofstream out(fs::path(dir) / "summary.csv");
    out << "quantity,value\n";
    auto row = [&](const std::string& q, double v) { out << q << ',' << csv::format_double(v) << '\n'; };
    row("final_train_loss", sum.final_train_loss);
    row("final_test_loss", sum.final_test_loss);
    row("final_test_accuracy", sum.final_test_accuracy);
    row("optimality_gap", sum.gap);
    row("initial_gap", sum.initial_gap);
    row("rho1", sum.rho1);
    row("rho2", sum.rho2);
    row("rho", sum.rho);
    row("theorem1_bound", sum.theorem1);
    row("epsilon_system_bits", sum.epsilon_system_bits);
    row("smoothness_L", exp.smoothness);
    row("bandwidth_hz", exp.channel.bandwidth_hz);
  }

  // Bound report: the gap bound next to the measured gap; the variance
  // bounds are analytic inputs to it and carry no in-run measurement.
  {
    const double nan = std::numeric_limits<double>::quiet_NaN();
    std::ofstream out(fs::path(dir) / "bounds.csv");
    out << "quantity,value,empirical,ratio\n";
    auto row = [&](const std::string& q, double value, double empirical, double ratio) {
      out << q << ',' << csv::format_double(value) << ',' << csv::format_double(empirical) << ','
          << csv::format_double(ratio) << '\n';
    };
    row("theorem1_gap_bound", sum.theorem1, sum.gap,
        sum.theorem1 != 0 ? sum.gap / sum.theorem1 : nan);
    row("rho1", sum.rho1, nan, nan);
    row("rho2", sum.rho2, nan, nan);
    row("rho", sum.rho, nan, nan);
  }
  return sum;
}

RunSummary run_experiment(const ExperimentConfig& cfg) {
  return run_experiment_at(cfg, cfg.output_dir, cfg.master_seed, Framework::scfl);
}

namespace {

struct Stats {
  double mean = 0, sd = 0;
};

Stats mean_sd(const std::vector<double>& xs) {
  Stats st;
  if (xs.empty()) return st;
  for (double x : xs) st.mean += x;
  st.mean /= static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double acc = 0;
    for (double x : xs) acc += (x - st.mean) * (x - st.mean);
    st.sd = std::sqrt(acc / static_cast<double>(xs.size() - 1));
  }
  return st;
}

ExperimentConfig apply_axis(const ExperimentConfig& base, SweepAxis axis, double value) {
  ExperimentConfig cfg = base;
  switch (axis) {
    case SweepAxis::tau:
      cfg.training.tau = static_cast<Index>(value);
      break;
    case SweepAxis::straggler_ratio:
      cfg.system.straggler_ratio = value;
      break;
    case SweepAxis::coded_count_c:
      cfg.coding.c = static_cast<Index>(value);
      break;
    case SweepAxis::sigma2:
      cfg.coding.uniform = true;
      cfg.coding.sigma2_uniform = value;
      cfg.coding.sigma2s.clear();
      break;
    case SweepAxis::lambda:
      cfg.incentive.lambda = value;
      break;
    case SweepAxis::total_reward:
      break;  // handled at run time via the Stackelberg response
  }
  return cfg;
}

}  // namespace

std::vector<SweepRow> run_sweep(const ExperimentConfig& cfg, const SweepSpec& sweep) {
  if (sweep.values.empty()) throw std::invalid_argument("run_sweep: empty value list");
  if (sweep.repetitions < 1) throw std::invalid_argument("run_sweep: repetitions must be >= 1");

  fs::create_directories(cfg.output_dir);
  csv::Table details;
  details.header = {"axis_value", "rep", "seed", "final_train_loss", "final_test_loss", "gap"};
  nlohmann::json failures = nlohmann::json::array();

  std::vector<SweepRow> rows;
  for (double value : sweep.values) {
    const ExperimentConfig point_cfg = apply_axis(cfg, sweep.axis, value);
    std::vector<double> train_losses, test_losses, gaps;
    for (int rep = 0; rep < sweep.repetitions; ++rep) {
      const Seed seed = derive_seed(cfg.master_seed, kSweepTag, static_cast<Seed>(rep));
      const std::string dir = (fs::path(cfg.output_dir) /
                               (sweep_axis_name(sweep.axis) + "_" + csv::format_double(value)) /
                               ("rep_" + std::to_string(rep)))
                                  .string();
      try {
        std::optional<std::vector<double>> sigma_override;
        if (sweep.axis == SweepAxis::lambda) {
          const Experiment exp = build_experiment([&] {
            ExperimentConfig c = point_cfg;
            c.master_seed = seed;
            return c;
          }());
          const auto econ = build_econ(point_cfg, exp);
          const auto sol = design_contract(econ, value, default_gamma());
          std::vector<double> sig;
          for (const auto& item : sol.contract.items) sig.push_back(item.sigma2);
          sigma_override = std::move(sig);
        } else if (sweep.axis == SweepAxis::total_reward) {
          const Experiment exp = build_experiment([&] {
            ExperimentConfig c = point_cfg;
            c.master_seed = seed;
            return c;
          }());
          const auto econ = build_econ(point_cfg, exp);
          const auto res = stackelberg_response(econ, value, default_gamma());
          std::vector<double> sig;
          for (const auto& item : res.allocation.items) sig.push_back(item.sigma2);
          sigma_override = std::move(sig);
        }
        const RunSummary sum = run_experiment_at(point_cfg, dir, seed, Framework::scfl,
                                                 sigma_override ? &*sigma_override : nullptr);
        train_losses.push_back(sum.final_train_loss);
        test_losses.push_back(sum.final_test_loss);
        gaps.push_back(sum.gap);
        details.rows.push_back({value, static_cast<double>(rep), static_cast<double>(seed),
                                sum.final_train_loss, sum.final_test_loss, sum.gap});
      } catch (const std::exception& e) {
        nlohmann::json f;
        f["axis_value"] = value;
        f["rep"] = rep;
        f["error"] = e.what();
        failures.push_back(f);
      }
    }
    SweepRow row;
    row.value = value;
    row.seeds = static_cast<int>(train_losses.size());
    const Stats tr = mean_sd(train_losses), te = mean_sd(test_losses), gp = mean_sd(gaps);
    row.mean_train_loss = tr.mean;
    row.sd_train_loss = tr.sd;
    row.mean_test_loss = te.mean;
    row.sd_test_loss = te.sd;
    row.mean_gap = gp.mean;
    row.sd_gap = gp.sd;
    rows.push_back(row);
  }

  csv::write(fs::path(cfg.output_dir) / "details.csv", details);
  csv::Table agg;
  agg.header = {"axis_value", "seeds", "mean_train_loss", "sd_train_loss", "mean_test_loss",
                "sd_test_loss", "mean_gap", "sd_gap"};
  for (const auto& r : rows)
    agg.rows.push_back({r.value, static_cast<double>(r.seeds), r.mean_train_loss, r.sd_train_loss,
                        r.mean_test_loss, r.sd_test_loss, r.mean_gap, r.sd_gap});
  csv::write(fs::path(cfg.output_dir) / "aggregate.csv", agg);
  if (!failures.empty())
    write_text(fs::path(cfg.output_dir) / "failures.json", failures.dump(2) + "\n");
  return rows;
}

std::vector<CompareRow> compare_baselines(const ExperimentConfig& cfg,
                                          const std::vector<Framework>& kinds, int repetitions) {
  if (kinds.empty()) throw std::invalid_argument("compare_baselines: no frameworks");
  if (repetitions < 1) throw std::invalid_argument("compare_baselines: repetitions must be >= 1");

  fs::create_directories(cfg.output_dir);
  std::vector<CompareRow> rows;
  for (Framework kind : kinds) {
    for (int rep = 0; rep < repetitions; ++rep) {
      const Seed seed = derive_seed(cfg.master_seed, kSweepTag, static_cast<Seed>(rep));
      const std::string dir =
          (fs::path(cfg.output_dir) / (framework_name(kind) + "_rep" + std::to_string(rep))).string();
      const RunSummary sum = run_experiment_at(cfg, dir, seed, kind);
      rows.push_back({kind, seed, sum.final_train_loss, sum.final_test_loss, sum.gap});
    }
  }

  {
    std::ofstream out(fs::path(cfg.output_dir) / "compare.csv");
    out << "framework,rep,seed,final_train_loss,final_test_loss,gap\n";
    int rep = 0;
    std::size_t idx = 0;
    for (Framework kind : kinds) {
      for (rep = 0; rep < repetitions; ++rep, ++idx) {
        const auto& r = rows[idx];
        out << framework_name(kind) << ',' << rep << ',' << r.seed << ','
            << csv::format_double(r.final_train_loss) << ',' << csv::format_double(r.final_test_loss)
            << ',' << csv::format_double(r.gap) << '\n';
      }
    }
  }
  return rows;
}

}  // namespace scfl
