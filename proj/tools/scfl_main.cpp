#include "scfl/analysis.hpp"
#include "scfl/csv.hpp"
#include "scfl/harness.hpp"
#include "scfl/privacy.hpp"

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>

namespace {

using namespace scfl;

std::vector<double> parse_values(const std::string& csv_list) {
  std::vector<double> out;
  std::stringstream ss(csv_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) {
    if (!tok.empty()) out.push_back(std::stod(tok));
  }
  if (out.empty()) throw CLI::ValidationError("expected a comma-separated list of numbers");
  return out;
}

// Device econ CSV: header device,mu,h2.
std::vector<DeviceEcon> load_econ(const std::string& path, Index c, double sigma_min2) {
  const auto table = csv::read(path);
  if (table.header.size() < 3 || table.header[0] != "device" || table.header[1] != "mu" ||
      table.header[2] != "h2")
    throw std::runtime_error("econ csv: expected header device,mu,h2");
  std::vector<DeviceEcon> econ;
  for (const auto& row : table.rows) {
    DeviceEcon dev;
    dev.mu = row[1];
    dev.h2 = row[2];
    dev.coded_count = c;
    dev.sigma_min2 = sigma_min2;
    econ.push_back(dev);
  }
  std::stable_sort(econ.begin(), econ.end(),
                   [](const DeviceEcon& a, const DeviceEcon& b) { return a.mu < b.mu; });
  return econ;
}

int cmd_simulate(const std::string& config_path) {
  const auto cfg = load_config(config_path);
  const auto sum = run_experiment(cfg);
  std::cout << "run dir: " << sum.run_dir << "\n"
            << "final train loss: " << sum.final_train_loss << "\n"
            << "final test loss:  " << sum.final_test_loss << "\n"
            << "optimality gap:   " << sum.gap << "\n"
            << "epsilon (bits):   " << sum.epsilon_system_bits << "\n";
  return 0;
}

int cmd_sweep(const std::string& config_path, const std::string& axis, const std::string& values,
              int seeds) {
  auto cfg = load_config(config_path);
  SweepSpec spec;
  spec.axis = sweep_axis_from_name(axis);
  spec.values = parse_values(values);
  spec.repetitions = seeds;
  const auto rows = run_sweep(cfg, spec);
  std::cout << "axis=" << axis << "\n";
  for (const auto& r : rows)
    std::cout << "  " << r.value << ": test loss " << r.mean_test_loss << " +- " << r.sd_test_loss
              << " (" << r.seeds << " seeds)\n";
  std::cout << "aggregate: " << (std::filesystem::path(cfg.output_dir) / "aggregate.csv").string()
            << "\n";
  return 0;
}

int cmd_compare(const std::string& config_path, const std::string& kinds_list, int seeds) {
  auto cfg = load_config(config_path);
  std::vector<Framework> kinds;
  std::stringstream ss(kinds_list);
  std::string tok;
  while (std::getline(ss, tok, ',')) kinds.push_back(framework_from_name(tok));
  const auto rows = compare_baselines(cfg, kinds, seeds);
  for (const auto& r : rows)
    std::cout << framework_name(r.kind) << " seed " << r.seed << ": test loss "
              << r.final_test_loss << "\n";
  std::cout << "table: " << (std::filesystem::path(cfg.output_dir) / "compare.csv").string() << "\n";
  return 0;
}

int cmd_privacy(const std::string& data_path, const std::string& sigma_list, Index c,
                const std::string& out_path) {
  const auto sigmas = parse_values(sigma_list);
  // Column counts come from the header: f0..f{d-1}, y0..y{o-1}.
  const auto table = csv::read(data_path);
  Index d = 0, o = 0;
  for (const auto& name : table.header) {
    if (!name.empty() && name[0] == 'f') ++d;
    if (!name.empty() && name[0] == 'y') ++o;
  }
  if (d == 0 || o == 0) throw std::runtime_error("privacy: header must follow f0..f{d-1},y0..y{o-1}");
  Dataset ds = load_csv(data_path, d, o);
  ds = normalize(ds);

  const Index n = static_cast<Index>(sigmas.size());
  const auto part = partition_contiguous(ds.samples(), n);

  csv::Table out;
  out.header = {"device", "h2", "sigma2", "epsilon_bits"};
  for (Index i = 0; i < n; ++i) {
    const double h2 = h_value(part.features_of(ds, i)).second;
    const auto eps = epsilon(h2, c, sigmas[static_cast<std::size_t>(i)]);
    out.rows.push_back({static_cast<double>(i), h2, sigmas[static_cast<std::size_t>(i)],
                        eps.unbounded ? std::numeric_limits<double>::infinity() : eps.bits});
    std::cout << "device " << i << ": h2=" << h2 << " sigma2=" << sigmas[static_cast<std::size_t>(i)]
              << " epsilon=" << (eps.unbounded ? std::string("unbounded")
                                               : std::to_string(eps.bits) + " bits")
              << "\n";
  }
  csv::write(out_path, out);
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

int cmd_contract(const std::string& econ_path, double lambda, Index c, double sigma_min2,
                 const std::string& out_path) {
  const auto econ = load_econ(econ_path, c, sigma_min2);
  const auto sol = design_contract(econ, lambda, default_gamma());

  csv::Table out;
  out.header = {"device", "epsilon_bits", "sigma2", "reward", "device_utility"};
  for (std::size_t i = 0; i < sol.contract.items.size(); ++i) {
    const auto& item = sol.contract.items[i];
    out.rows.push_back({static_cast<double>(i), item.epsilon_bits, item.sigma2, item.reward,
                        device_utility(item.epsilon_bits, item.reward, econ[i].mu)});
  }
  csv::write(out_path, out);
  {
    std::ofstream summary(out_path + ".summary.csv");
    summary << "server_utility,total_reward\n"
            << csv::format_double(sol.server_utility) << ','
            << csv::format_double(sol.total_reward) << '\n';
  }
  std::cout << "server_utility," << csv::format_double(sol.server_utility) << "\n"
            << "total_reward," << csv::format_double(sol.total_reward) << "\n"
            << "wrote " << out_path << "\n";
  return 0;
}

int cmd_lambda_table(const std::string& econ_path, const std::string& grid, Index c,
                     double sigma_min2, const std::string& out_path) {
  const auto econ = load_econ(econ_path, c, sigma_min2);
  const auto rows = lambda_table(econ, parse_values(grid), default_gamma());
  csv::Table out;
  out.header = {"lambda", "total_reward", "sigma2"};
  for (const auto& r : rows) out.rows.push_back({r.lambda, r.total_reward, r.total_sigma2});
  csv::write(out_path, out);
  for (const auto& r : rows)
    std::cout << "lambda " << r.lambda << ": total reward " << r.total_reward << ", sigma2 "
              << r.total_sigma2 << "\n";
  std::cout << "wrote " << out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Stochastic coded federated learning simulator"};
  app.require_subcommand(1);

  std::string config_path, axis, values, kinds = "scfl,fedavg,codedfedl,dpcfl";
  std::string data_path, sigma_list, econ_path, out_path;
  int seeds = 1;
  double lambda = 1e3, sigma_min2 = 0;
  scfl::Index c = 0;

  auto* simulate = app.add_subcommand("simulate", "run one experiment from a config file");
  simulate->add_option("config", config_path, "JSON config")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "sweep one experiment axis");
  sweep->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  sweep->add_option("--axis", axis, "tau|straggler_ratio|coded_count_c|sigma2|lambda|total_reward")
      ->required();
  sweep->add_option("--values", values, "comma-separated axis values")->required();
  sweep->add_option("--seeds", seeds, "seed repetitions per value");

  auto* compare = app.add_subcommand("compare", "run frameworks under identical seeds");
  compare->add_option("config", config_path)->required()->check(CLI::ExistingFile);
  compare->add_option("--kinds", kinds, "comma-separated: scfl,fedavg,codedfedl,dpcfl");
  compare->add_option("--seeds", seeds, "paired seed repetitions");

  auto* privacy = app.add_subcommand("privacy", "per-device MI-DP budgets for a dataset CSV");
  privacy->add_option("data", data_path)->required()->check(CLI::ExistingFile);
  privacy->add_option("--sigma", sigma_list, "comma-separated sigma_i^2, one per device")->required();
  privacy->add_option("--c", c, "coded samples per device")->required();
  privacy->add_option("--out", out_path, "output CSV")->default_val("privacy.csv");

  auto* contract = app.add_subcommand("contract", "solve the contract for a device econ CSV");
  contract->add_option("econ", econ_path, "CSV with header device,mu,h2")->required()->check(CLI::ExistingFile);
  contract->add_option("--lambda", lambda, "server reward weight")->required();
  contract->add_option("--c", c, "coded samples per device")->required();
  contract->add_option("--sigma-min", sigma_min2, "minimum noise level");
  contract->add_option("--out", out_path)->default_val("contract.csv");

  auto* table = app.add_subcommand("lambda-table", "total reward vs lambda reference table");
  table->add_option("econ", econ_path)->required()->check(CLI::ExistingFile);
  table->add_option("--grid", values, "comma-separated lambda grid")->required();
  table->add_option("--c", c, "coded samples per device")->required();
  table->add_option("--sigma-min", sigma_min2, "minimum noise level");
  table->add_option("--out", out_path)->default_val("lambda_table.csv");

  CLI11_PARSE(app, argc, argv);

  try {
    if (simulate->parsed()) return cmd_simulate(config_path);
    if (sweep->parsed()) return cmd_sweep(config_path, axis, values, seeds);
    if (compare->parsed()) return cmd_compare(config_path, kinds, seeds);
    if (privacy->parsed()) return cmd_privacy(data_path, sigma_list, c, out_path);
    if (contract->parsed()) return cmd_contract(econ_path, lambda, c, sigma_min2, out_path);
    if (table->parsed()) return cmd_lambda_table(econ_path, values, c, sigma_min2, out_path);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
