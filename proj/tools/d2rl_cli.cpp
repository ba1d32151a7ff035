// Command-line front end: run, sweep, plot, compare.
#include <CLI11.hpp>

#include <cstdint>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "d2rl/config.hpp"
#include "d2rl/experiment.hpp"
#include "d2rl/plot.hpp"

namespace {

std::vector<double> parse_grid(const std::string& text) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::string> parse_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Diffusion-based DRL for full-duplex resource allocation"};
  app.require_subcommand(1);

  std::string profile = "desk";
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  app.add_option("--profile", profile, "Base profile: desk or tiny")
      ->check(CLI::IsMember({"desk", "tiny"}));
  app.add_option("--seed", seed, "Override the configured seed");
  app.add_option("--out", out_dir, "Output directory");

  std::string run_config;
  std::string run_name = "run";
  std::optional<std::size_t> epochs;
  auto* run = app.add_subcommand("run", "Train one configuration");
  run->add_option("config", run_config, "Config file (key = value)")->required();
  run->add_option("--name", run_name, "Output file stem");
  run->add_option("--epochs", epochs, "Override the epoch count");

  std::string sweep_config, m_grid, eta_grid, variants;
  auto* sweep = app.add_subcommand("sweep", "Grid over max substitute probability and rate");
  sweep->add_option("config", sweep_config, "Config file (key = value)")->required();
  sweep->add_option("--m-grid", m_grid, "Comma-separated M values")->required();
  sweep->add_option("--eta-grid", eta_grid, "Comma-separated eta values")->required();
  sweep->add_option("--variants", variants,
                    "Comma-separated reward variants (default: the configured one)");
  sweep->add_option("--epochs", epochs, "Override the epoch count");

  std::vector<std::string> plot_inputs;
  std::size_t ma_window = 100;
  auto* plot = app.add_subcommand("plot", "Write SVG figures for metric CSVs");
  plot->add_option("csv", plot_inputs, "Metric CSV files")->required();
  plot->add_option("--ma-window", ma_window, "Smoothing window, epochs");

  std::string baseline_csv, variant_csv;
  std::size_t window = 50;
  auto* compare = app.add_subcommand("compare", "Convergence and time ratios of two runs");
  compare->add_option("baseline", baseline_csv, "Baseline metric CSV")->required();
  compare->add_option("variant", variant_csv, "Variant metric CSV")->required();
  compare->add_option("--window", window, "Trailing window of the convergence test");

  CLI11_PARSE(app, argc, argv);

  try {
    auto load = [&](const std::string& path) {
      d2rl::ExperimentConfig cfg =
          d2rl::load_config(path, d2rl::profile_config(d2rl::parse_profile(profile)));
      if (seed) cfg.seed = *seed;
      if (epochs) cfg.epochs = *epochs;
      cfg.validate();
      return cfg;
    };

    if (*run) {
      const auto cfg = load(run_config);
      const auto result = d2rl::run_experiment(cfg, out_dir, run_name);
      std::cout << "metrics: " << result.metrics_csv.string() << "\n";
      std::cout << "checkpoint: " << result.checkpoint.string() << "\n";
      if (result.convergence) {
        std::cout << "convergence epoch: " << *result.convergence << "\n";
      } else {
        std::cout << "convergence epoch: not converged\n";
      }
      if (result.failed) {
        std::cerr << "run failed: " << result.failure << "\n";
        return 2;
      }
    } else if (*sweep) {
      const auto cfg = load(sweep_config);
      std::vector<std::string> names = parse_list(variants);
      if (names.empty()) names.push_back(d2rl::variant_name(cfg.agent.reward));
      const auto result = d2rl::run_sweep(cfg, names, parse_grid(m_grid), parse_grid(eta_grid),
                                          out_dir, d2rl::worker_count_from_env());
      std::cout << "summary: " << result.summary.string() << "\n";
      for (const auto& e : result.errors) std::cerr << "cell failed: " << e << "\n";
    } else if (*plot) {
      std::vector<std::filesystem::path> paths(plot_inputs.begin(), plot_inputs.end());
      for (const auto& p : d2rl::emit_plots(paths, out_dir, ma_window)) {
        std::cout << p.string() << "\n";
      }
    } else if (*compare) {
      std::cout << d2rl::compare_report(baseline_csv, variant_csv, window);
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
