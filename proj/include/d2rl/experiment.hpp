#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "d2rl/config.hpp"
#include "d2rl/metrics.hpp"

namespace d2rl {

struct RunResult {
  std::vector<MetricRecord> records;
  std::optional<std::size_t> convergence;
  bool failed = false;
  std::string failure;
  std::filesystem::path metrics_csv;
  std::filesystem::path timing_csv;
  std::filesystem::path checkpoint;
};

// Train for cfg.epochs epochs. Writes <out>/<name>.csv (metrics),
// <out>/<name>.timing.csv, <out>/<name>.config and <out>/<name>.ckpt. A
// divergence stops the run and appends a "# failed: ..." marker line.
RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         const std::string& name = "run");

struct SweepCell {
  std::string variant;
  bool baseline = false;  // state exploration off
  double max_substitute = 0.0;
  double substitute_rate = 0.0;
  std::filesystem::path csv;
};

// Cells for every (variant, M, eta) plus one no-exploration baseline per
// variant, with their CSV paths under out_dir.
std::vector<SweepCell> plan_sweep(const std::vector<std::string>& variants,
                                  const std::vector<double>& m_grid,
                                  const std::vector<double>& eta_grid,
                                  const std::filesystem::path& out_dir);

struct SweepResult {
  std::vector<SweepCell> cells;
  std::vector<std::string> errors;  // one per failed cell
  std::filesystem::path summary;
};

// Runs every planned cell on up to `workers` threads, then writes
// <out>/summary.csv from the cell CSVs alone.
SweepResult run_sweep(const ExperimentConfig& base, const std::vector<std::string>& variants,
                      const std::vector<double>& m_grid, const std::vector<double>& eta_grid,
                      const std::filesystem::path& out_dir, std::size_t workers);

// Summary CSV text. Per cell: mean total gradient weight and bias over
// updated epochs, convergence epoch, final-plateau sum rate, and the
// improvement of the gradient sum over the variant's baseline. The best cell
// per variant (largest improvement) is flagged.
std::string summarize_sweep(const std::vector<SweepCell>& cells, std::size_t window,
                            double plateau_fraction);

// Worker count from D2RL_WORKERS, defaulting to the hardware concurrency.
std::size_t worker_count_from_env();

struct Comparison {
  std::optional<double> convergence_ratio;  // variant / baseline
  std::optional<double> total_time_ratio;   // convergence epochs x mean epoch time
  std::optional<double> epoch_time_ratio;
  double final_rate_delta = 0.0;  // variant - baseline plateau sum rate
  std::optional<std::size_t> baseline_epoch, variant_epoch;
};

Comparison compare_runs(const CsvTable& baseline, const CsvTable* baseline_timing,
                        const CsvTable& variant, const CsvTable* variant_timing,
                        std::size_t window, double plateau_fraction);

// Markdown report for two metric CSVs; timing CSVs are picked up next to
// them when present.
std::string compare_report(const std::filesystem::path& baseline_csv,
                           const std::filesystem::path& variant_csv, std::size_t window = 50,
                           double plateau_fraction = 0.2);

}  // namespace d2rl
