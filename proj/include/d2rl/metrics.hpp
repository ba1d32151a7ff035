#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace d2rl {

struct MetricRecord {
  std::size_t epoch = 0;  // 1-based
  double mean_sum_rate = 0.0;
  double mean_reward = 0.0;
  double ma_reward = 0.0;
  double chi = 0.0;
  std::size_t substitutions = 0;
  double critic_loss = 0.0;
  double actor_loss = 0.0;
  double state_loss = 0.0;
  bool updated = false;
  std::vector<double> grad_weight;  // per actor layer
  std::vector<double> grad_bias;
  double epoch_seconds = 0.0;
  double cumulative_seconds = 0.0;
};

// Metric CSV columns, fixed for every variant:
// epoch, mean_sum_rate, mean_reward, ma_reward, chi, substitutions,
// critic_loss, actor_loss, state_loss, updated, grad_w_1..n, grad_b_1..n.
// Wall-clock time goes to a separate timing CSV so the metric file is a pure
// function of the seed.
std::vector<std::string> metric_columns(std::size_t layers);
std::string metric_header(std::size_t layers);
std::string metric_row(const MetricRecord& r, std::size_t layers);

std::string timing_header();
std::string timing_row(const MetricRecord& r);

// "<dir>/<stem>.timing.csv" for a metric CSV "<dir>/<stem>.csv".
std::filesystem::path timing_path(const std::filesystem::path& metric_csv);

// Mean of the trailing `window` values (fewer at the start).
std::vector<double> moving_average(std::span<const double> values, std::size_t window);

// First 1-based epoch whose full trailing window mean reaches `level` times
// the plateau mean (mean of the last plateau_fraction of the run). Empty when
// the run is shorter than the window or the plateau is not positive.
std::optional<std::size_t> convergence_epoch(std::span<const double> sum_rates,
                                             std::size_t window, double plateau_fraction = 0.2,
                                             double level = 0.95);

// Parsed numeric CSV. Lines beginning with '#' are failure markers.
struct CsvTable {
  std::vector<std::string> columns;
  std::vector<std::vector<double>> rows;
  std::vector<std::string> markers;

  std::size_t column_index(const std::string& name) const;  // throws naming the column
  std::vector<double> column(const std::string& name) const;
  bool has_column(const std::string& name) const;
  bool failed() const { return !markers.empty(); }
};

CsvTable read_csv(const std::filesystem::path& path);
CsvTable parse_csv(const std::string& text);

// Number of grad_w_* columns in a metric table.
std::size_t gradient_layers(const CsvTable& t);

}  // namespace d2rl
