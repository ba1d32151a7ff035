#include "d2rl/metrics.hpp"

#include <charconv>
#include <fstream>
#include <iomanip>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace d2rl {

std::vector<std::string> metric_columns(std::size_t layers) {
  std::vector<std::string> cols{"epoch",       "mean_sum_rate", "mean_reward", "ma_reward",
                                "chi",         "substitutions", "critic_loss", "actor_loss",
                                "state_loss",  "updated"};
  for (std::size_t i = 1; i <= layers; ++i) cols.push_back("grad_w_" + std::to_string(i));
  for (std::size_t i = 1; i <= layers; ++i) cols.push_back("grad_b_" + std::to_string(i));
  return cols;
}

namespace {

std::string join(const std::vector<std::string>& parts) {
  std::string out;
  for (std::size_t i = 0; i < parts.size(); ++i) {
    if (i > 0) out += ',';
    out += parts[i];
  }
  return out;
}

// Shortest text that parses back to the same double.
std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

}  // namespace

std::string metric_header(std::size_t layers) { return join(metric_columns(layers)); }

std::string metric_row(const MetricRecord& r, std::size_t layers) {
  std::vector<std::string> f{std::to_string(r.epoch), num(r.mean_sum_rate), num(r.mean_reward),
                             num(r.ma_reward),        num(r.chi), std::to_string(r.substitutions),
                             num(r.critic_loss),      num(r.actor_loss),  num(r.state_loss),
                             r.updated ? "1" : "0"};
  for (std::size_t i = 0; i < layers; ++i) f.push_back(num(i < r.grad_weight.size() ? r.grad_weight[i] : 0.0));
  for (std::size_t i = 0; i < layers; ++i) f.push_back(num(i < r.grad_bias.size() ? r.grad_bias[i] : 0.0));
  return join(f);
}

std::string timing_header() { return "epoch,epoch_seconds,cumulative_seconds"; }

std::string timing_row(const MetricRecord& r) {
  return std::to_string(r.epoch) + "," + num(r.epoch_seconds) + "," + num(r.cumulative_seconds);
}

std::filesystem::path timing_path(const std::filesystem::path& metric_csv) {
  auto p = metric_csv;
  p.replace_extension();
  p += ".timing.csv";
  return p;
}

std::vector<double> moving_average(std::span<const double> values, std::size_t window) {
  if (window == 0) throw std::invalid_argument("moving_average: window must be >= 1");
  std::vector<double> out(values.size());
  double running = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    running += values[i];
    if (i >= window) running -= values[i - window];
    const std::size_t n = std::min(i + 1, window);
    out[i] = running / static_cast<double>(n);
  }
  return out;
}

std::optional<std::size_t> convergence_epoch(std::span<const double> sum_rates,
                                             std::size_t window, double plateau_fraction,
                                             double level) {
  const std::size_t n = sum_rates.size();
  if (n == 0 || window == 0 || window > n) return std::nullopt;
  const std::size_t tail = std::max<std::size_t>(
      1, static_cast<std::size_t>(plateau_fraction * static_cast<double>(n)));
  const double plateau =
      std::accumulate(sum_rates.end() - static_cast<std::ptrdiff_t>(tail), sum_rates.end(), 0.0) /
      static_cast<double>(tail);
  if (!(plateau > 0.0)) return std::nullopt;
  double running = std::accumulate(sum_rates.begin(), sum_rates.begin() + static_cast<std::ptrdiff_t>(window), 0.0);
  for (std::size_t end = window;; ++end) {
    // Compare sums rather than means: the scale cancels exactly.
    if (running >= level * plateau * static_cast<double>(window)) return end;
    if (end == n) break;
    running += sum_rates[end] - sum_rates[end - window];
  }
  return std::nullopt;
}

std::size_t CsvTable::column_index(const std::string& name) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i] == name) return i;
  }
  throw std::runtime_error("CSV is missing column '" + name + "'");
}

bool CsvTable::has_column(const std::string& name) const {
  for (const auto& c : columns) {
    if (c == name) return true;
  }
  return false;
}

std::vector<double> CsvTable::column(const std::string& name) const {
  const std::size_t k = column_index(name);
  std::vector<double> out;
  out.reserve(rows.size());
  for (const auto& r : rows) out.push_back(r.at(k));
  return out;
}

CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  std::istringstream in(text);
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    if (line.front() == '#') {
      t.markers.push_back(line);
      continue;
    }
    std::vector<std::string> fields;
    std::stringstream ss(line);
    std::string f;
    while (std::getline(ss, f, ',')) fields.push_back(f);
    if (header) {
      t.columns = std::move(fields);
      header = false;
      continue;
    }
    if (fields.size() != t.columns.size()) {
      throw std::runtime_error("CSV row has " + std::to_string(fields.size()) + " fields, header has " +
                               std::to_string(t.columns.size()));
    }
    std::vector<double> row;
    for (const auto& s : fields) {
      double v = 0.0;
      const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
      if (ec != std::errc() || ptr != s.data() + s.size()) {
        throw std::runtime_error("CSV field '" + s + "' is not numeric");
      }
      row.push_back(v);
    }
    t.rows.push_back(std::move(row));
  }
  if (t.columns.empty()) throw std::runtime_error("CSV is empty");
  return t;
}

CsvTable read_csv(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_csv(buf.str());
}

std::size_t gradient_layers(const CsvTable& t) {
  std::size_t n = 0;
  while (t.has_column("grad_w_" + std::to_string(n + 1))) ++n;
  return n;
}

}  // namespace d2rl
