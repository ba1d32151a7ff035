#include "d2rl/experiment.hpp"

#include <atomic>
#include <charconv>
#include <chrono>
#include <cstdlib>
#include <fstream>
#include <mutex>
#include <numeric>
#include <sstream>
#include <thread>

#include "d2rl/agent.hpp"
#include "d2rl/checkpoint.hpp"
#include "d2rl/errors.hpp"

namespace d2rl {

namespace {

std::string num(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  (void)ec;
  return std::string(buf, ptr);
}

double mean(std::span<const double> v) {
  if (v.empty()) return 0.0;
  return std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
}

double plateau_mean(std::span<const double> v, double fraction) {
  if (v.empty()) return 0.0;
  const std::size_t tail =
      std::max<std::size_t>(1, static_cast<std::size_t>(fraction * static_cast<double>(v.size())));
  return mean(v.subspan(v.size() - tail));
}

}  // namespace

RunResult run_experiment(const ExperimentConfig& cfg, const std::filesystem::path& out_dir,
                         const std::string& name) {
  cfg.validate();
  std::filesystem::create_directories(out_dir);
  RunResult result;
  result.metrics_csv = out_dir / (name + ".csv");
  result.timing_csv = timing_path(result.metrics_csv);
  result.checkpoint = out_dir / (name + ".ckpt");
  {
    std::ofstream conf(out_dir / (name + ".config"));
    conf << dump_config(cfg);
  }

  Rng rng(cfg.seed);
  Agent agent(cfg.env, cfg.agent, rng);
  const std::size_t layers = agent.actor().online_net().num_layers();

  std::ofstream csv(result.metrics_csv);
  std::ofstream timing(result.timing_csv);
  if (!csv || !timing) throw std::runtime_error("cannot write run output in " + out_dir.string());
  csv << metric_header(layers) << '\n';
  timing << timing_header() << '\n';

  std::vector<double> rewards;
  double cumulative = 0.0;
  for (std::size_t e = 1; e <= cfg.epochs; ++e) {
    const auto start = std::chrono::steady_clock::now();
    EpochStats s;
    try {
      s = train_epoch(agent, rng);
    } catch (const DivergenceError& err) {
      result.failed = true;
      result.failure = "epoch " + std::to_string(e) + ": " + err.what();
      csv << "# failed: " << result.failure << '\n';
      break;
    }
    const double seconds =
        std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    cumulative += seconds;
    rewards.push_back(s.mean_reward);

    MetricRecord r;
    r.epoch = e;
    r.mean_sum_rate = s.mean_sum_rate;
    r.mean_reward = s.mean_reward;
    const std::size_t w = std::min(cfg.ma_window, rewards.size());
    r.ma_reward = mean(std::span<const double>(rewards).subspan(rewards.size() - w));
    r.chi = s.chi;
    r.substitutions = s.substitutions;
    r.critic_loss = s.critic_loss;
    r.actor_loss = s.actor_loss;
    r.state_loss = s.state_loss;
    r.updated = s.updated;
    r.grad_weight = s.actor_grads.weight_abs_sum;
    r.grad_bias = s.actor_grads.bias_abs_sum;
    r.epoch_seconds = seconds;
    r.cumulative_seconds = cumulative;
    csv << metric_row(r, layers) << '\n';
    timing << timing_row(r) << '\n';
    result.records.push_back(std::move(r));

    if (cfg.checkpoint_every > 0 && e % cfg.checkpoint_every == 0) {
      save_checkpoint(result.checkpoint, agent, rng, e);
    }
  }
  csv.flush();
  timing.flush();
  if (!result.failed) save_checkpoint(result.checkpoint, agent, rng, result.records.size());

  std::vector<double> rates;
  for (const auto& r : result.records) rates.push_back(r.mean_sum_rate);
  if (!result.failed) {
    result.convergence = convergence_epoch(rates, cfg.convergence_window, cfg.plateau_fraction);
  }
  return result;
}

std::vector<SweepCell> plan_sweep(const std::vector<std::string>& variants,
                                  const std::vector<double>& m_grid,
                                  const std::vector<double>& eta_grid,
                                  const std::filesystem::path& out_dir) {
  if (variants.empty() || m_grid.empty() || eta_grid.empty()) {
    throw ConfigError("sweep: variant list and both grids must be nonempty");
  }
  std::vector<SweepCell> cells;
  for (const auto& v : variants) {
    parse_variant(v);
    SweepCell base;
    base.variant = v;
    base.baseline = true;
    base.csv = out_dir / (v + "_baseline.csv");
    cells.push_back(base);
    for (double m : m_grid) {
      for (double eta : eta_grid) {
        SweepCell c;
        c.variant = v;
        c.max_substitute = m;
        c.substitute_rate = eta;
        c.csv = out_dir / (v + "_M" + num(m) + "_eta" + num(eta) + ".csv");
        cells.push_back(c);
      }
    }
  }
  return cells;
}

std::size_t worker_count_from_env() {
  if (const char* v = std::getenv("D2RL_WORKERS")) {
    char* end = nullptr;
    const long n = std::strtol(v, &end, 10);
    if (end == v || *end != '\0' || n < 1) {
      throw ConfigError("D2RL_WORKERS must be a positive integer, got '" + std::string(v) + "'");
    }
    return static_cast<std::size_t>(n);
  }
  return std::max(1u, std::thread::hardware_concurrency());
}

SweepResult run_sweep(const ExperimentConfig& base, const std::vector<std::string>& variants,
                      const std::vector<double>& m_grid, const std::vector<double>& eta_grid,
                      const std::filesystem::path& out_dir, std::size_t workers) {
  SweepResult result;
  result.cells = plan_sweep(variants, m_grid, eta_grid, out_dir);
  std::filesystem::create_directories(out_dir);
  std::atomic<std::size_t> next{0};
  std::mutex errors_mutex;
  auto work = [&]() {
    for (std::size_t i = next++; i < result.cells.size(); i = next++) {
      const SweepCell& cell = result.cells[i];
      ExperimentConfig cfg = base;
      cfg.agent.reward = parse_variant(cell.variant);
      cfg.agent.state_exploration = !cell.baseline;
      if (!cell.baseline) {
        cfg.agent.max_substitute = cell.max_substitute;
        cfg.agent.substitute_rate = cell.substitute_rate;
      }
      try {
        const RunResult r = run_experiment(cfg, out_dir, cell.csv.stem().string());
        if (r.failed) {
          std::lock_guard lock(errors_mutex);
          result.errors.push_back(cell.csv.filename().string() + ": " + r.failure);
        }
      } catch (const std::exception& e) {
        std::lock_guard lock(errors_mutex);
        result.errors.push_back(cell.csv.filename().string() + ": " + e.what());
      }
    }
  };
  const std::size_t n = std::max<std::size_t>(1, std::min(workers, result.cells.size()));
  std::vector<std::thread> pool;
  for (std::size_t t = 1; t < n; ++t) pool.emplace_back(work);
  work();
  for (auto& t : pool) t.join();

  result.summary = out_dir / "summary.csv";
  std::ofstream out(result.summary);
  out << summarize_sweep(result.cells, base.convergence_window, base.plateau_fraction);
  return result;
}

std::string summarize_sweep(const std::vector<SweepCell>& cells, std::size_t window,
                            double plateau_fraction) {
  struct Row {
    const SweepCell* cell = nullptr;
    bool ok = false;
    double gw = 0.0, gb = 0.0, plateau = 0.0;
    std::optional<std::size_t> conv;
  };
  std::vector<Row> rows;
  for (const auto& c : cells) {
    Row r;
    r.cell = &c;
    try {
      const CsvTable t = read_csv(c.csv);
      const std::size_t layers = gradient_layers(t);
      const auto updated = t.column("updated");
      std::size_t count = 0;
      for (std::size_t i = 0; i < t.rows.size(); ++i) {
        if (updated[i] == 0.0) continue;
        ++count;
        for (std::size_t l = 1; l <= layers; ++l) {
          r.gw += t.rows[i][t.column_index("grad_w_" + std::to_string(l))];
          r.gb += t.rows[i][t.column_index("grad_b_" + std::to_string(l))];
        }
      }
      if (count > 0) {
        r.gw /= static_cast<double>(count);
        r.gb /= static_cast<double>(count);
      }
      const auto rates = t.column("mean_sum_rate");
      r.plateau = plateau_mean(rates, plateau_fraction);
      if (!t.failed()) r.conv = convergence_epoch(rates, window, plateau_fraction);
      r.ok = !t.failed();
    } catch (const std::exception&) {
      r.ok = false;
    }
    rows.push_back(r);
  }

  std::ostringstream out;
  out << "variant,baseline,max_substitute,substitute_rate,status,grad_weight,grad_bias,"
         "convergence_epoch,plateau_sum_rate,improvement,best\n";
  for (const auto& r : rows) {
    const Row* base = nullptr;
    for (const auto& b : rows) {
      if (b.cell->baseline && b.cell->variant == r.cell->variant) base = &b;
    }
    std::optional<double> improvement;
    if (base != nullptr && base->ok && r.ok) improvement = (r.gw + r.gb) - (base->gw + base->gb);
    bool best = false;
    if (!r.cell->baseline && improvement) {
      best = true;
      for (const auto& o : rows) {
        if (o.cell->baseline || o.cell->variant != r.cell->variant || !o.ok || &o == &r) continue;
        const double oi = (o.gw + o.gb) - (base->gw + base->gb);
        // Earlier cells win ties.
        if (oi > *improvement || (oi == *improvement && &o < &r)) best = false;
      }
    }
    out << r.cell->variant << ',' << (r.cell->baseline ? 1 : 0) << ','
        << num(r.cell->max_substitute) << ',' << num(r.cell->substitute_rate) << ','
        << (r.ok ? "ok" : "failed") << ',' << num(r.gw) << ',' << num(r.gb) << ','
        << (r.conv ? std::to_string(*r.conv) : "NA") << ',' << num(r.plateau) << ','
        << (improvement ? num(*improvement) : "NA") << ',' << (best ? 1 : 0) << '\n';
  }
  return out.str();
}

Comparison compare_runs(const CsvTable& baseline, const CsvTable* baseline_timing,
                        const CsvTable& variant, const CsvTable* variant_timing,
                        std::size_t window, double plateau_fraction) {
  Comparison c;
  const auto br = baseline.column("mean_sum_rate");
  const auto vr = variant.column("mean_sum_rate");
  if (!baseline.failed()) c.baseline_epoch = convergence_epoch(br, window, plateau_fraction);
  if (!variant.failed()) c.variant_epoch = convergence_epoch(vr, window, plateau_fraction);
  c.final_rate_delta = plateau_mean(vr, plateau_fraction) - plateau_mean(br, plateau_fraction);
  if (c.baseline_epoch && c.variant_epoch) {
    c.convergence_ratio =
        static_cast<double>(*c.variant_epoch) / static_cast<double>(*c.baseline_epoch);
  }
  if (baseline_timing != nullptr && variant_timing != nullptr) {
    const double bt = mean(baseline_timing->column("epoch_seconds"));
    const double vt = mean(variant_timing->column("epoch_seconds"));
    if (bt > 0.0) {
      c.epoch_time_ratio = vt / bt;
      if (c.convergence_ratio) c.total_time_ratio = *c.convergence_ratio * vt / bt;
    }
  }
  return c;
}

std::string compare_report(const std::filesystem::path& baseline_csv,
                           const std::filesystem::path& variant_csv, std::size_t window,
                           double plateau_fraction) {
  const CsvTable b = read_csv(baseline_csv);
  const CsvTable v = read_csv(variant_csv);
  std::optional<CsvTable> bt, vt;
  if (std::filesystem::exists(timing_path(baseline_csv))) bt = read_csv(timing_path(baseline_csv));
  if (std::filesystem::exists(timing_path(variant_csv))) vt = read_csv(timing_path(variant_csv));
  const Comparison c =
      compare_runs(b, bt ? &*bt : nullptr, v, vt ? &*vt : nullptr, window, plateau_fraction);
  auto ratio = [](const std::optional<double>& x) {
    if (!x) return std::string("N/A");
    std::ostringstream os;
    os.precision(4);
    os << std::fixed << *x;
    return os.str();
  };
  auto epoch = [](const std::optional<std::size_t>& e) {
    return e ? std::to_string(*e) : std::string("not converged");
  };
  std::ostringstream out;
  out << "# Comparison\n\n";
  out << "baseline: " << baseline_csv.string() << "\n";
  out << "variant:  " << variant_csv.string() << "\n\n";
  out << "| quantity | value |\n|---|---|\n";
  out << "| baseline convergence epoch | " << epoch(c.baseline_epoch) << " |\n";
  out << "| variant convergence epoch | " << epoch(c.variant_epoch) << " |\n";
  out << "| convergence-epoch ratio | " << ratio(c.convergence_ratio) << " |\n";
  out << "| total-time ratio | " << ratio(c.total_time_ratio) << " |\n";
  out << "| per-epoch-time ratio | " << ratio(c.epoch_time_ratio) << " |\n";
  std::ostringstream delta;
  delta.precision(4);
  delta << std::fixed << c.final_rate_delta;
  out << "| final sum-rate delta (bits/s/Hz) | " << delta.str() << " |\n";
  return out.str();
}

}  // namespace d2rl
