#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "d2rl/config.hpp"
#include "d2rl/errors.hpp"
#include "d2rl/experiment.hpp"
#include "d2rl/metrics.hpp"
#include "d2rl/plot.hpp"

namespace d2rl {
namespace {

namespace fs = std::filesystem;

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary);
  out << text;
}

fs::path fresh_dir(const std::string& name) {
  const fs::path d = fs::temp_directory_path() / ("d2rl_" + name);
  fs::remove_all(d);
  fs::create_directories(d);
  return d;
}

ExperimentConfig quick_config(std::size_t epochs) {
  ExperimentConfig cfg = profile_config(Profile::kTiny);
  cfg.epochs = epochs;
  cfg.agent.hidden_width = 16;
  cfg.agent.actor_layers = 2;
  cfg.agent.state_layers = 2;
  cfg.agent.reward_layers = 2;
  cfg.agent.batch_size = 16;
  cfg.ma_window = 3;
  cfg.convergence_window = 2;
  return cfg;
}

// Metric and timing CSVs for a run whose sum rate steps from 0 to 1 at
// epoch `step`, with a constant per-epoch time.
void synthetic_run(const fs::path& csv, std::size_t epochs, std::size_t step, double seconds) {
  std::string metrics = metric_header(1) + "\n";
  std::string timing = timing_header() + "\n";
  double total = 0.0;
  for (std::size_t e = 1; e <= epochs; ++e) {
    MetricRecord r;
    r.epoch = e;
    r.mean_sum_rate = e >= step ? 1.0 : 0.0;
    r.grad_weight = {1.0};
    r.grad_bias = {0.5};
    r.updated = true;
    total += seconds;
    r.epoch_seconds = seconds;
    r.cumulative_seconds = total;
    metrics += metric_row(r, 1) + "\n";
    timing += timing_row(r) + "\n";
  }
  write_file(csv, metrics);
  write_file(timing_path(csv), timing);
}

TEST(Config, EmptyTextGivesTableDefaults) {
  const ExperimentConfig cfg = parse_config("");
  EXPECT_EQ(cfg.env.num_downlink, 6u);
  EXPECT_EQ(cfg.env.num_uplink, 4u);
  EXPECT_EQ(cfg.agent.actor_lr, 5e-5);
  EXPECT_EQ(cfg.agent.reward_lr, 5e-5);
  EXPECT_EQ(cfg.agent.state_lr, 1e-4);
  EXPECT_EQ(cfg.agent.weight_decay, 7e-5);
  EXPECT_EQ(cfg.agent.tau, 5e-3);
  EXPECT_EQ(cfg.agent.gamma, 1.0);
  EXPECT_EQ(cfg.agent.diffusion_steps, 6u);
  EXPECT_EQ(cfg.agent.batch_size, 256u);
  EXPECT_EQ(cfg.agent.buffer_capacity, 100000u);
  EXPECT_EQ(cfg.agent.epsilon_greedy, 0.1);
  EXPECT_EQ(cfg.agent.loss_threshold, 5e-4);
  EXPECT_EQ(cfg.epochs, 3000u);
}

TEST(Config, OverrideChangesOnlyThatKey) {
  const ExperimentConfig cfg = parse_config("# one downlink user\nnum_downlink = 1\n\n");
  EXPECT_EQ(cfg.env.num_downlink, 1u);
  EXPECT_EQ(dump_config(cfg).find("num_uplink = 4") != std::string::npos, true);
  ExperimentConfig ref;
  ref.env.num_downlink = 1;
  EXPECT_EQ(dump_config(cfg), dump_config(ref));
}

TEST(Config, UnknownKeyIsNamed) {
  try {
    parse_config("num_downlnk = 2\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("num_downlnk"), std::string::npos);
  }
}

TEST(Config, MalformedNumberIsNamed) {
  try {
    parse_config("actor_lr = 1e-4x\n");
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("actor_lr"), std::string::npos);
  }
  EXPECT_THROW(parse_config("reward = fancy\n"), ConfigError);
  EXPECT_THROW(parse_config("actor_lr = -1\n"), ConfigError);
}

TEST(Config, DumpParsesBackToSameConfig) {
  ExperimentConfig cfg = profile_config(Profile::kTiny);
  set_config_value(cfg, "reward", "designed_gdm");
  set_config_value(cfg, "state_exploration", "true");
  set_config_value(cfg, "interferer_angles_deg", "-30,10,45");
  const std::string text = dump_config(cfg);
  EXPECT_EQ(dump_config(parse_config(text)), text);
}

TEST(Config, ProfilesParse) {
  EXPECT_EQ(parse_profile("desk"), Profile::kDesk);
  EXPECT_EQ(parse_profile("tiny"), Profile::kTiny);
  EXPECT_THROW(parse_profile("huge"), ConfigError);
  const ExperimentConfig tiny = profile_config(Profile::kTiny);
  EXPECT_EQ(tiny.env.num_downlink, 2u);
  EXPECT_EQ(tiny.env.num_uplink, 2u);
  EXPECT_EQ(tiny.env.tx_antennas, 3u);
  EXPECT_EQ(tiny.epochs, 500u);
}

TEST(Metrics, GoldenSchema) {
  EXPECT_EQ(metric_header(2),
            "epoch,mean_sum_rate,mean_reward,ma_reward,chi,substitutions,critic_loss,actor_loss,"
            "state_loss,updated,grad_w_1,grad_w_2,grad_b_1,grad_b_2");
  EXPECT_EQ(timing_header(), "epoch,epoch_seconds,cumulative_seconds");
  EXPECT_EQ(timing_path("out/x.csv"), fs::path("out/x.timing.csv"));
}

TEST(Metrics, MovingAverageRecomputation) {
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7};
  const auto ma = moving_average(v, 3);
  const std::vector<double> expected{1, 1.5, 2, 3, 4, 5, 6};
  EXPECT_EQ(ma, expected);
}

TEST(Metrics, ConvergenceEpochOfStep) {
  std::vector<double> rates(500, 1.0);
  for (std::size_t i = 0; i < 152; ++i) rates[i] = 0.0;  // epochs 1..152
  EXPECT_EQ(convergence_epoch(rates, 50), std::optional<std::size_t>(200));
  EXPECT_FALSE(convergence_epoch(std::vector<double>(10, 1.0), 50).has_value());
  EXPECT_FALSE(convergence_epoch(std::vector<double>(100, 0.0), 50).has_value());
}

TEST(Metrics, ConvergenceEpochIsScaleInvariant) {
  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> rates(400);
    for (std::size_t i = 0; i < rates.size(); ++i) {
      rates[i] = 1.0 - std::exp(-static_cast<double>(i) / 60.0) + 0.05 * rng.normal();
    }
    const auto base = convergence_epoch(rates, 50);
    for (double k : {0.001, 0.37, 3.0, 1e4}) {
      std::vector<double> scaled(rates);
      for (auto& r : scaled) r *= k;
      EXPECT_EQ(convergence_epoch(scaled, 50), base);
    }
  }
}

TEST(Metrics, CsvParseAndMarkers) {
  const CsvTable t = parse_csv("a,b\n1,2.5\n3,-4\n# failed: epoch 3: boom\n");
  EXPECT_EQ(t.columns, (std::vector<std::string>{"a", "b"}));
  EXPECT_EQ(t.column("b"), (std::vector<double>{2.5, -4.0}));
  EXPECT_TRUE(t.failed());
  try {
    t.column_index("zzz");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("zzz"), std::string::npos);
  }
}

TEST(Run, SingleEpochGivesOneRow) {
  const fs::path dir = fresh_dir("one_epoch");
  const RunResult r = run_experiment(quick_config(1), dir, "one");
  const CsvTable t = read_csv(r.metrics_csv);
  EXPECT_EQ(t.rows.size(), 1u);
  EXPECT_EQ(slurp(r.metrics_csv).substr(0, 6), "epoch,");
  EXPECT_TRUE(fs::exists(r.checkpoint));
  EXPECT_TRUE(fs::exists(r.timing_csv));
  EXPECT_TRUE(fs::exists(dir / "one.config"));
}

TEST(Run, SameSeedIsByteIdenticalAndSchemaIsFixed) {
  const fs::path dir = fresh_dir("determinism");
  ExperimentConfig cfg = quick_config(4);
  run_experiment(cfg, dir, "a");
  run_experiment(cfg, dir, "b");
  EXPECT_EQ(slurp(dir / "a.csv"), slurp(dir / "b.csv"));
  const std::string header = slurp(dir / "a.csv").substr(0, slurp(dir / "a.csv").find('\n'));
  for (const char* v : {"raw", "designed_mlp", "gdm", "designed_gdm"}) {
    ExperimentConfig other = cfg;
    set_config_value(other, "reward", v);
    set_config_value(other, "state_exploration", "true");
    run_experiment(other, dir, v);
    const std::string text = slurp(dir / (std::string(v) + ".csv"));
    EXPECT_EQ(text.substr(0, text.find('\n')), header) << v;
  }
  cfg.seed = 2;
  run_experiment(cfg, dir, "c");
  EXPECT_NE(slurp(dir / "a.csv"), slurp(dir / "c.csv"));
}

TEST(Run, MaRewardMatchesTrailingMean) {
  const fs::path dir = fresh_dir("ma");
  ExperimentConfig cfg = quick_config(8);
  const RunResult r = run_experiment(cfg, dir, "ma");
  const CsvTable t = read_csv(r.metrics_csv);
  const auto reward = t.column("mean_reward");
  const auto ma = t.column("ma_reward");
  for (std::size_t e = 0; e < reward.size(); ++e) {
    const std::size_t lo = e + 1 >= cfg.ma_window ? e + 1 - cfg.ma_window : 0;
    double acc = 0.0;
    for (std::size_t i = lo; i <= e; ++i) acc += reward[i];
    EXPECT_NEAR(ma[e], acc / static_cast<double>(e + 1 - lo), 1e-12);
  }
  const auto cumulative = read_csv(r.timing_csv).column("cumulative_seconds");
  for (std::size_t i = 1; i < cumulative.size(); ++i) EXPECT_GE(cumulative[i], cumulative[i - 1]);
}

TEST(Sweep, CountsCellsAndSummaryIsRecomputable) {
  const fs::path dir = fresh_dir("sweep");
  ExperimentConfig cfg = quick_config(2);
  const SweepResult r = run_sweep(cfg, {"designed"}, {0.3, 0.9}, {0.001, 0.01}, dir, 2);
  ASSERT_TRUE(r.errors.empty());
  ASSERT_EQ(r.cells.size(), 5u);
  std::size_t csvs = 0;
  for (const auto& c : r.cells) csvs += fs::exists(c.csv) ? 1 : 0;
  EXPECT_EQ(csvs, 5u);
  std::vector<std::string> best_flags;
  {
    std::istringstream lines(slurp(r.summary));
    std::string line;
    std::getline(lines, line);
    EXPECT_EQ(line.substr(line.rfind(',') + 1), "best");
    while (std::getline(lines, line)) best_flags.push_back(line.substr(line.rfind(',') + 1));
  }
  EXPECT_EQ(best_flags.size(), 5u);
  EXPECT_EQ(summarize_sweep(r.cells, cfg.convergence_window, cfg.plateau_fraction),
            slurp(r.summary));

  // Best cell recomputed from the raw cell CSVs.
  auto grad_sum = [](const fs::path& p) {
    const CsvTable t = read_csv(p);
    const auto updated = t.column("updated");
    double acc = 0.0;
    std::size_t n = 0;
    for (std::size_t i = 0; i < t.rows.size(); ++i) {
      if (updated[i] == 0.0) continue;
      ++n;
      for (std::size_t c = 0; c < t.columns.size(); ++c) {
        if (t.columns[c].rfind("grad_", 0) == 0) acc += t.rows[i][c];
      }
    }
    return n > 0 ? acc / static_cast<double>(n) : 0.0;
  };
  std::size_t best = 0;
  double best_value = -1e300;
  for (std::size_t i = 0; i < r.cells.size(); ++i) {
    if (r.cells[i].baseline) continue;
    const double v = grad_sum(r.cells[i].csv);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  for (std::size_t i = 0; i < best_flags.size(); ++i) {
    EXPECT_EQ(best_flags[i], i == best ? "1" : "0");
  }
}

TEST(Sweep, SingleCellMatchesPlainRun) {
  const fs::path dir = fresh_dir("sweep_one");
  ExperimentConfig cfg = quick_config(3);
  const SweepResult r = run_sweep(cfg, {"designed"}, {0.5}, {0.01}, dir, 1);
  ASSERT_EQ(r.cells.size(), 2u);
  ExperimentConfig plain = cfg;
  plain.agent.state_exploration = true;
  plain.agent.max_substitute = 0.5;
  plain.agent.substitute_rate = 0.01;
  run_experiment(plain, dir, "plain");
  const SweepCell& cell = r.cells[0].baseline ? r.cells[1] : r.cells[0];
  EXPECT_EQ(slurp(cell.csv), slurp(dir / "plain.csv"));
}

TEST(Sweep, WorkerCountDoesNotChangeOutput) {
  ExperimentConfig cfg = quick_config(2);
  const fs::path a = fresh_dir("sweep_w1"), b = fresh_dir("sweep_w3");
  run_sweep(cfg, {"raw", "designed"}, {0.9}, {0.001}, a, 1);
  run_sweep(cfg, {"raw", "designed"}, {0.9}, {0.001}, b, 3);
  for (const auto& entry : fs::directory_iterator(a)) {
    const auto name = entry.path().filename();
    if (name.string().find(".timing.") != std::string::npos) continue;
    if (name.extension() == ".ckpt" || name.extension() == ".config" || name == "summary.csv" ||
        name.extension() == ".csv") {
      EXPECT_EQ(slurp(entry.path()), slurp(b / name)) << name;
    }
  }
}

TEST(Sweep, WorkerCountFromEnvironment) {
  ::setenv("D2RL_WORKERS", "3", 1);
  EXPECT_EQ(worker_count_from_env(), 3u);
  ::setenv("D2RL_WORKERS", "0", 1);
  EXPECT_THROW(worker_count_from_env(), ConfigError);
  ::unsetenv("D2RL_WORKERS");
  EXPECT_GE(worker_count_from_env(), 1u);
}

TEST(Plots, FourDeterministicFiles) {
  const fs::path dir = fresh_dir("plots");
  const RunResult r = run_experiment(quick_config(5), dir, "p");
  const auto first = emit_plots({r.metrics_csv}, dir / "a", 3);
  const auto second = emit_plots({r.metrics_csv}, dir / "b", 3);
  ASSERT_EQ(first.size(), 4u);
  for (std::size_t i = 0; i < 4; ++i) {
    EXPECT_EQ(slurp(first[i]), slurp(second[i]));
    EXPECT_NE(slurp(first[i]).find("<svg"), std::string::npos);
  }
  std::vector<std::string> names;
  for (const auto& p : first) names.push_back(p.filename().string());
  EXPECT_EQ(names, (std::vector<std::string>{"sum_rate.svg", "ma_reward.svg", "gradients.svg",
                                             "time.svg"}));
}

TEST(Plots, EmptyCsvIsAnErrorAndWritesNothing) {
  const fs::path dir = fresh_dir("plots_empty");
  write_file(dir / "empty.csv", "");
  write_file(dir / "empty.timing.csv", "");
  EXPECT_THROW(emit_plots({dir / "empty.csv"}, dir / "out"), std::exception);
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Plots, MissingColumnIsNamed) {
  const fs::path dir = fresh_dir("plots_missing");
  write_file(dir / "m.csv", "epoch,mean_sum_rate\n1,0.5\n");
  write_file(dir / "m.timing.csv", "epoch,epoch_seconds,cumulative_seconds\n1,1,1\n");
  try {
    emit_plots({dir / "m.csv"}, dir / "out");
    FAIL();
  } catch (const std::exception& e) {
    EXPECT_NE(std::string(e.what()).find("ma_reward"), std::string::npos);
  }
  EXPECT_FALSE(fs::exists(dir / "out"));
}

TEST(Compare, IdenticalRunsGiveUnitRatios) {
  const fs::path dir = fresh_dir("compare_same");
  synthetic_run(dir / "a.csv", 500, 153, 1.0);
  const CsvTable t = read_csv(dir / "a.csv"), tt = read_csv(dir / "a.timing.csv");
  const Comparison c = compare_runs(t, &tt, t, &tt, 50, 0.2);
  EXPECT_EQ(c.convergence_ratio, 1.0);
  EXPECT_EQ(c.total_time_ratio, 1.0);
  EXPECT_EQ(c.epoch_time_ratio, 1.0);
  EXPECT_EQ(c.final_rate_delta, 0.0);
  const std::string report = compare_report(dir / "a.csv", dir / "a.csv");
  EXPECT_NE(report.find("| convergence-epoch ratio | 1.0000 |"), std::string::npos) << report;
}

TEST(Compare, HalfEpochsAtOneAndAHalfTimesCost) {
  const fs::path dir = fresh_dir("compare_ratio");
  synthetic_run(dir / "base.csv", 500, 153, 1.0);  // converges at epoch 200
  synthetic_run(dir / "var.csv", 500, 53, 1.5);    // converges at epoch 100
  const CsvTable b = read_csv(dir / "base.csv"), bt = read_csv(dir / "base.timing.csv");
  const CsvTable v = read_csv(dir / "var.csv"), vt = read_csv(dir / "var.timing.csv");
  const Comparison c = compare_runs(b, &bt, v, &vt, 50, 0.2);
  EXPECT_EQ(c.baseline_epoch, std::optional<std::size_t>(200));
  EXPECT_EQ(c.variant_epoch, std::optional<std::size_t>(100));
  ASSERT_TRUE(c.total_time_ratio.has_value());
  EXPECT_NEAR(*c.total_time_ratio, 0.75, 1e-12);
  EXPECT_NEAR(*c.epoch_time_ratio, 1.5, 1e-12);
}

TEST(Compare, NonConvergedRunIsNotApplicable) {
  const fs::path dir = fresh_dir("compare_na");
  synthetic_run(dir / "base.csv", 500, 153, 1.0);
  synthetic_run(dir / "flat.csv", 500, 1000, 1.0);  // all zeros: no plateau
  const CsvTable b = read_csv(dir / "base.csv"), f = read_csv(dir / "flat.csv");
  const Comparison c = compare_runs(b, nullptr, f, nullptr, 50, 0.2);
  EXPECT_FALSE(c.convergence_ratio.has_value());
  EXPECT_FALSE(c.total_time_ratio.has_value());
  EXPECT_NE(compare_report(dir / "base.csv", dir / "flat.csv").find("N/A"), std::string::npos);
}

}  // namespace
}  // namespace d2rl
