#include "d2rl/config.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <functional>
#include <iomanip>
#include <numbers>
#include <sstream>
#include <vector>

#include "d2rl/errors.hpp"

namespace d2rl {

void ExperimentConfig::validate() const {
  env.validate();
  agent.validate();
  if (epochs < 1) throw ConfigError("invalid config: epochs must be >= 1");
  if (ma_window < 1) throw ConfigError("invalid config: ma_window must be >= 1");
  if (convergence_window < 1) throw ConfigError("invalid config: convergence_window must be >= 1");
  if (!(plateau_fraction > 0.0 && plateau_fraction <= 1.0)) {
    throw ConfigError("invalid config: plateau_fraction must lie in (0, 1]");
  }
}

Profile parse_profile(const std::string& name) {
  if (name == "desk") return Profile::kDesk;
  if (name == "tiny") return Profile::kTiny;
  throw ConfigError("unknown profile '" + name + "' (expected desk or tiny)");
}

ExperimentConfig profile_config(Profile p) {
  ExperimentConfig cfg;
  if (p == Profile::kTiny) {
    cfg.env.num_downlink = 2;
    cfg.env.num_uplink = 2;
    cfg.env.tx_antennas = 3;
    cfg.env.rx_antennas = 3;
    cfg.epochs = 500;
    cfg.agent.hidden_width = 64;
    cfg.agent.batch_size = 128;
    // 500 single updates do not move the policy; more and larger steps do.
    cfg.agent.updates_per_epoch = 8;
    cfg.agent.actor_lr = 1e-3;
    cfg.agent.critic_lr = 1e-3;
    cfg.agent.reward_lr = 1e-3;
  }
  return cfg;
}

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

double to_double(const std::string& key, const std::string& v) {
  double out = 0.0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size() || !std::isfinite(out)) {
    throw ConfigError("config key '" + key + "': expected a number, got '" + v + "'");
  }
  return out;
}

std::uint64_t to_uint(const std::string& key, const std::string& v) {
  std::uint64_t out = 0;
  const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
  if (ec != std::errc() || ptr != v.data() + v.size()) {
    throw ConfigError("config key '" + key + "': expected a non-negative integer, got '" + v + "'");
  }
  return out;
}

bool to_bool(const std::string& key, const std::string& v) {
  if (v == "true" || v == "1") return true;
  if (v == "false" || v == "0") return false;
  throw ConfigError("config key '" + key + "': expected true or false, got '" + v + "'");
}

std::string fmt(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string fmt(bool v) { return v ? "true" : "false"; }
std::string fmt(std::size_t v) { return std::to_string(v); }

double deg(double rad) { return rad * 180.0 / std::numbers::pi; }
double rad(double deg) { return deg * std::numbers::pi / 180.0; }

struct Field {
  std::string key;
  std::function<std::string(const ExperimentConfig&)> get;
  std::function<void(ExperimentConfig&, const std::string&, const std::string&)> set;
};

#define D2RL_REAL(name, member)                                                    \
  Field{name, [](const ExperimentConfig& c) { return fmt(c.member); },             \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {      \
          c.member = to_double(k, v);                                              \
        }}
#define D2RL_SIZE(name, member)                                                    \
  Field{name, [](const ExperimentConfig& c) { return fmt(c.member); },             \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {      \
          c.member = static_cast<std::size_t>(to_uint(k, v));                      \
        }}
#define D2RL_BOOL(name, member)                                                    \
  Field{name, [](const ExperimentConfig& c) { return fmt(c.member); },             \
        [](ExperimentConfig& c, const std::string& k, const std::string& v) {      \
          c.member = to_bool(k, v);                                                \
        }}

const std::vector<Field>& fields() {
  static const std::vector<Field> table = {
      // environment
      D2RL_REAL("cell_radius", env.cell_radius),
      D2RL_REAL("bs_height", env.bs_height),
      D2RL_SIZE("num_downlink", env.num_downlink),
      D2RL_SIZE("num_uplink", env.num_uplink),
      D2RL_SIZE("tx_antennas", env.tx_antennas),
      D2RL_SIZE("rx_antennas", env.rx_antennas),
      D2RL_REAL("pathloss_exponent", env.pathloss_exponent),
      D2RL_REAL("reference_gain", env.reference_gain),
      Field{"noise_dbm_per_hz",
            [](const ExperimentConfig& c) {
              return fmt(10.0 * std::log10(c.env.noise_downlink * 1000.0));
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.env.noise_downlink = c.env.noise_uplink = dbm_per_hz_to_watts(to_double(k, v));
            }},
      D2RL_REAL("max_bs_power", env.max_bs_power),
      D2RL_REAL("max_user_power", env.max_user_power),
      Field{"interferer_angles_deg",
            [](const ExperimentConfig& c) {
              std::string s;
              for (std::size_t i = 0; i < c.env.interferers.size(); ++i) {
                if (i > 0) s += ",";
                s += fmt(deg(c.env.interferers[i].angle_rad));
              }
              return s;
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const double gain = c.env.interferers.empty() ? 20.0 : c.env.interferers[0].gain_db;
              c.env.interferers.clear();
              std::stringstream ss(v);
              std::string item;
              while (std::getline(ss, item, ',')) {
                item = trim(item);
                if (!item.empty()) c.env.interferers.push_back({rad(to_double(k, item)), gain});
              }
            }},
      Field{"interferer_gain_db",
            [](const ExperimentConfig& c) {
              return fmt(c.env.interferers.empty() ? 20.0 : c.env.interferers[0].gain_db);
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              const double g = to_double(k, v);
              for (auto& f : c.env.interferers) f.gain_db = g;
            }},
      D2RL_REAL("min_radius", env.min_radius),
      D2RL_REAL("mobility_step", env.mobility_step),
      Field{"gain_model",
            [](const ExperimentConfig& c) {
              return std::string(c.env.gain_model == GainModel::kPower ? "power" : "amplitude");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "power") c.env.gain_model = GainModel::kPower;
              else if (v == "amplitude") c.env.gain_model = GainModel::kAmplitude;
              else throw ConfigError("config key '" + k + "': expected power or amplitude");
            }},
      // agent
      Field{"actor",
            [](const ExperimentConfig& c) {
              return std::string(c.agent.actor == ActorKind::kDiffusion ? "diffusion" : "mlp");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "diffusion") c.agent.actor = ActorKind::kDiffusion;
              else if (v == "mlp") c.agent.actor = ActorKind::kMlp;
              else throw ConfigError("config key '" + k + "': expected diffusion or mlp");
            }},
      D2RL_SIZE("hidden_width", agent.hidden_width),
      D2RL_SIZE("actor_layers", agent.actor_layers),
      D2RL_SIZE("state_layers", agent.state_layers),
      D2RL_SIZE("reward_layers", agent.reward_layers),
      D2RL_SIZE("critic_layers", agent.critic_layers),
      D2RL_REAL("actor_lr", agent.actor_lr),
      D2RL_REAL("reward_lr", agent.reward_lr),
      D2RL_REAL("state_lr", agent.state_lr),
      D2RL_REAL("critic_lr", agent.critic_lr),
      D2RL_REAL("weight_decay", agent.weight_decay),
      D2RL_REAL("tau", agent.tau),
      D2RL_REAL("gamma", agent.gamma),
      D2RL_SIZE("diffusion_steps", agent.diffusion_steps),
      D2RL_REAL("beta_min", agent.beta_min),
      D2RL_REAL("beta_max", agent.beta_max),
      D2RL_SIZE("batch_size", agent.batch_size),
      D2RL_SIZE("buffer_capacity", agent.buffer_capacity),
      D2RL_REAL("epsilon_greedy", agent.epsilon_greedy),
      D2RL_SIZE("steps_per_epoch", agent.steps_per_epoch),
      D2RL_SIZE("updates_per_epoch", agent.updates_per_epoch),
      D2RL_BOOL("per_step_updates", agent.per_step_updates),
      Field{"reward",
            [](const ExperimentConfig& c) { return variant_name(c.agent.reward); },
            [](ExperimentConfig& c, const std::string&, const std::string& v) {
              c.agent.reward = parse_variant(v);
            }},
      D2RL_REAL("reward_clamp", agent.reward_clamp),
      D2RL_BOOL("reward_condition_on_rate", agent.reward_condition_on_rate),
      Field{"reward_signal",
            [](const ExperimentConfig& c) {
              return std::string(c.agent.reward_signal == QualitySignal::kTd ? "td" : "immediate");
            },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              if (v == "td") c.agent.reward_signal = QualitySignal::kTd;
              else if (v == "immediate") c.agent.reward_signal = QualitySignal::kImmediate;
              else throw ConfigError("config key '" + k + "': expected td or immediate");
            }},
      D2RL_BOOL("state_exploration", agent.state_exploration),
      D2RL_REAL("max_substitute", agent.max_substitute),
      D2RL_REAL("substitute_rate", agent.substitute_rate),
      D2RL_REAL("loss_threshold", agent.loss_threshold),
      D2RL_REAL("loss_ema_decay", agent.loss_ema_decay),
      // run
      D2RL_SIZE("epochs", epochs),
      Field{"seed", [](const ExperimentConfig& c) { return std::to_string(c.seed); },
            [](ExperimentConfig& c, const std::string& k, const std::string& v) {
              c.seed = to_uint(k, v);
            }},
      D2RL_SIZE("ma_window", ma_window),
      D2RL_SIZE("convergence_window", convergence_window),
      D2RL_REAL("plateau_fraction", plateau_fraction),
      D2RL_SIZE("checkpoint_every", checkpoint_every),
  };
  return table;
}

#undef D2RL_REAL
#undef D2RL_SIZE
#undef D2RL_BOOL

}  // namespace

void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value) {
  for (const auto& f : fields()) {
    if (f.key == key) {
      f.set(cfg, key, value);
      return;
    }
  }
  throw ConfigError("unknown config key '" + key + "'");
}

ExperimentConfig parse_config(const std::string& text, ExperimentConfig base) {
  std::istringstream in(text);
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("config line " + std::to_string(lineno) + ": expected key = value");
    }
    set_config_value(base, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
  }
  base.validate();
  return base;
}

ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_config(buf.str(), std::move(base));
}

std::string dump_config(const ExperimentConfig& cfg) {
  std::string out;
  for (const auto& f : fields()) out += f.key + " = " + f.get(cfg) + "\n";
  return out;
}

}  // namespace d2rl
