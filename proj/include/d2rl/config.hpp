#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>

#include "d2rl/agent.hpp"
#include "d2rl/wireless.hpp"

namespace d2rl {

struct ExperimentConfig {
  EnvConfig env;
  AgentConfig agent;
  std::size_t epochs = 3000;
  std::uint64_t seed = 1;
  std::size_t ma_window = 100;           // moving-average reward window, epochs
  std::size_t convergence_window = 50;   // trailing window of the convergence test
  double plateau_fraction = 0.2;         // tail share of the run that defines the plateau
  std::size_t checkpoint_every = 0;      // 0: only the final checkpoint

  void validate() const;
};

enum class Profile { kDesk, kTiny };

Profile parse_profile(const std::string& name);
// Desk: full dimensions, 3000 epochs. Tiny: two users each way, three
// antennas, 500 epochs, narrow networks.
ExperimentConfig profile_config(Profile p);

// Apply "key = value" lines on top of base. Blank lines and '#' comments are
// ignored; an unknown key or a malformed value throws ConfigError naming the
// key. The result is validated.
ExperimentConfig parse_config(const std::string& text, ExperimentConfig base = {});
ExperimentConfig load_config(const std::filesystem::path& path, ExperimentConfig base = {});

// Every key with its current value, in the accepted input format.
std::string dump_config(const ExperimentConfig& cfg);

// Single assignment, same rules as a config line.
void set_config_value(ExperimentConfig& cfg, const std::string& key, const std::string& value);

}  // namespace d2rl
