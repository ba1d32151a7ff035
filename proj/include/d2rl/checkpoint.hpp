#pragma once

#include <cstddef>
#include <filesystem>

#include "d2rl/agent.hpp"
#include "d2rl/rng.hpp"

namespace d2rl {

inline constexpr int kCheckpointVersion = 1;

// Text dump of every agent network (parameters, Adam moments, step count),
// the state-exploration controller and the rng. Floats are written as hex
// literals so a reload is bit-exact. Layout is described in the README.
void save_checkpoint(const std::filesystem::path& path, Agent& agent, const Rng& rng,
                     std::size_t epoch);

// Restores into an agent built from the same configuration. Returns the
// stored epoch. Throws StateError on a version or shape mismatch.
std::size_t load_checkpoint(const std::filesystem::path& path, Agent& agent, Rng& rng);

}  // namespace d2rl
