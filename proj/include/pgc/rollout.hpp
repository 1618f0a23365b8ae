#pragma once

#include <cstdint>

#include "pgc/attacks.hpp"
#include "pgc/env.hpp"
#include "pgc/monitor.hpp"
#include "pgc/trace.hpp"

namespace pgc {

struct RolloutOutcome {
    double total_reward = 0.0;
    double discounted_reward = 0.0;
    // sum_t gamma^t sum_{v attacked} sum_i |z_t^{iv} - m_z| over attacked steps
    double deviation_penalty = 0.0;
};

/// Plays one episode to the horizon. Every agent draws its scripted action
/// from its own noise stream each step, attacked or not, so an attack on one
/// agent never shifts another agent's noise. attack may be null (clean
/// episode). The monitor, when given, sees every step's observations and
/// executed actions.
RolloutOutcome simulate_episode(const EnvConfig& env, const AttackSpec* attack, std::uint64_t episode_seed,
                                EpisodeMonitor* monitor = nullptr, EpisodeTrace* trace = nullptr);

/// A clean episode recorded as a trace.
EpisodeTrace collect_episode(const EnvConfig& env, std::uint64_t episode_seed);

}  // namespace pgc
