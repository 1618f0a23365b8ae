#pragma once

// Episode traces and the JSON-lines file that stores them.
//
// Line 1 (header):
//   {"format":"pgc-trace","version":1,"env":"formation2d","agents":K,
//    "horizon":T,"obs_dim":n,"action_dim":d,"episode_seed":s,
//    "attack":"none","t0":-1,"config_hash":"...","tool_version":"..."}
// Lines 2..T+1 (one per step, state before the joint action):
//   {"t":t,"positions":[[..]..],"goal":[..],"observations":[[..]..],
//    "actions":[[..]..],"reward":r,"attack_active":false}
// t0 = -1 encodes "never attacked". Doubles are written in shortest
// round-trip form, so a re-read trace is bit-identical.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pgc/env.hpp"
#include "pgc/predictor.hpp"

namespace pgc {

inline constexpr int kTraceFormatVersion = 1;

struct TraceStep {
    std::size_t t = 0;
    std::vector<Vec> positions;
    Vec goal;
    std::vector<Observation> observations;
    JointAction actions;
    double reward = 0.0;
    bool attack_active = false;
};

struct EpisodeTrace {
    EnvKind env = EnvKind::formation2d;
    std::size_t num_agents = 0;
    std::size_t horizon = 0;
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;
    std::uint64_t episode_seed = 0;
    std::string attack = "none";
    std::size_t t0 = static_cast<std::size_t>(-1);
    std::string config_hash;
    std::vector<TraceStep> steps;
};

void write_trace(std::ostream& out, const EpisodeTrace& trace);
EpisodeTrace read_trace(std::istream& in);
void save_trace(const std::filesystem::path& path, const EpisodeTrace& trace);
EpisodeTrace load_trace(const std::filesystem::path& path);

/// Training episodes for predicting `victim` from `observer`'s pair view.
std::vector<TrainingSample> pair_samples(const EnvConfig& env, std::span<const EpisodeTrace> traces,
                                         AgentId observer, AgentId victim);

/// Training episodes for a predictor shared by every observer of `victim`.
std::vector<TrainingSample> shared_samples(const EnvConfig& env, std::span<const EpisodeTrace> traces,
                                           AgentId victim);

}  // namespace pgc
