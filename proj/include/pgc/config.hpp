#pragma once

// Experiment configuration: one text file per experiment.
//
//   # comment
//   seed = 7
//   [env]
//   kind = formation2d        # formation2d | line1d; sets the defaults below
//   agents = 5
//   horizon = 50
//   noise_std = 0.55
//   noise_rho = 0.8
//   ...
//   [train]  [detector]  [cem]  [eval]
//   [attack act]              # one section per attack condition
//   kind = act
//   victims = 0               # comma-separated
//
// Keys are `name = value`. Unknown sections and keys, repeated keys and
// malformed values are all rejected with InvalidConfig. The full key list is
// in the README.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <istream>
#include <string>
#include <vector>

#include "pgc/attacks.hpp"
#include "pgc/detector.hpp"
#include "pgc/env.hpp"
#include "pgc/predictor.hpp"

namespace pgc {

struct AttackEntry {
    std::string name;
    AttackSpec spec;
};

struct TrainSettings {
    TrainConfig net;
    std::size_t episodes = 1000;  // clean episodes collected for training
    HeadKind head = HeadKind::gaussian;
    std::size_t levels = 3;       // categorical head
    bool share_params = false;
};

struct EvalSettings {
    std::size_t clean_episodes = 500;
    std::size_t attacked_episodes = 500;
    double grid_min = 0.1;
    double grid_max = 100.0;
    std::size_t grid_points = 50;
};

struct RunConfig {
    std::uint64_t seed = 0;
    EnvConfig env;
    TrainSettings train;
    DetectorConfig detector;
    CemConfig cem;
    std::vector<AttackEntry> attacks;
    EvalSettings eval;

    std::vector<double> grid() const;
    /// Throws InvalidConfig.
    void validate() const;
};

RunConfig parse_config(std::istream& in);
RunConfig parse_config_text(const std::string& text);
RunConfig load_config(const std::filesystem::path& path);

/// Every setting written back in the input format, defaults included.
/// Parsing it yields the same configuration.
std::string canonical_text(const RunConfig& cfg);

/// 16 hex digits identifying the canonical text.
std::string config_hash(const RunConfig& cfg);

}  // namespace pgc
