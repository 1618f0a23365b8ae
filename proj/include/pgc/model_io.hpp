#pragma once

// JSON files for trained predictors and attack policies. Each file records
// the config hash and tool version of the run that produced it.

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "pgc/attacks.hpp"
#include "pgc/monitor.hpp"

namespace pgc {

struct Provenance {
    std::string config_hash;
    std::string tool_version;
};

/// Detector family of a predictor: "pgc" (full covariance), "ipgc"
/// (diagonal covariance) or "discrete" (categorical head).
std::string family_tag(HeadKind head);

struct StoredModel {
    std::string family;
    std::optional<AgentId> observer;  // empty for a shared per-victim model
    AgentId victim = 0;
    ScoreModel model;
    double final_loss = 0.0;
    Provenance provenance;
};

/// pair_<i>_<j>.json or shared_<j>.json
std::string model_file_name(std::optional<AgentId> observer, AgentId victim);

void save_model(const std::filesystem::path& path, const StoredModel& m);
StoredModel load_model(const std::filesystem::path& path);

/// Loads every model file in dir into a bank. Throws MissingArtifact when
/// the directory holds none.
PredictorBank load_bank(const std::filesystem::path& dir);

struct StoredAttack {
    std::string name;
    AttackKind kind = AttackKind::act;
    double lambda = 0.0;
    AgentId victim = 0;
    LinearPolicy policy;
    std::vector<double> elite_objective;
    Provenance provenance;
};

void save_attack(const std::filesystem::path& path, const StoredAttack& a);
StoredAttack load_attack(const std::filesystem::path& path);

}  // namespace pgc
