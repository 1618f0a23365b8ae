#pragma once

// The four experiment steps as library calls: collect clean traces, train
// detectors, train attacks, evaluate. The CLI and the acceptance suite both
// go through here.

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgc/config.hpp"
#include "pgc/eval.hpp"
#include "pgc/model_io.hpp"
#include "pgc/report.hpp"
#include "pgc/trace.hpp"

namespace pgc {

/// Clean episodes, in seed order.
std::vector<EpisodeTrace> collect_traces(const EnvConfig& env, std::span<const std::uint64_t> seeds);

struct DetectorTraining {
    HeadKind head = HeadKind::gaussian;
    std::size_t levels = 3;
    bool share_params = false;
    TrainConfig net;
};

DetectorTraining detector_training(const TrainSettings& t, bool diagonal_only = false);

/// One model per (observer, victim) pair, or per victim when sharing, for
/// every victim in `victims` (all agents when empty). Categorical models are
/// calibrated on the last fifth of the traces and trained on the rest.
std::vector<StoredModel> train_models(const EnvConfig& env, std::span<const EpisodeTrace> traces,
                                      const DetectorTraining& training, std::uint64_t seed,
                                      std::span<const AgentId> victims = {}, const Provenance& provenance = {});

PredictorBank make_bank(std::span<const StoredModel> models);

/// A copy of result keeping only the pairs of the given monitored agents.
EpisodeResult restrict_to(const EpisodeResult& result, std::span<const AgentId> monitored,
                          const DetectorConfig& cfg);

struct EvaluationCondition {
    std::string name;
    AttackSpec spec;  // act / dyn carry their policy
};

/// Clean episodes are run once, monitoring every victim of every condition,
/// and each condition is compared with the clean episodes restricted to its
/// own victims.
EvaluationRecord evaluate_conditions(const EnvConfig& env, const PredictorBank& bank, const DetectorConfig& cfg,
                                     std::span<const EvaluationCondition> conditions, std::size_t clean_episodes,
                                     std::size_t attacked_episodes, std::span<const double> grid,
                                     std::uint64_t seed, const Provenance& provenance = {});

}  // namespace pgc
