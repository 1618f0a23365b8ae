#pragma once

// Runs the detectors of all observers of a set of monitored agents over one
// episode: predict, score the executed action, update the sequential test.

#include <map>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "pgc/baselines.hpp"
#include "pgc/detector.hpp"
#include "pgc/env.hpp"
#include "pgc/predictor.hpp"

namespace pgc {

/// A trained predictor plus what is needed to turn its output into a score.
struct ScoreModel {
    PredictorNet net;
    std::optional<Quantizer> quantizer;  // categorical head only
    StandardMoments reference;           // score moments under normal behaviour

    /// Gaussian or diagonal head with the analytic moments.
    static ScoreModel gaussian(PredictorNet net);
    static ScoreModel categorical(PredictorNet net, Quantizer q, StandardMoments reference);
};

/// Predictors keyed by (observer, victim), or by victim alone when shared.
/// A pair entry takes precedence over a shared one.
class PredictorBank {
public:
    void set_pair(AgentId observer, AgentId victim, ScoreModel model);
    void set_shared(AgentId victim, ScoreModel model);

    const ScoreModel* find(AgentId observer, AgentId victim) const;
    const std::map<std::pair<AgentId, AgentId>, ScoreModel>& pairs() const { return pairs_; }
    const std::map<AgentId, ScoreModel>& shared() const { return shared_; }
    std::size_t size() const { return pairs_.size() + shared_.size(); }

private:
    std::map<std::pair<AgentId, AgentId>, ScoreModel> pairs_;
    std::map<AgentId, ScoreModel> shared_;
};

struct PairTrack {
    AgentId observer = 0;
    AgentId victim = 0;
    const ScoreModel* model = nullptr;
    RecurrentState state;
    Vec prev_action;
    CusumState cusum;
    std::optional<WindowScorer> window;
    std::optional<Alarm> alarm;
    double last_score = 0.0;
    // Decision statistic per step. cusum: c+ and c-; window: the metric in
    // both (0 until the window fills).
    std::vector<double> plus_path;
    std::vector<double> minus_path;
};

class EpisodeMonitor {
public:
    /// Throws MissingPredictor if some observer of a monitored agent has no model.
    EpisodeMonitor(const EnvConfig& env, const PredictorBank& bank, const DetectorConfig& cfg,
                   std::span<const AgentId> monitored, bool record_rows = false);

    /// observations are taken before the actions; executed is the joint action
    /// actually applied at step t.
    void observe(std::size_t t, const std::vector<Observation>& observations, const JointAction& executed);

    const std::vector<PairTrack>& tracks() const { return tracks_; }

    /// sum over observers i of |z_t^{iv} - m_z| at the latest step.
    double deviation(AgentId victim) const;

    const std::vector<ScoreTraceRow>& rows() const { return rows_; }

private:
    const EnvConfig* env_;
    DetectorConfig cfg_;
    std::vector<PairTrack> tracks_;
    bool record_rows_;
    std::vector<ScoreTraceRow> rows_;
};

}  // namespace pgc
