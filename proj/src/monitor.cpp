#include "pgc/monitor.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "pgc/errors.hpp"

namespace pgc {

ScoreModel ScoreModel::gaussian(PredictorNet net) {
    if (net.shape().head == HeadKind::categorical) throw UnknownKind("ScoreModel::gaussian needs a Gaussian head");
    const auto reference = StandardMoments::for_dimension(net.shape().action_dim);
    return ScoreModel{std::move(net), std::nullopt, reference};
}

ScoreModel ScoreModel::categorical(PredictorNet net, Quantizer q, StandardMoments reference) {
    if (net.shape().head != HeadKind::categorical) throw UnknownKind("ScoreModel::categorical needs a categorical head");
    return ScoreModel{std::move(net), std::move(q), reference};
}

void PredictorBank::set_pair(AgentId observer, AgentId victim, ScoreModel model) {
    pairs_.insert_or_assign({observer, victim}, std::move(model));
}

void PredictorBank::set_shared(AgentId victim, ScoreModel model) { shared_.insert_or_assign(victim, std::move(model)); }

const ScoreModel* PredictorBank::find(AgentId observer, AgentId victim) const {
    if (auto it = pairs_.find({observer, victim}); it != pairs_.end()) return &it->second;
    if (auto it = shared_.find(victim); it != shared_.end()) return &it->second;
    return nullptr;
}

EpisodeMonitor::EpisodeMonitor(const EnvConfig& env, const PredictorBank& bank, const DetectorConfig& cfg,
                               std::span<const AgentId> monitored, bool record_rows)
    : env_(&env), cfg_(cfg), record_rows_(record_rows) {
    for (AgentId v : monitored) {
        for (AgentId i : observers_of(env, v)) {
            const ScoreModel* model = bank.find(i, v);
            if (!model)
                throw MissingPredictor("no predictor for observer " + std::to_string(i) + " of agent " +
                                       std::to_string(v));
            if (model->net.shape().obs_dim != observation_dim(env) || model->net.shape().action_dim != env.action_dim())
                throw DimensionMismatch("predictor for pair (" + std::to_string(i) + ", " + std::to_string(v) +
                                        ") does not match the environment");
            PairTrack track;
            track.observer = i;
            track.victim = v;
            track.model = model;
            track.state = RecurrentState::zeros(model->net.shape().hidden);
            track.prev_action.assign(env.action_dim(), 0.0);
            track.cusum = CusumState::fresh(cfg.w);
            if (cfg.mode == DetectionMode::window)
                track.window.emplace(cfg.window_len, model->reference.mean, model->reference.stddev);
            track.plus_path.reserve(env.horizon);
            track.minus_path.reserve(env.horizon);
            tracks_.push_back(std::move(track));
        }
    }
}

void EpisodeMonitor::observe(std::size_t t, const std::vector<Observation>& observations, const JointAction& executed) {
    for (PairTrack& tr : tracks_) {
        const ScoreModel& m = *tr.model;
        const Observation view = pair_view(*env_, tr.observer, tr.victim, observations[tr.observer]);
        std::optional<std::span<const double>> prev;
        if (m.net.shape().prev_action) prev = std::span<const double>(tr.prev_action);
        const Vec& action = executed[tr.victim];

        double score = 0.0;
        if (m.quantizer) {
            auto [next, params] = predict_categorical(m.net, tr.state, view, prev);
            tr.state = std::move(next);
            score = discrete_normality_score(params, quantize(*m.quantizer, action));
        } else {
            auto [next, params] = predict_step(m.net, tr.state, view, prev);
            tr.state = std::move(next);
            score = normality_score(params, action, t, tr.observer, tr.victim).z;
        }
        tr.last_score = score;
        tr.prev_action = action;

        const double z_std = (score - m.reference.mean) / m.reference.stddev;
        if (cfg_.mode == DetectionMode::cusum) {
            tr.cusum = cusum_update(tr.cusum, z_std);
            check_alarm(tr.cusum, cfg_, t);
            tr.alarm = tr.cusum.alarmed;
            tr.plus_path.push_back(tr.cusum.c_plus);
            tr.minus_path.push_back(tr.cusum.c_minus);
        } else {
            const double metric = tr.window->push(score).value_or(0.0);
            if (!tr.alarm && (metric > cfg_.beta_plus || metric > cfg_.beta_minus))
                tr.alarm = Alarm{metric > cfg_.beta_plus ? Side::plus : Side::minus, t};
            tr.plus_path.push_back(metric);
            tr.minus_path.push_back(metric);
        }
        if (record_rows_) {
            rows_.push_back(ScoreTraceRow{t, tr.observer, tr.victim, score, z_std, tr.plus_path.back(),
                                          tr.minus_path.back(),
                                          tr.alarm ? std::optional<Side>(tr.alarm->side) : std::nullopt});
        }
    }
}

double EpisodeMonitor::deviation(AgentId victim) const {
    double total = 0.0;
    for (const PairTrack& tr : tracks_)
        if (tr.victim == victim) total += std::abs(tr.last_score - tr.model->reference.mean);
    return total;
}

}  // namespace pgc
