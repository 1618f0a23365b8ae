#include "pgc/pipeline.hpp"

#include <algorithm>
#include <set>

#include "pgc/errors.hpp"
#include "pgc/rollout.hpp"

namespace pgc {

std::vector<EpisodeTrace> collect_traces(const EnvConfig& env, std::span<const std::uint64_t> seeds) {
    env.validate();
    std::vector<EpisodeTrace> traces(seeds.size());
    const auto n = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (long long k = 0; k < n; ++k)
        traces[static_cast<std::size_t>(k)] = collect_episode(env, seeds[static_cast<std::size_t>(k)]);
    return traces;
}

DetectorTraining detector_training(const TrainSettings& t, bool diagonal_only) {
    DetectorTraining d{t.head, t.levels, t.share_params, t.net};
    if (diagonal_only) d.head = HeadKind::diagonal;
    return d;
}

namespace {

struct Job {
    std::optional<AgentId> observer;
    AgentId victim;
};

StoredModel train_one(const EnvConfig& env, std::span<const EpisodeTrace> traces, const DetectorTraining& training,
                      std::uint64_t seed, const Job& job, const Provenance& provenance) {
    const NetShape shape{observation_dim(env), training.net.hidden_size, env.action_dim(), training.head,
                         training.head == HeadKind::categorical ? training.levels : 0, false};
    const std::uint64_t job_seed =
        derive_seed({seed, static_cast<std::uint64_t>(Stream::init), job.observer ? *job.observer : 0xFFFF, job.victim});
    PredictorNet net = PredictorNet::initialized(shape, training.net.diag_floor, job_seed);

    StoredModel out;
    out.family = family_tag(training.head);
    out.observer = job.observer;
    out.victim = job.victim;
    out.provenance = provenance;

    auto samples_of = [&](std::span<const EpisodeTrace> part) {
        return job.observer ? pair_samples(env, part, *job.observer, job.victim) : shared_samples(env, part, job.victim);
    };
    if (training.head == HeadKind::categorical) {
        const std::size_t n_fit = traces.size() - traces.size() / 5;
        const auto fit = samples_of(traces.first(n_fit));
        const auto held = samples_of(traces.subspan(n_fit));
        if (fit.empty() || held.empty()) throw EmptySet("categorical training needs at least 5 episodes");
        const Quantizer q = Quantizer::for_box(env.bounds, training.levels);
        TrainResult r = train_discrete(std::move(net), fit, q, training.net, job_seed);
        const StandardMoments ref = calibrate_discrete(r.net, q, held);
        out.final_loss = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
        out.model = ScoreModel::categorical(std::move(r.net), q, ref);
    } else {
        const auto data = samples_of(traces);
        if (data.empty()) throw EmptySet("no training episodes");
        TrainResult r = train(std::move(net), data, training.net, job_seed);
        out.final_loss = r.loss_curve.empty() ? 0.0 : r.loss_curve.back();
        out.model = ScoreModel::gaussian(std::move(r.net));
    }
    return out;
}

}  // namespace

std::vector<StoredModel> train_models(const EnvConfig& env, std::span<const EpisodeTrace> traces,
                                      const DetectorTraining& training, std::uint64_t seed,
                                      std::span<const AgentId> victims, const Provenance& provenance) {
    env.validate();
    if (traces.empty()) throw MissingArtifact("no training traces");
    std::vector<AgentId> targets(victims.begin(), victims.end());
    if (targets.empty())
        for (AgentId v = 0; v < env.num_agents; ++v) targets.push_back(v);

    std::vector<Job> jobs;
    for (AgentId v : targets) {
        if (v >= env.num_agents) throw InvalidConfig("victim id out of range");
        if (training.share_params) jobs.push_back(Job{std::nullopt, v});
        else
            for (AgentId i : observers_of(env, v)) jobs.push_back(Job{i, v});
    }

    std::vector<StoredModel> models(jobs.size());
    std::vector<std::string> failures(jobs.size());
    const auto n = static_cast<long long>(jobs.size());
#pragma omp parallel for schedule(dynamic)
    for (long long k = 0; k < n; ++k) {
        const auto j = static_cast<std::size_t>(k);
        try {
            models[j] = train_one(env, traces, training, seed, jobs[j], provenance);
        } catch (const std::exception& e) {
            failures[j] = e.what();
        }
    }
    // Rethrow the first failure with its original type.
    for (std::size_t j = 0; j < jobs.size(); ++j)
        if (!failures[j].empty()) (void)train_one(env, traces, training, seed, jobs[j], provenance);
    return models;
}

PredictorBank make_bank(std::span<const StoredModel> models) {
    PredictorBank bank;
    for (const auto& m : models) {
        if (m.observer) bank.set_pair(*m.observer, m.victim, m.model);
        else bank.set_shared(m.victim, m.model);
    }
    return bank;
}

EpisodeResult restrict_to(const EpisodeResult& result, std::span<const AgentId> monitored, const DetectorConfig& cfg) {
    EpisodeResult r = result;
    r.monitored.assign(monitored.begin(), monitored.end());
    r.pairs.clear();
    r.agent_alarms.clear();
    std::map<AgentId, std::vector<std::size_t>> times;
    for (AgentId v : monitored) {
        if (std::find(result.monitored.begin(), result.monitored.end(), v) == result.monitored.end())
            throw InvalidConfig("restrict_to: agent was not monitored");
        times[v];
    }
    for (const auto& p : result.pairs) {
        if (!times.count(p.victim)) continue;
        if (p.alarm) times[p.victim].push_back(p.alarm->t);
        r.pairs.push_back(p);
    }
    for (auto& [v, ts] : times) {
        std::sort(ts.begin(), ts.end());
        r.agent_alarms[v] = ts.size() >= cfg.u ? std::optional<std::size_t>(ts[cfg.u - 1]) : std::nullopt;
    }
    r.detection_time.reset();
    bool all = true;
    for (const auto& [v, t] : r.agent_alarms) {
        if (!t) all = false;
        else if (all) r.detection_time = r.detection_time ? std::max(*r.detection_time, *t) : *t;
    }
    if (!all) r.detection_time.reset();
    return r;
}

EvaluationRecord evaluate_conditions(const EnvConfig& env, const PredictorBank& bank, const DetectorConfig& cfg,
                                     std::span<const EvaluationCondition> conditions, std::size_t clean_episodes,
                                     std::size_t attacked_episodes, std::span<const double> grid,
                                     std::uint64_t seed, const Provenance& provenance) {
    std::set<AgentId> all_victims;
    for (const auto& c : conditions) all_victims.insert(c.spec.victims.begin(), c.spec.victims.end());
    if (all_victims.empty()) all_victims.insert(0);
    const std::vector<AgentId> monitored(all_victims.begin(), all_victims.end());

    EvaluationRecord record;
    record.provenance = provenance;
    record.seed = seed;
    record.grid.assign(grid.begin(), grid.end());

    const auto clean_seeds = episode_seeds(seed, "clean", clean_episodes);
    const auto clean = run_episodes_parallel(env, bank, cfg, nullptr, clean_seeds, monitored);
    ConditionSummaries none{"none", "none", {}};
    for (const auto& r : clean) none.episodes.push_back(summarize(r, grid, cfg.u));
    record.conditions.push_back(std::move(none));

    for (const auto& c : conditions) {
        ConditionSummaries attacked{c.name, to_string(c.spec.kind), {}};
        const auto seeds = episode_seeds(seed, "attack:" + c.name, attacked_episodes);
        for (const auto& r : run_episodes_parallel(env, bank, cfg, &c.spec, seeds, c.spec.victims))
            attacked.episodes.push_back(summarize(r, grid, cfg.u));
        ConditionSummaries reference{"none:" + c.name, "reference", {}};
        for (const auto& r : clean) reference.episodes.push_back(summarize(restrict_to(r, c.spec.victims, cfg), grid, cfg.u));
        record.conditions.push_back(std::move(reference));
        record.conditions.push_back(std::move(attacked));
    }
    return record;
}

}  // namespace pgc
