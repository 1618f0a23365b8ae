#include "pgc/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "pgc/errors.hpp"
#include "pgc/monitor.hpp"
#include "pgc/rollout.hpp"

namespace pgc {

const char* to_string(AttackKind kind) {
    switch (kind) {
        case AttackKind::rand: return "rand";
        case AttackKind::grad: return "grad";
        case AttackKind::act: return "act";
        case AttackKind::dyn: return "dyn";
    }
    return "?";
}

AttackKind attack_kind_from_string(const std::string& name) {
    if (name == "rand") return AttackKind::rand;
    if (name == "grad") return AttackKind::grad;
    if (name == "act") return AttackKind::act;
    if (name == "dyn") return AttackKind::dyn;
    throw UnknownKind("unknown attack kind '" + name + "'");
}

LinearPolicy LinearPolicy::zeros(std::size_t obs_dim, std::size_t action_dim) {
    return LinearPolicy{obs_dim, action_dim, Vec(action_dim * (obs_dim + 1), 0.0)};
}

Vec LinearPolicy::act(std::span<const double> obs, const ActionBox& box) const {
    if (obs.size() != obs_dim) throw DimensionMismatch("linear policy: observation length");
    if (params.size() != param_count()) throw DimensionMismatch("linear policy: parameter count");
    Vec a(action_dim);
    const double* bias = params.data() + action_dim * obs_dim;
    for (std::size_t r = 0; r < action_dim; ++r) {
        double acc = bias[r];
        for (std::size_t c = 0; c < obs_dim; ++c) acc += params[r * obs_dim + c] * obs[c];
        a[r] = acc;
    }
    return box.clamp(a);
}

bool AttackSpec::targets(AgentId agent) const {
    return std::find(victims.begin(), victims.end(), agent) != victims.end();
}

void AttackSpec::validate(const EnvConfig& env) const {
    if (victims.empty()) throw InvalidConfig("attack needs at least one victim");
    for (AgentId v : victims)
        if (v >= env.num_agents) throw InvalidConfig("attack victim id out of range");
    if (kind == AttackKind::grad) {
        if (!(epsilon >= 0.0)) throw InvalidConfig("grad attack: epsilon must be nonnegative");
        for (std::size_t k = 0; k < env.action_dim(); ++k)
            if (epsilon > 0.5 * env.bounds.width(k) + 1e-12)
                throw InvalidConfig("grad attack: epsilon exceeds half the action-box width");
    }
    if (kind == AttackKind::dyn && !(lambda >= 0.0)) throw InvalidConfig("dyn attack: lambda must be nonnegative");
    if ((kind == AttackKind::act || kind == AttackKind::dyn)) {
        if (!policy) throw InvalidConfig(std::string(to_string(kind)) + " attack needs a trained policy");
        if (policy->obs_dim != observation_dim(env) || policy->action_dim != env.action_dim())
            throw InvalidConfig("attack policy does not match the environment");
    }
}

Vec rand_attack(const ActionBox& box, Rng& rng) {
    Vec a(box.dim());
    for (std::size_t k = 0; k < a.size(); ++k) {
        if (box.low[k] == box.high[k]) {
            a[k] = box.low[k];
            continue;
        }
        std::uniform_real_distribution<double> u(box.low[k], box.high[k]);
        a[k] = u(rng);
    }
    return a;
}

Vec grad_attack(std::span<const double> action, const std::function<double(std::span<const double>)>& q,
                double epsilon, const ActionBox& box) {
    constexpr double h = 1e-4;
    Vec out(action.begin(), action.end());
    Vec probe(action.begin(), action.end());
    for (std::size_t k = 0; k < out.size(); ++k) {
        probe[k] = action[k] + h;
        const double up = q(probe);
        probe[k] = action[k] - h;
        const double down = q(probe);
        probe[k] = action[k];
        const double g = (up - down) / (2.0 * h);
        const double sign = g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0);
        out[k] = action[k] - epsilon * sign;
    }
    return box.clamp(out);
}

double q_surrogate(const EnvConfig& env, const EnvState& state, AgentId victim, std::span<const double> candidate) {
    if (candidate.size() != env.action_dim()) throw DimensionMismatch("q_surrogate: action length");
    std::vector<Vec> next = state.positions;
    for (AgentId i = 0; i < env.num_agents; ++i) {
        Vec a = i == victim ? Vec(candidate.begin(), candidate.end())
                            : env.bounds.clamp(policy_mean(env, i, observe(env, state, i)));
        for (std::size_t c = 0; c < env.spatial_dim(); ++c) next[i][c] += env.step_size * a[c];
    }
    return -team_cost(env, next, state.goal);
}

Vec apply_attack(const AttackSpec& spec, std::size_t t, AgentId victim, std::span<const double> victim_obs,
                 std::span<const double> normal_action, AttackContext& ctx) {
    if (!spec.active(t) || !spec.targets(victim)) return Vec(normal_action.begin(), normal_action.end());
    const EnvConfig& env = *ctx.env;
    switch (spec.kind) {
        case AttackKind::rand:
            return rand_attack(env.bounds, *ctx.rng);
        case AttackKind::grad: {
            const EnvState& state = *ctx.state;
            auto q = [&](std::span<const double> a) { return q_surrogate(env, state, victim, a); };
            return grad_attack(normal_action, q, spec.epsilon, env.bounds);
        }
        case AttackKind::act:
        case AttackKind::dyn:
            if (!spec.policy) throw InvalidConfig("attack policy missing");
            return spec.policy->act(victim_obs, env.bounds);
    }
    throw UnknownKind("unknown attack kind");
}

Rng attack_rng(const EnvConfig& env, std::uint64_t episode_seed, AgentId victim) {
    return make_rng({env.seed, episode_seed, static_cast<std::uint64_t>(Stream::attack), victim});
}

void CemConfig::validate() const {
    if (population == 0 || iterations == 0 || episodes_per_candidate == 0)
        throw InvalidConfig("cem: counts must be positive");
    if (!(elite_fraction > 0.0 && elite_fraction < 1.0)) throw InvalidConfig("cem: elite fraction must lie in (0, 1)");
    if (!(init_std > 0.0)) throw InvalidConfig("cem: initial deviation must be positive");
}

double adversarial_objective(const EnvConfig& env, AttackKind kind, double lambda, const LinearPolicy& policy,
                             AgentId victim, const PredictorBank* detectors, std::span<const std::uint64_t> seeds) {
    if (kind != AttackKind::act && kind != AttackKind::dyn) throw UnknownTrainable("only act and dyn are trainable");
    if (seeds.empty()) throw EmptySet("adversarial_objective: no evaluation episodes");
    AttackSpec spec;
    spec.kind = kind;
    spec.victims = {victim};
    spec.lambda = lambda;
    spec.policy = policy;
    const DetectorConfig probe_cfg{};
    const AgentId monitored[] = {victim};
    double total = 0.0;
    for (std::uint64_t s : seeds) {
        std::optional<EpisodeMonitor> monitor;
        if (detectors) monitor.emplace(env, *detectors, probe_cfg, monitored);
        const RolloutOutcome out = simulate_episode(env, &spec, s, monitor ? &*monitor : nullptr);
        total += out.discounted_reward + (kind == AttackKind::dyn ? lambda * out.deviation_penalty : 0.0);
    }
    return total / static_cast<double>(seeds.size());
}

CemResult cem_train(const EnvConfig& env, AttackKind kind, double lambda, const CemConfig& cem, std::uint64_t seed,
                    AgentId victim, const PredictorBank* detectors) {
    if (kind != AttackKind::act && kind != AttackKind::dyn) throw UnknownTrainable("only act and dyn are trainable");
    if (kind == AttackKind::dyn && !detectors) throw MissingPredictor("dyn attack training needs trained detectors");
    cem.validate();
    env.validate();

    const std::size_t obs_dim = observation_dim(env), action_dim = env.action_dim();
    const std::size_t dim = action_dim * (obs_dim + 1);
    const std::size_t n_elite = std::max<std::size_t>(1, static_cast<std::size_t>(std::lround(
                                                             cem.elite_fraction * static_cast<double>(cem.population))));

    std::vector<std::uint64_t> eval_seeds(cem.episodes_per_candidate);
    for (std::size_t e = 0; e < eval_seeds.size(); ++e)
        eval_seeds[e] = derive_seed({seed, static_cast<std::uint64_t>(Stream::cem), 0xE7A1, e});

    Vec mean(dim, 0.0), stddev(dim, cem.init_std);
    struct Candidate {
        Vec params;
        double objective;
    };
    std::vector<Candidate> elites;
    CemResult result;

    for (std::size_t it = 0; it < cem.iterations; ++it) {
        std::vector<Candidate> pool(cem.population);
        for (std::size_t c = 0; c < cem.population; ++c) {
            Rng rng = make_rng({seed, static_cast<std::uint64_t>(Stream::cem), it, c});
            std::normal_distribution<double> normal(0.0, 1.0);
            pool[c].params.resize(dim);
            for (std::size_t k = 0; k < dim; ++k) pool[c].params[k] = mean[k] + stddev[k] * normal(rng);
        }
        const auto count = static_cast<long long>(pool.size());
#pragma omp parallel for schedule(dynamic)
        for (long long c = 0; c < count; ++c) {
            auto& cand = pool[static_cast<std::size_t>(c)];
            const LinearPolicy policy{obs_dim, action_dim, cand.params};
            cand.objective = adversarial_objective(env, kind, lambda, policy, victim, detectors, eval_seeds);
        }
        for (auto& e : elites) pool.push_back(std::move(e));
        // Stable order: ties broken by position, which is deterministic.
        std::stable_sort(pool.begin(), pool.end(),
                         [](const Candidate& a, const Candidate& b) { return a.objective < b.objective; });
        pool.resize(std::min(n_elite, pool.size()));
        elites = std::move(pool);

        double avg = 0.0;
        for (const auto& e : elites) avg += e.objective;
        result.elite_objective.push_back(avg / static_cast<double>(elites.size()));

        for (std::size_t k = 0; k < dim; ++k) {
            double m = 0.0;
            for (const auto& e : elites) m += e.params[k];
            m /= static_cast<double>(elites.size());
            double v = 0.0;
            for (const auto& e : elites) v += (e.params[k] - m) * (e.params[k] - m);
            v /= static_cast<double>(elites.size());
            mean[k] = m;
            stddev[k] = std::max(std::sqrt(v), cem.min_std);
        }
    }
    result.policy = LinearPolicy{obs_dim, action_dim, elites.front().params};
    result.best_objective = elites.front().objective;
    return result;
}

}  // namespace pgc
