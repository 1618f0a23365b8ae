#include "pgc/env.hpp"

#include <algorithm>
#include <cmath>

#include "pgc/errors.hpp"

namespace pgc {

const char* to_string(EnvKind kind) { return kind == EnvKind::formation2d ? "formation2d" : "line1d"; }
const char* to_string(Observability obs) { return obs == Observability::ring ? "ring" : "full"; }

EnvKind env_kind_from_string(const std::string& name) {
    if (name == "formation2d") return EnvKind::formation2d;
    if (name == "line1d") return EnvKind::line1d;
    throw InvalidConfig("unknown environment kind '" + name + "'");
}

Observability observability_from_string(const std::string& name) {
    if (name == "ring") return Observability::ring;
    if (name == "full") return Observability::full;
    throw InvalidConfig("unknown observability '" + name + "'");
}

ActionBox ActionBox::uniform(std::size_t dim, double lo, double hi) { return ActionBox{Vec(dim, lo), Vec(dim, hi)}; }

bool ActionBox::contains(std::span<const double> a, double tol) const {
    if (a.size() != dim()) return false;
    for (std::size_t k = 0; k < a.size(); ++k)
        if (!(a[k] >= low[k] - tol && a[k] <= high[k] + tol)) return false;
    return true;
}

Vec ActionBox::clamp(std::span<const double> a) const {
    Vec out(a.begin(), a.end());
    for (std::size_t k = 0; k < out.size(); ++k) out[k] = std::clamp(out[k], low[k], high[k]);
    return out;
}

EnvConfig EnvConfig::formation2d() { return EnvConfig{}; }

EnvConfig EnvConfig::line1d() {
    EnvConfig cfg;
    cfg.kind = EnvKind::line1d;
    cfg.horizon = 60;
    cfg.bounds = ActionBox::uniform(1, -1.0, 1.0);
    cfg.noise_cov = SymmetricPD::correlated(1, 0.3, 0.0);
    cfg.observability = Observability::ring;
    return cfg;
}

void EnvConfig::validate() const {
    if (num_agents < 3) throw InvalidConfig("environment needs at least 3 agents");
    if (horizon < 10) throw InvalidConfig("horizon must be at least 10");
    if (bounds.dim() != action_dim() || bounds.high.size() != action_dim())
        throw InvalidConfig("action bounds must have one interval per action dimension");
    for (std::size_t k = 0; k < bounds.dim(); ++k)
        if (bounds.low[k] > bounds.high[k]) throw InvalidConfig("action bounds: low exceeds high");
    if (noise_cov.dim() != action_dim()) throw InvalidConfig("noise covariance has wrong dimension");
    try {
        (void)cholesky(noise_cov);
    } catch (const NotPositiveDefinite&) {
        throw InvalidConfig("noise covariance is not positive definite");
    }
    if (!(gain > 0.0)) throw InvalidConfig("gain must be positive");
    if (!(discount > 0.0 && discount <= 1.0)) throw InvalidConfig("discount must lie in (0, 1]");
    if (!(step_size > 0.0)) throw InvalidConfig("step size must be positive");
}

std::vector<AgentId> observable_neighbors(const EnvConfig& cfg, AgentId agent) {
    const std::size_t k = cfg.num_agents;
    if (agent >= k) throw IndexOutOfRange("agent id out of range");
    if (cfg.observability == Observability::ring) return {(agent + k - 1) % k, (agent + 1) % k};
    std::vector<AgentId> out;
    for (AgentId j = 0; j < k; ++j)
        if (j != agent) out.push_back(j);
    return out;
}

std::vector<AgentId> observers_of(const EnvConfig& cfg, AgentId victim) {
    std::vector<AgentId> out;
    for (AgentId i = 0; i < cfg.num_agents; ++i) {
        const auto nb = observable_neighbors(cfg, i);
        if (std::find(nb.begin(), nb.end(), victim) != nb.end()) out.push_back(i);
    }
    return out;
}

std::size_t observation_dim(const EnvConfig& cfg) {
    const std::size_t neighbours = cfg.observability == Observability::ring ? 2 : cfg.num_agents - 1;
    return cfg.spatial_dim() * (2 + neighbours);
}

Observation observe(const EnvConfig& cfg, const EnvState& state, AgentId agent) {
    const std::size_t p = cfg.spatial_dim();
    Observation obs;
    obs.reserve(observation_dim(cfg));
    const Vec& own = state.positions[agent];
    obs.insert(obs.end(), own.begin(), own.end());
    for (AgentId k : observable_neighbors(cfg, agent))
        for (std::size_t c = 0; c < p; ++c) obs.push_back(state.positions[k][c] - own[c]);
    for (std::size_t c = 0; c < p; ++c) obs.push_back(state.goal[c] - own[c]);
    return obs;
}

std::vector<Observation> observe_all(const EnvConfig& cfg, const EnvState& state) {
    std::vector<Observation> out;
    out.reserve(cfg.num_agents);
    for (AgentId i = 0; i < cfg.num_agents; ++i) out.push_back(observe(cfg, state, i));
    return out;
}

Observation pair_view(const EnvConfig& cfg, AgentId observer, AgentId victim, std::span<const double> obs) {
    if (obs.size() != observation_dim(cfg)) throw DimensionMismatch("pair_view: observation length");
    const auto nb = observable_neighbors(cfg, observer);
    const auto it = std::find(nb.begin(), nb.end(), victim);
    if (it == nb.end()) throw IndexOutOfRange("pair_view: victim is not an observable neighbour");
    const std::size_t p = cfg.spatial_dim();
    const auto slot = static_cast<std::size_t>(it - nb.begin());
    Observation out(obs.begin(), obs.begin() + static_cast<std::ptrdiff_t>(p));
    const auto block = [&](std::size_t s) { return obs.begin() + static_cast<std::ptrdiff_t>(p * (1 + s)); };
    out.insert(out.end(), block(slot), block(slot) + static_cast<std::ptrdiff_t>(p));
    for (std::size_t s = 0; s < nb.size(); ++s)
        if (s != slot) out.insert(out.end(), block(s), block(s) + static_cast<std::ptrdiff_t>(p));
    out.insert(out.end(), obs.end() - static_cast<std::ptrdiff_t>(p), obs.end());
    return out;
}

ResetResult reset(const EnvConfig& cfg, std::uint64_t episode_seed) {
    cfg.validate();
    Rng rng = make_rng({cfg.seed, episode_seed, static_cast<std::uint64_t>(Stream::env_reset)});
    std::uniform_real_distribution<double> pos(-cfg.init_half_width, cfg.init_half_width);
    std::uniform_real_distribution<double> goal(-cfg.goal_half_width, cfg.goal_half_width);
    const std::size_t p = cfg.spatial_dim();
    EnvState s;
    s.goal.resize(p);
    for (double& g : s.goal) g = goal(rng);
    s.positions.assign(cfg.num_agents, Vec(p));
    for (Vec& q : s.positions)
        for (double& c : q) c = pos(rng);
    s.t = 0;
    auto obs = observe_all(cfg, s);
    return ResetResult{std::move(s), std::move(obs)};
}

double team_cost(const EnvConfig& cfg, const std::vector<Vec>& positions, std::span<const double> goal) {
    const std::size_t k = positions.size(), p = goal.size();
    auto dist = [p](std::span<const double> a, std::span<const double> b) {
        double acc = 0.0;
        for (std::size_t c = 0; c < p; ++c) acc += (a[c] - b[c]) * (a[c] - b[c]);
        return std::sqrt(acc);
    };
    double to_goal = 0.0;
    for (const Vec& q : positions) to_goal += dist(q, goal);
    to_goal /= static_cast<double>(k);
    double formation = 0.0;
    std::size_t pairs = 0;
    for (std::size_t i = 0; i < k; ++i)
        for (std::size_t j = i + 1; j < k; ++j, ++pairs)
            formation += std::abs(dist(positions[i], positions[j]) - cfg.spacing);
    return to_goal + formation / static_cast<double>(pairs);
}

StepResult step(const EnvConfig& cfg, const EnvState& state, const JointAction& joint) {
    if (joint.size() != cfg.num_agents) throw DimensionMismatch("step: one action per agent required");
    StepResult out;
    out.state = state;
    for (AgentId i = 0; i < cfg.num_agents; ++i) {
        if (!cfg.bounds.contains(joint[i])) throw OutOfBounds("step: action of agent " + std::to_string(i) + " outside the box");
        for (std::size_t c = 0; c < cfg.spatial_dim(); ++c) out.state.positions[i][c] += cfg.step_size * joint[i][c];
    }
    out.state.t = state.t + 1;
    out.reward = -team_cost(cfg, out.state.positions, out.state.goal);
    out.done = out.state.t >= cfg.horizon;
    out.observations = observe_all(cfg, out.state);
    return out;
}

Vec policy_mean(const EnvConfig& cfg, AgentId agent, std::span<const double> obs) {
    const std::size_t p = cfg.spatial_dim();
    const std::size_t neighbours = observable_neighbors(cfg, agent).size();
    if (obs.size() != observation_dim(cfg)) throw DimensionMismatch("policy_mean: observation length");
    Vec mean(p, 0.0);
    for (std::size_t c = 0; c < p; ++c) {
        double cohesion = 0.0;
        for (std::size_t s = 0; s < neighbours; ++s) cohesion += obs[p * (1 + s) + c];
        cohesion /= static_cast<double>(neighbours);
        mean[c] = cfg.gain * obs[obs.size() - p + c] + cfg.cohesion_gain() * cohesion;
    }
    return mean;
}

Vec scripted_policy(const EnvConfig& cfg, AgentId agent, std::span<const double> obs, Rng* rng) {
    Vec a = policy_mean(cfg, agent, obs);
    if (rng) {
        const LowerTriangular l = cholesky(cfg.noise_cov);
        std::normal_distribution<double> normal(0.0, 1.0);
        Vec xi(a.size());
        for (double& v : xi) v = normal(*rng);
        const Vec noise = multiply(l, xi);
        for (std::size_t c = 0; c < a.size(); ++c) a[c] += noise[c];
    }
    return cfg.bounds.clamp(a);
}

Rng policy_rng(const EnvConfig& cfg, std::uint64_t episode_seed, AgentId agent) {
    return make_rng({cfg.seed, episode_seed, static_cast<std::uint64_t>(Stream::policy), agent});
}

}  // namespace pgc
