#include "pgc/rollout.hpp"

#include <cmath>
#include <optional>

namespace pgc {

RolloutOutcome simulate_episode(const EnvConfig& env, const AttackSpec* attack, std::uint64_t episode_seed,
                                EpisodeMonitor* monitor, EpisodeTrace* trace) {
    if (attack) attack->validate(env);
    ResetResult start = reset(env, episode_seed);
    EnvState state = std::move(start.state);
    std::vector<Observation> obs = std::move(start.observations);

    std::vector<Rng> policy_streams;
    policy_streams.reserve(env.num_agents);
    for (AgentId i = 0; i < env.num_agents; ++i) policy_streams.push_back(policy_rng(env, episode_seed, i));
    std::vector<std::optional<Rng>> attack_streams(env.num_agents);
    if (attack)
        for (AgentId v : attack->victims) attack_streams[v] = attack_rng(env, episode_seed, v);

    if (trace) {
        trace->env = env.kind;
        trace->num_agents = env.num_agents;
        trace->horizon = env.horizon;
        trace->obs_dim = observation_dim(env);
        trace->action_dim = env.action_dim();
        trace->episode_seed = episode_seed;
        trace->attack = attack ? to_string(attack->kind) : "none";
        trace->t0 = attack ? attack->t0 : AttackSpec::kNever;
        trace->steps.clear();
    }

    RolloutOutcome out;
    double discount = 1.0;
    for (std::size_t t = 0; t < env.horizon; ++t) {
        JointAction joint(env.num_agents);
        for (AgentId i = 0; i < env.num_agents; ++i) joint[i] = scripted_policy(env, i, obs[i], &policy_streams[i]);
        const bool active = attack && attack->active(t);
        if (active) {
            for (AgentId v : attack->victims) {
                AttackContext ctx{&env, &state, &*attack_streams[v]};
                joint[v] = apply_attack(*attack, t, v, obs[v], joint[v], ctx);
            }
        }
        StepResult next = step(env, state, joint);
        if (monitor) {
            monitor->observe(t, obs, joint);
            if (active)
                for (AgentId v : attack->victims) out.deviation_penalty += discount * monitor->deviation(v);
        }
        if (trace) {
            trace->steps.push_back(
                TraceStep{t, state.positions, state.goal, obs, joint, next.reward, static_cast<bool>(active)});
        }
        out.total_reward += next.reward;
        out.discounted_reward += discount * next.reward;
        discount *= env.discount;
        state = std::move(next.state);
        obs = std::move(next.observations);
    }
    return out;
}

EpisodeTrace collect_episode(const EnvConfig& env, std::uint64_t episode_seed) {
    EpisodeTrace trace;
    simulate_episode(env, nullptr, episode_seed, nullptr, &trace);
    return trace;
}

}  // namespace pgc
