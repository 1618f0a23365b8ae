#pragma once

// Action-manipulation attacks on one or more victim agents.
//   rand: uniform action in the box.
//   grad: Proj{ a - eps * sign(grad_a Q(a)) } with a one-step-lookahead team
//         value standing in for the victim's critic.
//   act:  learned policy minimising the team return.
//   dyn:  learned policy minimising team return + lambda * sum_i |z^{iv} - m_z|.
// act and dyn policies are linear in the victim's observation and are found
// with the cross-entropy method.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgc/env.hpp"

namespace pgc {

class PredictorBank;
class EpisodeMonitor;

enum class AttackKind { rand, grad, act, dyn };

const char* to_string(AttackKind kind);
AttackKind attack_kind_from_string(const std::string& name);

/// action = clamp(W obs + b); params holds W row-major followed by b.
struct LinearPolicy {
    std::size_t obs_dim = 0;
    std::size_t action_dim = 0;
    Vec params;

    static LinearPolicy zeros(std::size_t obs_dim, std::size_t action_dim);
    std::size_t param_count() const { return action_dim * (obs_dim + 1); }
    Vec act(std::span<const double> obs, const ActionBox& box) const;
};

struct AttackSpec {
    static constexpr std::size_t kNever = std::numeric_limits<std::size_t>::max();

    AttackKind kind = AttackKind::rand;
    std::vector<AgentId> victims{0};
    std::size_t t0 = 0;  // kNever: the attack never starts
    double epsilon = 0.2;
    double lambda = 0.0;
    std::optional<LinearPolicy> policy;  // act / dyn

    bool active(std::size_t t) const { return t0 != kNever && t >= t0; }
    bool targets(AgentId agent) const;
    void validate(const EnvConfig& env) const;
};

Vec rand_attack(const ActionBox& box, Rng& rng);

/// Sign-gradient step against q, with the gradient from central differences
/// (h = 1e-4), projected onto the box.
Vec grad_attack(std::span<const double> action, const std::function<double(std::span<const double>)>& q,
                double epsilon, const ActionBox& box);

/// Negated team cost after one step in which the victim plays `candidate`
/// and every other agent plays its noise-free scripted action. Higher is
/// better for the team.
double q_surrogate(const EnvConfig& env, const EnvState& state, AgentId victim, std::span<const double> candidate);

struct AttackContext {
    const EnvConfig* env = nullptr;
    const EnvState* state = nullptr;
    Rng* rng = nullptr;  // the victim's attack stream
};

/// Normal action before t0, the manipulated action from t0 on.
Vec apply_attack(const AttackSpec& spec, std::size_t t, AgentId victim, std::span<const double> victim_obs,
                 std::span<const double> normal_action, AttackContext& ctx);

/// Attack stream of one victim in one episode.
Rng attack_rng(const EnvConfig& env, std::uint64_t episode_seed, AgentId victim);

struct CemConfig {
    std::size_t population = 40;
    double elite_fraction = 0.2;
    std::size_t iterations = 20;
    std::size_t episodes_per_candidate = 4;
    double init_std = 0.5;
    double min_std = 0.02;

    void validate() const;
};

struct CemResult {
    LinearPolicy policy;
    std::vector<double> elite_objective;  // mean objective of the elite set, per iteration
    double best_objective = 0.0;
};

/// Mean over `seeds` of sum_t gamma^t (R_t + lambda sum_i |z_t^{iv} - m_z|),
/// the quantity the adversary minimises. detectors may be null when lambda
/// is 0.
double adversarial_objective(const EnvConfig& env, AttackKind kind, double lambda, const LinearPolicy& policy,
                             AgentId victim, const PredictorBank* detectors, std::span<const std::uint64_t> seeds);

/// Cross-entropy search over linear policies. Every candidate is scored on
/// the same evaluation episodes and the previous elites stay in the pool, so
/// the elite objective never increases. Candidates are evaluated in
/// parallel; results do not depend on the thread count.
CemResult cem_train(const EnvConfig& env, AttackKind kind, double lambda, const CemConfig& cem, std::uint64_t seed,
                    AgentId victim, const PredictorBank* detectors);

}  // namespace pgc
