#pragma once

// Synthetic cooperative environments with continuous actions.
//
// formation2d: K agents in the plane move towards a shared goal,
//   p_i <- p_i + step_size * a_i, a_i in [-1, 1]^2.
// line1d: the same on a line with scalar actions.
//
// Observation of agent i (length p + p|K^i| + p, p = spatial dimension):
//   [ own position | p_k - p_i for k in K^i, in neighbour order | g - p_i ]
//
// Scripted policy of agent i:
//   a_i = clip( gain (g - p_i) + 0.2 gain mean_{k in K^i}(p_k - p_i) + xi ),
//   xi ~ N(0, noise_cov)

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "pgc/linalg.hpp"
#include "pgc/rng.hpp"

namespace pgc {

using AgentId = std::size_t;

enum class EnvKind { formation2d, line1d };
enum class Observability { ring, full };

const char* to_string(EnvKind kind);
const char* to_string(Observability obs);
EnvKind env_kind_from_string(const std::string& name);
Observability observability_from_string(const std::string& name);

struct ActionBox {
    Vec low;
    Vec high;

    static ActionBox uniform(std::size_t dim, double lo, double hi);
    std::size_t dim() const { return low.size(); }
    bool contains(std::span<const double> a, double tol = 1e-9) const;
    Vec clamp(std::span<const double> a) const;
    double width(std::size_t k) const { return high[k] - low[k]; }
};

struct EnvConfig {
    EnvKind kind = EnvKind::formation2d;
    std::size_t num_agents = 5;
    std::size_t horizon = 50;
    ActionBox bounds = ActionBox::uniform(2, -1.0, 1.0);
    SymmetricPD noise_cov = SymmetricPD::correlated(2, 0.55, 0.8);
    double gain = 0.3;
    double discount = 1.0;
    Observability observability = Observability::full;
    std::uint64_t seed = 0;
    double step_size = 0.1;
    double spacing = 0.5;
    double init_half_width = 1.0;  // initial positions uniform in [-w, w]^p
    double goal_half_width = 0.5;  // goal uniform in [-w, w]^p

    static EnvConfig formation2d();
    static EnvConfig line1d();

    std::size_t spatial_dim() const { return kind == EnvKind::formation2d ? 2 : 1; }
    std::size_t action_dim() const { return spatial_dim(); }
    double cohesion_gain() const { return 0.2 * gain; }

    /// Throws InvalidConfig.
    void validate() const;
};

struct EnvState {
    std::vector<Vec> positions;
    Vec goal;
    std::size_t t = 0;
};

using Observation = Vec;
using JointAction = std::vector<Vec>;

/// Ring: {i-1, i+1} mod K. Full: every other agent in increasing id order.
std::vector<AgentId> observable_neighbors(const EnvConfig& cfg, AgentId agent);

/// All i with j in K^i, increasing.
std::vector<AgentId> observers_of(const EnvConfig& cfg, AgentId victim);

std::size_t observation_dim(const EnvConfig& cfg);

Observation observe(const EnvConfig& cfg, const EnvState& state, AgentId agent);
std::vector<Observation> observe_all(const EnvConfig& cfg, const EnvState& state);

/// Observer's observation with the block of `victim` moved to the front of
/// the neighbour blocks. Every observer of a victim then sees it in the same
/// slot, which is what lets observers share one predictor per victim.
Observation pair_view(const EnvConfig& cfg, AgentId observer, AgentId victim, std::span<const double> obs);

struct ResetResult {
    EnvState state;
    std::vector<Observation> observations;
};

/// Positions uniform in the initial box, goal uniform in the goal box;
/// deterministic in (cfg.seed, episode_seed).
ResetResult reset(const EnvConfig& cfg, std::uint64_t episode_seed);

struct StepResult {
    EnvState state;
    std::vector<Observation> observations;
    double reward = 0.0;
    bool done = false;
};

/// Throws OutOfBounds when an action leaves the box by more than 1e-9.
StepResult step(const EnvConfig& cfg, const EnvState& state, const JointAction& joint);

/// Team cost of a configuration: mean distance to the goal plus the mean
/// absolute deviation of pairwise distances from the target spacing.
double team_cost(const EnvConfig& cfg, const std::vector<Vec>& positions, std::span<const double> goal);

/// Noise-free scripted action before clipping.
Vec policy_mean(const EnvConfig& cfg, AgentId agent, std::span<const double> obs);

/// Scripted stochastic action, clipped to the box. A null rng disables noise.
Vec scripted_policy(const EnvConfig& cfg, AgentId agent, std::span<const double> obs, Rng* rng);

/// Per-agent policy noise stream for one episode.
Rng policy_rng(const EnvConfig& cfg, std::uint64_t episode_seed, AgentId agent);

}  // namespace pgc
