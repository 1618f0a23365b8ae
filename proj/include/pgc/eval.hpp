#pragma once

// Episode orchestration and detection metrics.
//
// Labels are per episode: an attacked episode with any team alarm counts as
// detected, even if the alarm precedes the attack onset.
//
// Team decision: an agent is flagged once u of its observers alarm; with
// several monitored agents the team alarm needs every one of them flagged.
// Per episode, the team statistic is the smallest threshold the team alarm
// would NOT fire at: min over monitored agents of the u-th largest observer
// maximum of max(c+, c-). An alarm at beta fires iff statistic > beta, so the
// stored maxima are sufficient for any joint (beta+ = beta-) sweep.

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pgc/attacks.hpp"
#include "pgc/detector.hpp"
#include "pgc/env.hpp"
#include "pgc/monitor.hpp"

namespace pgc {

struct PairOutcome {
    AgentId observer = 0;
    AgentId victim = 0;
    std::vector<double> plus_path;
    std::vector<double> minus_path;
    double max_plus = 0.0;
    double max_minus = 0.0;
    std::optional<Alarm> alarm;  // at the configured thresholds
};

struct EpisodeResult {
    bool attacked = false;
    std::size_t t0 = AttackSpec::kNever;
    std::uint64_t seed = 0;
    double total_reward = 0.0;
    std::vector<AgentId> monitored;
    std::vector<PairOutcome> pairs;
    std::map<AgentId, std::optional<std::size_t>> agent_alarms;  // at the configured thresholds
    std::optional<std::size_t> detection_time;                     // team alarm, configured thresholds

    bool operator==(const EpisodeResult&) const;
};

/// attack may be null for a clean episode. An AttackSpec with t0 = kNever is
/// the "null attack": labelled attacked, behaviour unchanged. monitored
/// defaults to the attack's victims, or agent 0 without an attack.
EpisodeResult run_episode(const EnvConfig& env, const PredictorBank& bank, const DetectorConfig& cfg,
                          const AttackSpec* attack, std::uint64_t episode_seed,
                          std::span<const AgentId> monitored = {});

/// Episode seeds of one evaluation condition; conditions never share seeds.
std::vector<std::uint64_t> episode_seeds(std::uint64_t base_seed, const std::string& condition, std::size_t count);

/// The reference loop; kept for testing the parallel one.
std::vector<EpisodeResult> run_episodes_serial(const EnvConfig& env, const PredictorBank& bank,
                                               const DetectorConfig& cfg, const AttackSpec* attack,
                                               std::span<const std::uint64_t> seeds,
                                               std::span<const AgentId> monitored = {});
/// Same results in the same order, episodes spread over OpenMP threads.
std::vector<EpisodeResult> run_episodes_parallel(const EnvConfig& env, const PredictorBank& bank,
                                                 const DetectorConfig& cfg, const AttackSpec* attack,
                                                 std::span<const std::uint64_t> seeds,
                                                 std::span<const AgentId> monitored = {});

double team_statistic(const EpisodeResult& result, std::size_t u);

/// Team alarm time at the given thresholds, recomputed from the stored paths.
std::optional<std::size_t> detection_time(const EpisodeResult& result, double beta_plus, double beta_minus,
                                          std::size_t u);

struct RocPoint {
    double beta = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
};

struct RocCurve {
    std::vector<RocPoint> points;  // beta ascending; first beta is -inf, last +inf
    double auc = 0.0;
};

/// Log-spaced grid of n thresholds from lo to hi inclusive.
std::vector<double> log_grid(double lo, double hi, std::size_t n);

/// Trapezoidal AUC over points sorted by (fpr, tpr).
double trapezoid_auc(std::span<const RocPoint> points);

/// ROC from team statistics. The curve holds the grid points plus every
/// distinct statistic, so its AUC is exact (equal to the pairwise ordering
/// probability with ties counted 1/2). Throws EmptySet.
RocCurve roc_from_statistics(std::span<const double> clean, std::span<const double> attacked,
                             std::span<const double> grid);
RocCurve roc(std::span<const EpisodeResult> clean, std::span<const EpisodeResult> attacked,
             std::span<const double> grid, std::size_t u = 1);

/// Mean (detection time - t0) over attacked episodes detected at beta.
/// Throws NoTruePositives.
double time_to_detection(std::span<const EpisodeResult> attacked, double beta, std::size_t u = 1);

struct TtdPoint {
    double beta = 0.0;
    double fpr = 0.0;
    double tpr = 0.0;
    std::size_t true_positives = 0;
    std::optional<double> ttd;
};

std::vector<TtdPoint> ttd_curve(std::span<const EpisodeResult> clean, std::span<const EpisodeResult> attacked,
                                std::span<const double> grid, std::size_t u = 1);

/// What the reports need from an episode: the team statistic and the team
/// alarm time at every grid threshold (-1 when silent).
struct EpisodeSummary {
    bool attacked = false;
    std::size_t t0 = AttackSpec::kNever;
    std::uint64_t seed = 0;
    double total_reward = 0.0;
    double statistic = 0.0;
    std::vector<long long> detections;
};

EpisodeSummary summarize(const EpisodeResult& result, std::span<const double> grid, std::size_t u = 1);
std::vector<TtdPoint> ttd_curve(std::span<const EpisodeSummary> clean, std::span<const EpisodeSummary> attacked,
                                std::span<const double> grid);

struct ImpactRow {
    std::string kind;
    std::size_t episodes = 0;
    double mean_reward = 0.0;
    double std_error = 0.0;
};

inline constexpr std::size_t kMinImpactEpisodes = 100;

/// Mean and standard error of the total team reward per condition, in key
/// order. Throws InvalidConfig for a condition with fewer than min_episodes.
std::vector<ImpactRow> impact_table(const std::map<std::string, std::vector<EpisodeResult>>& by_kind,
                                    std::size_t min_episodes = kMinImpactEpisodes);
std::vector<ImpactRow> impact_table(const std::map<std::string, std::vector<double>>& rewards_by_kind,
                                    std::size_t min_episodes = kMinImpactEpisodes);

}  // namespace pgc
