#include "pgc/eval.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <stdexcept>
#include <limits>

#include "pgc/errors.hpp"
#include "pgc/rollout.hpp"

namespace pgc {

namespace {

bool same_alarm(const std::optional<Alarm>& a, const std::optional<Alarm>& b) {
    return a.has_value() == b.has_value() && (!a || *a == *b);
}

std::vector<AgentId> monitored_set(const AttackSpec* attack, std::span<const AgentId> monitored) {
    if (!monitored.empty()) return {monitored.begin(), monitored.end()};
    if (attack) return attack->victims;
    return {0};
}

// u-th smallest of the values present, or nothing.
std::optional<std::size_t> quorum_time(std::vector<std::size_t> times, std::size_t u) {
    if (u == 0 || times.size() < u) return std::nullopt;
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(u - 1), times.end());
    return times[u - 1];
}

std::optional<std::size_t> first_crossing(const PairOutcome& p, double beta_plus, double beta_minus) {
    for (std::size_t t = 0; t < p.plus_path.size(); ++t)
        if (p.plus_path[t] > beta_plus || p.minus_path[t] > beta_minus) return t;
    return std::nullopt;
}

// All monitored agents flagged: the latest of the per-agent times.
std::optional<std::size_t> team_time(const std::map<AgentId, std::optional<std::size_t>>& agent_times) {
    std::optional<std::size_t> out;
    for (const auto& [agent, t] : agent_times) {
        if (!t) return std::nullopt;
        out = out ? std::max(*out, *t) : *t;
    }
    return out;
}

}  // namespace

bool EpisodeResult::operator==(const EpisodeResult& o) const {
    if (attacked != o.attacked || t0 != o.t0 || seed != o.seed || total_reward != o.total_reward ||
        monitored != o.monitored || agent_alarms != o.agent_alarms || detection_time != o.detection_time ||
        pairs.size() != o.pairs.size())
        return false;
    for (std::size_t k = 0; k < pairs.size(); ++k) {
        const auto &a = pairs[k], &b = o.pairs[k];
        if (a.observer != b.observer || a.victim != b.victim || a.plus_path != b.plus_path ||
            a.minus_path != b.minus_path || !same_alarm(a.alarm, b.alarm))
            return false;
    }
    return true;
}

EpisodeResult run_episode(const EnvConfig& env, const PredictorBank& bank, const DetectorConfig& cfg,
                          const AttackSpec* attack, std::uint64_t episode_seed, std::span<const AgentId> monitored) {
    const std::vector<AgentId> agents = monitored_set(attack, monitored);
    EpisodeMonitor monitor(env, bank, cfg, agents);
    const RolloutOutcome outcome = simulate_episode(env, attack, episode_seed, &monitor);

    EpisodeResult r;
    r.attacked = attack != nullptr;
    r.t0 = attack ? attack->t0 : AttackSpec::kNever;
    r.seed = episode_seed;
    r.total_reward = outcome.total_reward;
    r.monitored = agents;

    std::map<AgentId, std::vector<std::size_t>> alarm_times;
    for (AgentId v : agents) alarm_times[v];
    for (const PairTrack& tr : monitor.tracks()) {
        PairOutcome p;
        p.observer = tr.observer;
        p.victim = tr.victim;
        p.plus_path = tr.plus_path;
        p.minus_path = tr.minus_path;
        p.max_plus = p.plus_path.empty() ? 0.0 : *std::max_element(p.plus_path.begin(), p.plus_path.end());
        p.max_minus = p.minus_path.empty() ? 0.0 : *std::max_element(p.minus_path.begin(), p.minus_path.end());
        p.alarm = tr.alarm;
        if (p.alarm) alarm_times[p.victim].push_back(p.alarm->t);
        r.pairs.push_back(std::move(p));
    }
    for (auto& [v, times] : alarm_times) r.agent_alarms[v] = quorum_time(times, cfg.u);
    r.detection_time = team_time(r.agent_alarms);
    return r;
}

std::vector<std::uint64_t> episode_seeds(std::uint64_t base_seed, const std::string& condition, std::size_t count) {
    const std::uint64_t tag = fnv1a64(condition);
    std::vector<std::uint64_t> seeds(count);
    for (std::size_t k = 0; k < count; ++k) seeds[k] = derive_seed({base_seed, tag, k});
    return seeds;
}

std::vector<EpisodeResult> run_episodes_serial(const EnvConfig& env, const PredictorBank& bank,
                                               const DetectorConfig& cfg, const AttackSpec* attack,
                                               std::span<const std::uint64_t> seeds,
                                               std::span<const AgentId> monitored) {
    std::vector<EpisodeResult> out;
    out.reserve(seeds.size());
    for (std::uint64_t s : seeds) out.push_back(run_episode(env, bank, cfg, attack, s, monitored));
    return out;
}

std::vector<EpisodeResult> run_episodes_parallel(const EnvConfig& env, const PredictorBank& bank,
                                                 const DetectorConfig& cfg, const AttackSpec* attack,
                                                 std::span<const std::uint64_t> seeds,
                                                 std::span<const AgentId> monitored) {
    if (attack) attack->validate(env);
    std::vector<EpisodeResult> out(seeds.size());
    std::vector<std::string> errors(seeds.size());
    const auto n = static_cast<long long>(seeds.size());
#pragma omp parallel for schedule(dynamic)
    for (long long k = 0; k < n; ++k) {
        const auto i = static_cast<std::size_t>(k);
        try {
            out[i] = run_episode(env, bank, cfg, attack, seeds[i], monitored);
        } catch (const std::exception& e) {
            errors[i] = e.what();
        }
    }
    // Exceptions cannot leave an OpenMP region; rerun the first failure
    // serially so the caller sees the original exception type.
    for (std::size_t i = 0; i < errors.size(); ++i)
        if (!errors[i].empty()) run_episode(env, bank, cfg, attack, seeds[i], monitored);
    return out;
}

double team_statistic(const EpisodeResult& result, std::size_t u) {
    if (u == 0) throw InvalidConfig("quorum must be at least 1");
    double team = std::numeric_limits<double>::infinity();
    for (AgentId v : result.monitored) {
        std::vector<double> maxima;
        for (const PairOutcome& p : result.pairs)
            if (p.victim == v) maxima.push_back(std::max(p.max_plus, p.max_minus));
        if (maxima.size() < u) return -std::numeric_limits<double>::infinity();
        std::nth_element(maxima.begin(), maxima.begin() + static_cast<std::ptrdiff_t>(u - 1), maxima.end(),
                         std::greater<>());
        team = std::min(team, maxima[u - 1]);
    }
    return team;
}

std::optional<std::size_t> detection_time(const EpisodeResult& result, double beta_plus, double beta_minus,
                                          std::size_t u) {
    if (u == 0) throw InvalidConfig("quorum must be at least 1");
    std::map<AgentId, std::vector<std::size_t>> times;
    for (AgentId v : result.monitored) times[v];
    for (const PairOutcome& p : result.pairs)
        if (auto t = first_crossing(p, beta_plus, beta_minus)) times[p.victim].push_back(*t);
    std::map<AgentId, std::optional<std::size_t>> agent;
    for (auto& [v, ts] : times) agent[v] = quorum_time(ts, u);
    return team_time(agent);
}

std::vector<double> log_grid(double lo, double hi, std::size_t n) {
    if (!(lo > 0.0 && hi > lo) || n < 2) throw InvalidConfig("log_grid needs 0 < lo < hi and n >= 2");
    std::vector<double> g(n);
    const double a = std::log(lo), b = std::log(hi);
    for (std::size_t k = 0; k < n; ++k) g[k] = std::exp(a + (b - a) * static_cast<double>(k) / static_cast<double>(n - 1));
    g.front() = lo;
    g.back() = hi;
    return g;
}

double trapezoid_auc(std::span<const RocPoint> points) {
    std::vector<RocPoint> p(points.begin(), points.end());
    std::sort(p.begin(), p.end(), [](const RocPoint& a, const RocPoint& b) {
        return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr;
    });
    double area = 0.0;
    for (std::size_t k = 1; k < p.size(); ++k) area += (p[k].fpr - p[k - 1].fpr) * 0.5 * (p[k].tpr + p[k - 1].tpr);
    return area;
}

RocCurve roc_from_statistics(std::span<const double> clean, std::span<const double> attacked,
                             std::span<const double> grid) {
    if (clean.empty() || attacked.empty()) throw EmptySet("roc needs clean and attacked episodes");
    std::vector<double> c(clean.begin(), clean.end()), a(attacked.begin(), attacked.end());
    std::sort(c.begin(), c.end());
    std::sort(a.begin(), a.end());
    auto rate_above = [](const std::vector<double>& sorted, double beta) {
        const auto it = std::upper_bound(sorted.begin(), sorted.end(), beta);
        return static_cast<double>(sorted.end() - it) / static_cast<double>(sorted.size());
    };

    std::vector<double> betas(grid.begin(), grid.end());
    betas.insert(betas.end(), c.begin(), c.end());
    betas.insert(betas.end(), a.begin(), a.end());
    betas.push_back(-std::numeric_limits<double>::infinity());
    betas.push_back(std::numeric_limits<double>::infinity());
    std::sort(betas.begin(), betas.end());
    betas.erase(std::unique(betas.begin(), betas.end()), betas.end());

    RocCurve curve;
    curve.points.reserve(betas.size());
    for (double b : betas) curve.points.push_back(RocPoint{b, rate_above(c, b), rate_above(a, b)});
    curve.auc = trapezoid_auc(curve.points);
    return curve;
}

RocCurve roc(std::span<const EpisodeResult> clean, std::span<const EpisodeResult> attacked,
             std::span<const double> grid, std::size_t u) {
    std::vector<double> c, a;
    c.reserve(clean.size());
    a.reserve(attacked.size());
    for (const auto& r : clean) c.push_back(team_statistic(r, u));
    for (const auto& r : attacked) a.push_back(team_statistic(r, u));
    return roc_from_statistics(c, a, grid);
}

double time_to_detection(std::span<const EpisodeResult> attacked, double beta, std::size_t u) {
    double total = 0.0;
    std::size_t n = 0;
    for (const auto& r : attacked) {
        if (!r.attacked) continue;
        if (auto t = detection_time(r, beta, beta, u)) {
            const double onset = r.t0 == AttackSpec::kNever ? 0.0 : static_cast<double>(r.t0);
            total += static_cast<double>(*t) - onset;
            ++n;
        }
    }
    if (n == 0) throw NoTruePositives("no attacked episode is detected at this threshold");
    return total / static_cast<double>(n);
}

std::vector<TtdPoint> ttd_curve(std::span<const EpisodeResult> clean, std::span<const EpisodeResult> attacked,
                                std::span<const double> grid, std::size_t u) {
    std::vector<EpisodeSummary> c, a;
    for (const auto& r : clean) c.push_back(summarize(r, grid, u));
    for (const auto& r : attacked) a.push_back(summarize(r, grid, u));
    return ttd_curve(c, a, grid);
}

EpisodeSummary summarize(const EpisodeResult& result, std::span<const double> grid, std::size_t u) {
    EpisodeSummary s{result.attacked, result.t0, result.seed, result.total_reward, team_statistic(result, u), {}};
    s.detections.reserve(grid.size());
    for (double beta : grid) {
        const auto t = detection_time(result, beta, beta, u);
        s.detections.push_back(t ? static_cast<long long>(*t) : -1);
    }
    return s;
}

std::vector<TtdPoint> ttd_curve(std::span<const EpisodeSummary> clean, std::span<const EpisodeSummary> attacked,
                                std::span<const double> grid) {
    if (clean.empty() || attacked.empty()) throw EmptySet("ttd curve needs clean and attacked episodes");
    std::vector<TtdPoint> out;
    for (std::size_t g = 0; g < grid.size(); ++g) {
        TtdPoint p;
        p.beta = grid[g];
        std::size_t fp = 0;
        for (const auto& r : clean) fp += r.statistic > p.beta;
        double delay = 0.0;
        for (const auto& r : attacked) {
            if (r.detections.size() != grid.size()) throw DimensionMismatch("episode summary does not match the grid");
            if (r.detections[g] < 0) continue;
            ++p.true_positives;
            const double onset = r.t0 == AttackSpec::kNever ? 0.0 : static_cast<double>(r.t0);
            delay += static_cast<double>(r.detections[g]) - onset;
        }
        p.fpr = static_cast<double>(fp) / static_cast<double>(clean.size());
        p.tpr = static_cast<double>(p.true_positives) / static_cast<double>(attacked.size());
        if (p.true_positives > 0) p.ttd = delay / static_cast<double>(p.true_positives);
        out.push_back(p);
    }
    return out;
}

std::vector<ImpactRow> impact_table(const std::map<std::string, std::vector<EpisodeResult>>& by_kind,
                                    std::size_t min_episodes) {
    std::map<std::string, std::vector<double>> rewards;
    for (const auto& [kind, results] : by_kind) {
        auto& r = rewards[kind];
        for (const auto& e : results) r.push_back(e.total_reward);
    }
    return impact_table(rewards, min_episodes);
}

std::vector<ImpactRow> impact_table(const std::map<std::string, std::vector<double>>& rewards_by_kind,
                                    std::size_t min_episodes) {
    std::vector<ImpactRow> rows;
    for (const auto& [kind, results] : rewards_by_kind) {
        if (results.size() < min_episodes || results.size() < 2)
            throw InvalidConfig("impact table: condition '" + kind + "' has " + std::to_string(results.size()) +
                                " episodes, fewer than " + std::to_string(min_episodes));
        double mean = 0.0;
        for (double r : results) mean += r;
        mean /= static_cast<double>(results.size());
        double var = 0.0;
        for (double r : results) var += (r - mean) * (r - mean);
        var /= static_cast<double>(results.size() - 1);
        rows.push_back(ImpactRow{kind, results.size(), mean, std::sqrt(var / static_cast<double>(results.size()))});
    }
    return rows;
}

}  // namespace pgc
