#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pgc/errors.hpp"
#include "pgc/eval.hpp"
#include "pgc/pipeline.hpp"

using namespace pgc;

namespace {

PairOutcome pair(AgentId observer, AgentId victim, std::vector<double> plus, std::vector<double> minus) {
    PairOutcome p;
    p.observer = observer;
    p.victim = victim;
    p.max_plus = *std::max_element(plus.begin(), plus.end());
    p.max_minus = *std::max_element(minus.begin(), minus.end());
    p.plus_path = std::move(plus);
    p.minus_path = std::move(minus);
    return p;
}

// One monitored agent with a single observer whose c+ path is `path`.
EpisodeResult single(std::vector<double> path, bool attacked, std::size_t t0) {
    EpisodeResult r;
    r.attacked = attacked;
    r.t0 = t0;
    r.monitored = {0};
    r.pairs.push_back(pair(1, 0, path, std::vector<double>(path.size(), 0.0)));
    return r;
}

// Random cusum-like paths: nondecreasing bursts with resets.
std::vector<double> random_path(std::mt19937_64& rng, std::size_t n, double drift) {
    std::normal_distribution<double> g(drift, 1.0);
    std::vector<double> out(n);
    double c = 0.0;
    for (auto& x : out) x = c = std::max(0.0, c + g(rng));
    return out;
}

EpisodeResult random_result(std::mt19937_64& rng, std::size_t observers, std::vector<AgentId> monitored, double drift) {
    EpisodeResult r;
    r.monitored = monitored;
    for (AgentId v : monitored)
        for (AgentId i = 0; i < observers; ++i)
            r.pairs.push_back(pair(10 + i, v, random_path(rng, 40, drift), random_path(rng, 40, drift * 0.5)));
    return r;
}

}  // namespace

TEST_CASE("auc of a hand-computed case") {
    const std::vector<double> clean{1.0, 2.0}, attacked{1.5, 3.0};
    const auto grid = log_grid(0.1, 10.0, 5);
    const RocCurve c = roc_from_statistics(clean, attacked, grid);
    CHECK(c.auc == doctest::Approx(0.75).epsilon(1e-12));
    CHECK(c.auc == doctest::Approx(oracle::pairwise_auc(clean, attacked)).epsilon(1e-12));
    CHECK(c.points.front().beta == -std::numeric_limits<double>::infinity());
    CHECK(c.points.back().beta == std::numeric_limits<double>::infinity());
}

TEST_CASE("auc: separable, ties and random sets against the pairwise oracle") {
    const std::vector<double> none;
    const auto grid = log_grid(0.1, 100.0, 50);
    CHECK(roc_from_statistics(std::vector<double>{0.2, 0.3}, std::vector<double>{5.0, 7.0}, grid).auc == 1.0);
    CHECK(roc_from_statistics(std::vector<double>{1, 1, 1}, std::vector<double>{1, 1}, grid).auc == doctest::Approx(0.5));
    CHECK_THROWS_AS(roc_from_statistics(none, std::vector<double>{1.0}, grid), EmptySet);
    CHECK_THROWS_AS(roc_from_statistics(std::vector<double>{1.0}, none, grid), EmptySet);

    std::mt19937_64 rng(8);
    std::uniform_int_distribution<int> coarse(0, 6);
    for (int rep = 0; rep < 20; ++rep) {
        std::vector<double> c(30), a(25);
        for (double& x : c) x = coarse(rng) * 0.5;  // many ties
        for (double& x : a) x = coarse(rng) * 0.5 + 0.25 * (rep % 3);
        const RocCurve roc = roc_from_statistics(c, a, grid);
        CHECK(roc.auc == doctest::Approx(oracle::pairwise_auc(c, a)).epsilon(1e-12));
        for (std::size_t k = 1; k < roc.points.size(); ++k) {
            CHECK(roc.points[k].beta >= roc.points[k - 1].beta);
            CHECK(roc.points[k].fpr <= roc.points[k - 1].fpr);
            CHECK(roc.points[k].tpr <= roc.points[k - 1].tpr);
        }
    }
}

TEST_CASE("auc of identically distributed statistics is near one half") {
    std::mt19937_64 rng(77);
    std::normal_distribution<double> g;
    std::vector<double> c(2000), a(2000);
    for (double& x : c) x = g(rng);
    for (double& x : a) x = g(rng);
    CHECK(std::abs(roc_from_statistics(c, a, log_grid(0.1, 10.0, 20)).auc - 0.5) < 0.04);
}

TEST_CASE("time to detection examples") {
    // crosses 5 at step 9, onset 5
    std::vector<double> path(20, 0.0);
    for (std::size_t t = 9; t < 20; ++t) path[t] = 6.0;
    const std::vector<EpisodeResult> one{single(path, true, 5)};
    CHECK(time_to_detection(one, 5.0) == doctest::Approx(4.0));

    std::vector<double> p0(20, 0.0), p2(20, 0.0);
    for (std::size_t t = 10; t < 20; ++t) p0[t] = 9.0;
    for (std::size_t t = 12; t < 20; ++t) p2[t] = 9.0;
    const std::vector<EpisodeResult> two{single(p0, true, 10), single(p2, true, 10)};
    CHECK(time_to_detection(two, 5.0) == doctest::Approx(1.0));

    CHECK_THROWS_AS(time_to_detection(two, 9.0), NoTruePositives);  // strict threshold
    const std::vector<EpisodeResult> silent{single(std::vector<double>(20, 0.0), true, 3)};
    CHECK_THROWS_AS(time_to_detection(silent, 1.0), NoTruePositives);
}

TEST_CASE("the team statistic is sufficient for any joint threshold") {
    std::mt19937_64 rng(123);
    std::uniform_real_distribution<double> beta(0.05, 20.0);
    for (int rep = 0; rep < 40; ++rep) {
        const std::vector<AgentId> monitored = rep % 2 ? std::vector<AgentId>{0} : std::vector<AgentId>{0, 1};
        const EpisodeResult r = random_result(rng, 4, monitored, rep % 4 == 0 ? 0.5 : -0.3);
        for (std::size_t u : {1ul, 2ul, 4ul}) {
            const double s = team_statistic(r, u);
            for (int k = 0; k < 20; ++k) {
                const double b = beta(rng);
                CHECK((s > b) == detection_time(r, b, b, u).has_value());
            }
            CHECK(detection_time(r, s, s, u) == std::nullopt);
        }
    }
}

TEST_CASE("a larger quorum never detects earlier") {
    std::mt19937_64 rng(5);
    for (int rep = 0; rep < 50; ++rep) {
        const EpisodeResult r = random_result(rng, 4, {0}, 0.3);
        for (double b : {1.0, 3.0, 8.0}) {
            const auto t1 = detection_time(r, b, b, 1), t2 = detection_time(r, b, b, 2);
            if (t2) {
                REQUIRE(t1);
                CHECK(*t2 >= *t1);
            }
            CHECK(team_statistic(r, 2) <= team_statistic(r, 1));
        }
    }
}

TEST_CASE("multi-victim team alarms need every victim flagged") {
    EpisodeResult r;
    r.monitored = {0, 1};
    std::vector<double> early(10, 0.0), late(10, 0.0), zero(10, 0.0);
    for (std::size_t t = 2; t < 10; ++t) early[t] = 10.0;
    for (std::size_t t = 7; t < 10; ++t) late[t] = 10.0;
    r.pairs.push_back(pair(2, 0, early, zero));
    r.pairs.push_back(pair(3, 1, late, zero));
    CHECK(detection_time(r, 5.0, 5.0, 1) == std::size_t{7});
    r.pairs[1] = pair(3, 1, zero, zero);
    CHECK(detection_time(r, 5.0, 5.0, 1) == std::nullopt);
    CHECK(team_statistic(r, 1) == 0.0);
}

TEST_CASE("ttd curve: per-episode delays shrink as the threshold drops") {
    std::mt19937_64 rng(31);
    std::vector<EpisodeResult> clean, attacked;
    for (int k = 0; k < 30; ++k) clean.push_back(random_result(rng, 3, {0}, -0.5));
    for (int k = 0; k < 30; ++k) {
        attacked.push_back(random_result(rng, 3, {0}, 0.6));
        attacked.back().attacked = true;
        attacked.back().t0 = 0;
    }
    const auto grid = log_grid(0.5, 30.0, 12);
    for (const auto& r : attacked) {
        const EpisodeSummary s = summarize(r, grid);
        for (std::size_t g = 1; g < grid.size(); ++g) {
            if (s.detections[g] >= 0) {
                REQUIRE(s.detections[g - 1] >= 0);
                CHECK(s.detections[g - 1] <= s.detections[g]);
            }
        }
    }
    const auto curve = ttd_curve(clean, attacked, grid);
    REQUIRE(curve.size() == grid.size());
    for (std::size_t g = 1; g < curve.size(); ++g) {
        CHECK(curve[g].true_positives <= curve[g - 1].true_positives);
        CHECK(curve[g].fpr <= curve[g - 1].fpr);
    }
}

TEST_CASE("impact table") {
    std::map<std::string, std::vector<double>> rewards;
    rewards["none"] = std::vector<double>(100, 0.0);
    for (std::size_t k = 0; k < 100; ++k) rewards["none"][k] = k % 2 ? 1.0 : -1.0;
    rewards["act"] = std::vector<double>(120, -5.0);
    const auto table = impact_table(rewards);
    REQUIRE(table.size() == 2);
    CHECK(table[0].kind == "act");
    CHECK(table[0].mean_reward == -5.0);
    CHECK(table[0].std_error == 0.0);
    CHECK(table[1].mean_reward == doctest::Approx(0.0));
    // sample std of +-1 alternating over 100 is sqrt(100/99)
    CHECK(table[1].std_error == doctest::Approx(std::sqrt(100.0 / 99.0) / 10.0));
    rewards["grad"] = std::vector<double>(99, 0.0);
    CHECK_THROWS_AS(impact_table(rewards), InvalidConfig);
    CHECK_NOTHROW(impact_table(rewards, 10));
}

TEST_CASE("episode seeds differ between conditions and are stable") {
    const auto a = episode_seeds(1, "clean", 50), b = episode_seeds(1, "attack:rand", 50);
    CHECK(a == episode_seeds(1, "clean", 50));
    for (auto s : a) CHECK(std::find(b.begin(), b.end(), s) == b.end());
    CHECK(episode_seeds(2, "clean", 5) != episode_seeds(1, "clean", 5));
}

TEST_CASE("serial and parallel episode loops agree; real monitors behave") {
    const EnvConfig cfg = EnvConfig::formation2d();
    const auto traces = collect_traces(cfg, episode_seeds(3, "train", 60));
    DetectorTraining training;
    training.net.hidden_size = 8;
    training.net.epochs = 2;
    const std::vector<AgentId> victims{0, 1};
    const PredictorBank bank = make_bank(train_models(cfg, traces, training, 1, victims));

    AttackSpec spec;
    spec.victims = {0, 1};
    spec.t0 = 10;
    const auto seeds = episode_seeds(4, "attack:rand", 12);
    const auto serial = run_episodes_serial(cfg, bank, DetectorConfig{}, &spec, seeds);
    const auto parallel = run_episodes_parallel(cfg, bank, DetectorConfig{}, &spec, seeds);
    CHECK(serial == parallel);
    for (const auto& r : serial) {
        CHECK(r.attacked);
        CHECK(r.pairs.size() == 8);
        const auto restricted = restrict_to(r, std::vector<AgentId>{1}, DetectorConfig{});
        CHECK(restricted.pairs.size() == 4);
        CHECK(team_statistic(restricted, 1) >= team_statistic(r, 1));
        CHECK(detection_time(r, 5.0, 5.0, 1) == r.detection_time);
    }

    const AgentId missing[] = {3};
    CHECK_THROWS_AS(run_episode(cfg, bank, DetectorConfig{}, nullptr, 1, missing), MissingPredictor);

    AttackSpec null_attack = spec;
    null_attack.t0 = AttackSpec::kNever;
    const auto clean = run_episodes_serial(cfg, bank, DetectorConfig{}, nullptr, seeds, victims);
    const auto nul = run_episodes_serial(cfg, bank, DetectorConfig{}, &null_attack, seeds, victims);
    for (std::size_t k = 0; k < seeds.size(); ++k) {
        CHECK(nul[k].attacked);
        CHECK(nul[k].total_reward == clean[k].total_reward);
        CHECK(nul[k].pairs.size() == clean[k].pairs.size());
        CHECK(team_statistic(nul[k], 1) == team_statistic(clean[k], 1));
    }
}
