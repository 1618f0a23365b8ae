#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "pgc/env.hpp"
#include "pgc/errors.hpp"

using namespace pgc;

TEST_CASE("neighbour sets") {
    EnvConfig ring = EnvConfig::formation2d();
    ring.observability = Observability::ring;
    const auto nb = observable_neighbors(ring, 0);
    CHECK(std::set<AgentId>(nb.begin(), nb.end()) == std::set<AgentId>{4, 1});

    EnvConfig full = EnvConfig::formation2d();
    full.num_agents = 4;
    CHECK(observable_neighbors(full, 2) == std::vector<AgentId>{0, 1, 3});
}

TEST_CASE("property: every agent is observed by someone") {
    for (Observability o : {Observability::ring, Observability::full}) {
        for (std::size_t k = 3; k <= 10; ++k) {
            EnvConfig cfg = EnvConfig::formation2d();
            cfg.num_agents = k;
            cfg.observability = o;
            for (AgentId j = 0; j < k; ++j) {
                bool seen = false;
                for (AgentId i = 0; i < k; ++i) {
                    const auto nb = observable_neighbors(cfg, i);
                    CHECK(std::find(nb.begin(), nb.end(), i) == nb.end());
                    seen = seen || std::find(nb.begin(), nb.end(), j) != nb.end();
                }
                CHECK(seen);
                CHECK_FALSE(observers_of(cfg, j).empty());
            }
        }
    }
}

TEST_CASE("reset is deterministic and observations have the declared length") {
    const EnvConfig cfg = EnvConfig::formation2d();
    const auto a = reset(cfg, 42), b = reset(cfg, 42), c = reset(cfg, 43);
    CHECK(a.state.positions == b.state.positions);
    CHECK(a.state.goal == b.state.goal);
    CHECK(a.state.positions != c.state.positions);
    CHECK(observation_dim(cfg) == 2 + 2 * 4 + 2);
    for (const auto& o : a.observations) CHECK(o.size() == 12);

    EnvConfig bad = cfg;
    bad.horizon = 0;
    CHECK_THROWS_AS(reset(bad, 1), InvalidConfig);
    bad = cfg;
    bad.num_agents = 2;
    CHECK_THROWS_AS(reset(bad, 1), InvalidConfig);
}

TEST_CASE("step dynamics and reward") {
    const EnvConfig cfg = EnvConfig::formation2d();
    const auto start = reset(cfg, 7);
    const JointAction zero(cfg.num_agents, Vec{0.0, 0.0});
    const auto still = step(cfg, start.state, zero);
    CHECK(still.state.positions == start.state.positions);
    CHECK(still.reward == doctest::Approx(-team_cost(cfg, start.state.positions, start.state.goal)));

    // move agent 0 by 0.1 straight towards the goal; direct cost evaluation
    JointAction toward = zero;
    const Vec& p = start.state.positions[0];
    const double dx = start.state.goal[0] - p[0], dy = start.state.goal[1] - p[1];
    const double norm = std::hypot(dx, dy);
    REQUIRE(norm > 0.1);  // no overshoot, so the goal term improves by exactly 0.1 / K
    toward[0] = Vec{dx / norm, dy / norm};
    const auto moved = step(cfg, start.state, toward);
    CHECK(moved.state.positions[0][0] == doctest::Approx(p[0] + 0.1 * dx / norm));
    const double to_goal_gain = 0.1 / static_cast<double>(cfg.num_agents);
    // the formation term only changes through pairs involving agent 0
    double formation_before = 0.0, formation_after = 0.0;
    for (AgentId j = 1; j < cfg.num_agents; ++j) {
        auto d = [&](const Vec& a, const Vec& b) { return std::hypot(a[0] - b[0], a[1] - b[1]); };
        formation_before += std::abs(d(p, start.state.positions[j]) - cfg.spacing);
        formation_after += std::abs(d(moved.state.positions[0], start.state.positions[j]) - cfg.spacing);
    }
    const double pairs = cfg.num_agents * (cfg.num_agents - 1) / 2.0;
    const double expected_delta = to_goal_gain - (formation_after - formation_before) / pairs;
    CHECK(moved.reward - still.reward == doctest::Approx(expected_delta).epsilon(1e-9));

    JointAction outside = zero;
    outside[2] = Vec{1.5, 0.0};
    CHECK_THROWS_AS(step(cfg, start.state, outside), OutOfBounds);

    EnvState s = start.state;
    bool done = false;
    for (std::size_t t = 0; t < cfg.horizon; ++t) {
        auto r = step(cfg, s, zero);
        s = r.state;
        done = r.done;
        CHECK(done == (t + 1 == cfg.horizon));
    }
    CHECK(done);
}

TEST_CASE("scripted policy: fixed point, clipping, correlated noise") {
    const EnvConfig cfg = EnvConfig::formation2d();
    // agent at the goal with neighbours placed symmetrically
    EnvState s;
    s.goal = Vec{0.2, -0.1};
    s.positions = {Vec{0.2, -0.1}, Vec{0.7, -0.1}, Vec{-0.3, -0.1}, Vec{0.2, 0.4}, Vec{0.2, -0.6}};
    const auto obs = observe(cfg, s, 0);
    const Vec a = scripted_policy(cfg, 0, obs, nullptr);
    CHECK(std::abs(a[0]) < 1e-12);
    CHECK(std::abs(a[1]) < 1e-12);

    EnvState far = s;
    far.goal = Vec{50.0, -50.0};
    const Vec clipped = scripted_policy(cfg, 0, observe(cfg, far, 0), nullptr);
    CHECK(clipped == Vec{1.0, -1.0});

    // pre-clipping regime: small noise so the box is never reached
    EnvConfig quiet = cfg;
    quiet.noise_cov = SymmetricPD::correlated(2, 0.2, 0.8);
    Rng rng = policy_rng(quiet, 3, 0);
    double sx = 0, sy = 0, sxx = 0, syy = 0, sxy = 0;
    const int n = 10000;
    for (int k = 0; k < n; ++k) {
        const Vec b = scripted_policy(quiet, 0, obs, &rng);
        sx += b[0];
        sy += b[1];
        sxx += b[0] * b[0];
        syy += b[1] * b[1];
        sxy += b[0] * b[1];
    }
    const double mx = sx / n, my = sy / n;
    const double corr = (sxy / n - mx * my) / std::sqrt((sxx / n - mx * mx) * (syy / n - my * my));
    CHECK(std::abs(corr - 0.8) < 0.03);
}

TEST_CASE("pair view puts the victim block first") {
    const EnvConfig cfg = EnvConfig::formation2d();
    const auto start = reset(cfg, 5);
    const auto& o = start.observations[2];
    const auto v = pair_view(cfg, 2, 3, o);
    // neighbours of 2 are {0, 1, 3, 4}; agent 3 sits in slot 2
    CHECK(v[2] == o[2 + 2 * 2]);
    CHECK(v[3] == o[3 + 2 * 2]);
    CHECK(v.size() == o.size());
    CHECK(v[0] == o[0]);
    CHECK(v.back() == o.back());
    CHECK_THROWS_AS(pair_view(cfg, 2, 2, o), IndexOutOfRange);
}

TEST_CASE("line1d uses a ring and scalar actions") {
    const EnvConfig cfg = EnvConfig::line1d();
    CHECK(cfg.action_dim() == 1);
    CHECK(cfg.horizon == 60);
    CHECK(observation_dim(cfg) == 1 + 2 + 1);
    const auto r = reset(cfg, 1);
    CHECK(r.observations[0].size() == 4);
}
