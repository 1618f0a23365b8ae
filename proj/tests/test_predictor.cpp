#include <doctest.h>

#include <cmath>
#include <random>

#include "oracles.hpp"
#include "pgc/errors.hpp"
#include "pgc/predictor.hpp"

using namespace pgc;

namespace {

TrainingSample random_sample(std::size_t len, std::size_t obs_dim, std::size_t d, std::mt19937_64& rng) {
    std::normal_distribution<double> n(0.0, 1.0);
    TrainingSample s;
    for (std::size_t t = 0; t < len; ++t) {
        Vec o(obs_dim), a(d);
        for (double& x : o) x = n(rng);
        for (double& x : a) x = 0.5 * n(rng);
        s.observations.push_back(o);
        s.actions.push_back(a);
    }
    return s;
}

// Independent central differences over the whole mean per-step loss.
Vec numeric_gradient(const PredictorNet& net, const TrainingSample& s, double eps) {
    PredictorNet probe = net;
    Vec w(net.weights().begin(), net.weights().end());
    Vec g(w.size());
    for (std::size_t k = 0; k < w.size(); ++k) {
        Vec up = w, down = w;
        up[k] += eps;
        down[k] -= eps;
        probe.set_weights(up);
        const double lu = sequence_loss(probe, s);
        probe.set_weights(down);
        const double ld = sequence_loss(probe, s);
        g[k] = (lu - ld) / (2 * eps);
    }
    return g;
}

}  // namespace

TEST_CASE("zero weights give a zero mean and the identity factor") {
    const NetShape shape{3, 4, 2, HeadKind::gaussian, 0, false};
    const PredictorNet net(shape, 1e-3);
    auto [state, p] = predict_step(net, RecurrentState::zeros(4), Vec{0.3, -1.0, 2.0});
    CHECK(p.mu == Vec{0.0, 0.0});
    CHECK(p.chol(0, 0) == 1.0);
    CHECK(p.chol(1, 1) == 1.0);
    CHECK(p.chol(1, 0) == 0.0);
}

TEST_CASE("predict_step is deterministic and checks dimensions") {
    const NetShape shape{3, 5, 2, HeadKind::gaussian, 0, true};
    const auto net = PredictorNet::initialized(shape, 1e-3, 4);
    const Vec obs{0.1, 0.2, 0.3}, prev{0.5, -0.5};
    auto a = predict_step(net, RecurrentState::zeros(5), obs, std::span<const double>(prev));
    auto b = predict_step(net, RecurrentState::zeros(5), obs, std::span<const double>(prev));
    CHECK(a.first.hidden == b.first.hidden);
    CHECK(a.second.mu == b.second.mu);
    CHECK_THROWS_AS(predict_step(net, RecurrentState::zeros(5), Vec{1.0}, std::span<const double>(prev)),
                    DimensionMismatch);
    CHECK_THROWS_AS(predict_step(net, RecurrentState::zeros(4), obs, std::span<const double>(prev)), DimensionMismatch);
}

TEST_CASE("nll examples") {
    GaussianParams p{Vec{0.0}, LowerTriangular::identity(1)};
    CHECK(nll(p, Vec{0.0}) == 0.0);
    CHECK(nll(p, Vec{1.0}) == doctest::Approx(1.0));
    GaussianParams q{Vec{0.0, 0.0}, LowerTriangular::identity(2)};
    CHECK(nll(q, Vec{1.0, 1.0}) == doctest::Approx(2.0));
    CHECK_THROWS_AS(nll(q, Vec{1.0}), DimensionMismatch);
}

TEST_CASE("property: nll differences equal the Mahalanobis distance and match the density") {
    std::mt19937_64 rng(7);
    std::normal_distribution<double> n(0.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const std::size_t d = 1 + trial % 4;
        const NetShape shape{2, 3, d, HeadKind::gaussian, 0, false};
        Vec head(shape.head_outputs());
        for (double& x : head) x = n(rng);
        const auto p = gaussian_from_head(shape, 1e-3, head);
        REQUIRE(p.chol.has_positive_diagonal());
        Vec a(d);
        for (double& x : a) x = n(rng);
        CHECK(nll(p, a) - nll(p, p.mu) == doctest::Approx(mahalanobis_sq(a, p.mu, p.chol)).epsilon(1e-12));
        CHECK(nll(p, p.mu) <= nll(p, a));
        // -2 log N(a) = nll + d log(2 pi)
        oracle::Matrix s = oracle::zeros(d, d);
        for (std::size_t i = 0; i < d; ++i)
            for (std::size_t j = 0; j < d; ++j)
                for (std::size_t k = 0; k <= std::min(i, j); ++k) s[i][j] += p.chol(i, k) * p.chol(j, k);
        CHECK(nll(p, a) + d * std::log(2 * M_PI) == doctest::Approx(-2.0 * oracle::log_density(s, a, p.mu)).epsilon(1e-9));
    }
}

TEST_CASE("property: huge head outputs still give a valid factor") {
    const NetShape shape{1, 1, 3, HeadKind::gaussian, 0, false};
    Vec head(shape.head_outputs(), -800.0);
    const auto p = gaussian_from_head(shape, 1e-3, head);
    CHECK(p.chol.has_positive_diagonal());
    for (std::size_t k = 0; k < 3; ++k) CHECK(p.chol(k, k) >= 1e-3);
}

TEST_CASE("analytic gradient matches finite differences") {
    std::mt19937_64 rng(11);
    for (HeadKind head : {HeadKind::gaussian, HeadKind::diagonal}) {
        for (bool prev : {false, true}) {
            const NetShape shape{3, 4, 2, head, 0, prev};
            const auto net = PredictorNet::initialized(shape, 1e-3, 21);
            const auto s = random_sample(3, 3, 2, rng);
            const Vec analytic = grad_nll(net, s, 25);
            const Vec numeric = numeric_gradient(net, s, 1e-5);
            double err = 0.0;
            for (std::size_t k = 0; k < analytic.size(); ++k)
                err = std::max(err, std::abs(analytic[k] - numeric[k]) / std::max(1.0, std::abs(numeric[k])));
            CHECK(err < 1e-4);
            CHECK(gradient_check(net, s, 1e-5) < 1e-4);
        }
    }
}

TEST_CASE("gradient_check flags a corrupted gradient and rejects bad steps") {
    std::mt19937_64 rng(12);
    const NetShape shape{2, 3, 2, HeadKind::gaussian, 0, false};
    auto net = PredictorNet::initialized(shape, 1e-3, 3);
    const auto s = random_sample(4, 2, 2, rng);
    Vec g = grad_nll(net, s, 25);
    std::size_t big = 0;
    for (std::size_t k = 0; k < g.size(); ++k)
        if (std::abs(g[k]) > std::abs(g[big])) big = k;
    g[big] = -g[big];
    CHECK(std::abs(g[big]) > 0.25);
    CHECK(compare_gradient(net, s, g, 1e-5) > 0.5);
    CHECK_THROWS_AS(gradient_check(net, s, 0.0), InvalidConfig);
    CHECK_THROWS_AS(gradient_check(net, s, 1e-2), InvalidConfig);
}

TEST_CASE("the mean-head gradient vanishes at the optimum and scales with the deviation") {
    const NetShape shape{2, 3, 2, HeadKind::gaussian, 0, false};
    const PredictorNet zero(shape, 1e-3);  // mu == 0 everywhere
    TrainingSample s;
    for (int t = 0; t < 3; ++t) {
        s.observations.push_back(Vec{0.1 * t, -0.2});
        s.actions.push_back(Vec{0.0, 0.0});
    }
    const Vec g = grad_nll(zero, s, 25);
    // Head rows for mu are the first action_dim rows of the final layer;
    // their gradient is zero while the targets equal mu.
    const std::size_t h = shape.hidden, out = shape.head_outputs();
    const std::size_t head_w = g.size() - out * (h + 1);
    for (std::size_t r = 0; r < 2; ++r) {
        for (std::size_t c = 0; c < h; ++c) CHECK(g[head_w + r * h + c] == 0.0);
        CHECK(g[head_w + out * h + r] == 0.0);
    }

    // Doubling every target doubles the derivative along the mu bias.
    auto net = PredictorNet::initialized(shape, 1e-3, 5);
    Vec w(net.weights().begin(), net.weights().end());
    for (std::size_t r = 0; r < 2; ++r) w[head_w + out * h + r] = 0.0;
    for (std::size_t r = 0; r < 2; ++r)
        for (std::size_t c = 0; c < h; ++c) w[head_w + r * h + c] = 0.0;
    net.set_weights(w);
    TrainingSample one = s, two = s;
    for (std::size_t t = 0; t < 3; ++t) {
        one.actions[t] = Vec{0.3, -0.2};
        two.actions[t] = Vec{0.6, -0.4};
    }
    const Vec g1 = grad_nll(net, one, 25), g2 = grad_nll(net, two, 25);
    for (std::size_t r = 0; r < 2; ++r)
        CHECK(g2[head_w + out * h + r] == doctest::Approx(2.0 * g1[head_w + out * h + r]).epsilon(1e-9));
}

TEST_CASE("serial and parallel batch gradients are bit-identical") {
    std::mt19937_64 rng(13);
    const NetShape shape{3, 6, 2, HeadKind::gaussian, 0, false};
    const auto net = PredictorNet::initialized(shape, 1e-3, 8);
    std::vector<TrainingSample> data;
    for (int k = 0; k < 12; ++k) data.push_back(random_sample(30, 3, 2, rng));
    std::vector<const TrainingSample*> batch;
    for (const auto& s : data) batch.push_back(&s);
    Vec a(shape.param_count()), b(shape.param_count());
    const double la = batch_gradient_serial(net, batch, 25, a);
    const double lb = batch_gradient_parallel(net, batch, 25, b);
    CHECK(la == lb);
    CHECK(a == b);
}

TEST_CASE("training recovers i.i.d. Gaussian targets") {
    std::mt19937_64 rng(14);
    std::normal_distribution<double> n(0.0, 1.0);
    std::vector<TrainingSample> data;
    for (int e = 0; e < 200; ++e) {
        TrainingSample s;
        for (int t = 0; t < 20; ++t) {
            s.observations.push_back(Vec{n(rng), n(rng)});
            s.actions.push_back(Vec{n(rng), n(rng)});
        }
        data.push_back(s);
    }
    // oracle: sample moments of the targets
    double m[2] = {0, 0}, c[3] = {0, 0, 0};
    std::size_t cnt = 0;
    for (const auto& s : data)
        for (const auto& a : s.actions) {
            m[0] += a[0];
            m[1] += a[1];
            ++cnt;
        }
    m[0] /= cnt;
    m[1] /= cnt;
    for (const auto& s : data)
        for (const auto& a : s.actions) {
            c[0] += (a[0] - m[0]) * (a[0] - m[0]);
            c[1] += (a[1] - m[1]) * (a[0] - m[0]);
            c[2] += (a[1] - m[1]) * (a[1] - m[1]);
        }
    for (double& v : c) v /= cnt;

    TrainConfig cfg;
    cfg.hidden_size = 8;
    cfg.epochs = 15;
    cfg.learning_rate = 3e-3;
    const NetShape shape{2, 8, 2, HeadKind::gaussian, 0, false};
    const auto result = train(PredictorNet::initialized(shape, 1e-3, 1), data, cfg, 2);
    CHECK(result.loss_curve.back() < result.loss_curve.front());
    auto [st, p] = predict_step(result.net, RecurrentState::zeros(8), Vec{0.2, -0.4});
    CHECK(std::abs(p.mu[0] - m[0]) < 0.1);
    CHECK(std::abs(p.mu[1] - m[1]) < 0.1);
    const auto s = gram(p.chol);
    CHECK(std::abs(s(0, 0) - c[0]) < 0.1);
    CHECK(std::abs(s(1, 0) - c[1]) < 0.1);
    CHECK(std::abs(s(1, 1) - c[2]) < 0.1);
}

TEST_CASE("training on one repeated episode decreases the loss every epoch and is reproducible") {
    std::mt19937_64 rng(15);
    const auto s = random_sample(20, 3, 2, rng);
    std::vector<TrainingSample> data(20, s);
    TrainConfig cfg;
    cfg.hidden_size = 8;
    cfg.epochs = 10;
    cfg.learning_rate = 1e-3;
    const NetShape shape{3, 8, 2, HeadKind::gaussian, 0, false};
    const auto a = train(PredictorNet::initialized(shape, 1e-3, 1), data, cfg, 3);
    for (std::size_t e = 1; e < a.loss_curve.size(); ++e) CHECK(a.loss_curve[e] < a.loss_curve[e - 1]);
    const auto b = train(PredictorNet::initialized(shape, 1e-3, 1), data, cfg, 3);
    CHECK(std::equal(a.net.weights().begin(), a.net.weights().end(), b.net.weights().begin()));
}

TEST_CASE("a runaway learning rate raises DivergenceDetected") {
    std::mt19937_64 rng(16);
    std::vector<TrainingSample> data;
    for (int k = 0; k < 10; ++k) data.push_back(random_sample(20, 3, 2, rng));
    TrainConfig cfg;
    cfg.hidden_size = 4;
    cfg.epochs = 50;
    cfg.learning_rate = 1e6;
    const NetShape shape{3, 4, 2, HeadKind::gaussian, 0, false};
    CHECK_THROWS_AS(train(PredictorNet::initialized(shape, 1e-3, 1), data, cfg, 1), DivergenceDetected);
}
