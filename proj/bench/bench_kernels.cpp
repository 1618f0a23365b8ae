// Serial reference vs OpenMP kernels: batch gradients, episode batches and
// CEM candidate scoring. Prints wall time per kernel and checks that both
// paths agree bit for bit.

#include <chrono>
#include <cstdio>
#include <cstring>
#include <vector>

#include <omp.h>

#include "pgc/attacks.hpp"
#include "pgc/eval.hpp"
#include "pgc/pipeline.hpp"

using namespace pgc;

namespace {

template <class Fn>
double seconds(Fn&& fn) {
    const auto start = std::chrono::steady_clock::now();
    fn();
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

void report(const char* name, double serial, double parallel, bool same) {
    std::printf("%-18s serial %8.3fs  parallel %8.3fs  speedup %5.2fx  %s\n", name, serial, parallel,
                serial / parallel, same ? "identical" : "MISMATCH");
}

}  // namespace

int main() {
    std::printf("threads: %d\n", omp_get_max_threads());
    const EnvConfig env = EnvConfig::formation2d();
    const auto traces = collect_traces(env, episode_seeds(1, "bench", 200));
    const auto samples = pair_samples(env, traces, 1, 0);

    NetShape shape{observation_dim(env), 32, env.action_dim(), HeadKind::gaussian, 0, false};
    const PredictorNet net = PredictorNet::initialized(shape, 1e-3, 7);
    std::vector<const TrainingSample*> batch;
    for (const auto& s : samples) batch.push_back(&s);
    Vec gs(shape.param_count()), gp(shape.param_count());
    double ls = 0.0, lp = 0.0;
    const double ts = seconds([&] {
        for (int r = 0; r < 5; ++r) ls = batch_gradient_serial(net, batch, 25, gs);
    });
    const double tp = seconds([&] {
        for (int r = 0; r < 5; ++r) lp = batch_gradient_parallel(net, batch, 25, gp);
    });
    report("batch gradient", ts, tp, ls == lp && gs == gp);

    DetectorTraining training;
    training.net.hidden_size = 16;
    training.net.epochs = 1;
    const std::vector<AgentId> victims{0};
    const PredictorBank bank = make_bank(train_models(env, std::span(traces).first(40), training, 3, victims));
    AttackSpec attack;
    const auto seeds = episode_seeds(2, "bench-episodes", 200);
    std::vector<EpisodeResult> rs, rp;
    const double es = seconds([&] { rs = run_episodes_serial(env, bank, DetectorConfig{}, &attack, seeds); });
    const double ep = seconds([&] { rp = run_episodes_parallel(env, bank, DetectorConfig{}, &attack, seeds); });
    report("episode batch", es, ep, rs == rp);

    CemConfig cem;
    cem.population = 16;
    cem.iterations = 2;
    CemResult c1, c2;
    const int threads = omp_get_max_threads();
    const double cs = seconds([&] {
        omp_set_num_threads(1);
        c1 = cem_train(env, AttackKind::act, 0.0, cem, 5, 0, nullptr);
    });
    omp_set_num_threads(threads);
    const double cp = seconds([&] { c2 = cem_train(env, AttackKind::act, 0.0, cem, 5, 0, nullptr); });
    report("cem candidates", cs, cp, c1.policy.params == c2.policy.params);
    return 0;
}
