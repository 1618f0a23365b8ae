#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pgc/config.hpp"
#include "pgc/errors.hpp"
#include "pgc/model_io.hpp"
#include "pgc/pipeline.hpp"
#include "pgc/report.hpp"
#include "pgc/rollout.hpp"
#include "pgc/trace.hpp"

using namespace pgc;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
    const fs::path p = fs::temp_directory_path() / ("pgc_test_io_" + name);
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

}  // namespace

TEST_CASE("traces round-trip bit for bit") {
    const EnvConfig cfg = EnvConfig::formation2d();
    EpisodeTrace t = collect_episode(cfg, 42);
    t.config_hash = "0123456789abcdef";
    std::stringstream s;
    write_trace(s, t);
    const EpisodeTrace back = read_trace(s);
    REQUIRE(back.steps.size() == t.steps.size());
    CHECK(back.episode_seed == 42);
    CHECK(back.t0 == t.t0);
    CHECK(back.config_hash == t.config_hash);
    for (std::size_t k = 0; k < t.steps.size(); ++k) {
        CHECK(back.steps[k].positions == t.steps[k].positions);
        CHECK(back.steps[k].observations == t.steps[k].observations);
        CHECK(back.steps[k].actions == t.steps[k].actions);
        CHECK(back.steps[k].reward == t.steps[k].reward);
    }
    std::stringstream again;
    write_trace(again, back);
    std::stringstream first;
    write_trace(first, t);
    CHECK(again.str() == first.str());

    std::stringstream bad("{\"format\":\"something-else\"}\n");
    CHECK_THROWS_AS(read_trace(bad), FormatError);
    CHECK_THROWS_AS(load_trace(scratch("trace") / "missing.jsonl"), IoError);
}

TEST_CASE("models and attacks round-trip") {
    const fs::path dir = scratch("models");
    NetShape shape{6, 4, 2, HeadKind::gaussian, 0};
    StoredModel m{"pgc", AgentId{1}, 0, ScoreModel::gaussian(PredictorNet::initialized(shape, 1e-3, 9)), 0.25,
                  {"feedfacecafebeef", "test"}};
    save_model(dir / model_file_name(m.observer, m.victim), m);
    const StoredModel back = load_model(dir / "pair_1_0.json");
    CHECK(back.family == "pgc");
    CHECK(back.observer == AgentId{1});
    CHECK(back.final_loss == 0.25);
    CHECK(back.provenance.config_hash == "feedfacecafebeef");
    const std::span<const double> w0 = m.model.net.weights(), w1 = back.model.net.weights();
    CHECK(std::equal(w0.begin(), w0.end(), w1.begin(), w1.end()));
    CHECK(model_file_name(std::nullopt, 3) == "shared_3.json");
    CHECK(load_bank(dir).find(1, 0) != nullptr);
    CHECK_THROWS_AS(load_bank(scratch("empty")), MissingArtifact);

    StoredAttack a{"act", AttackKind::dyn, 10.0, 0, LinearPolicy::zeros(6, 2), {3.0, 2.0}, {"h", "v"}};
    a.policy.params[3] = 0.1 + 0.2;
    save_attack(dir / "a.json", a);
    const StoredAttack ab = load_attack(dir / "a.json");
    CHECK(ab.kind == AttackKind::dyn);
    CHECK(ab.lambda == 10.0);
    CHECK(ab.policy.params == a.policy.params);
    CHECK(ab.elite_objective == a.elite_objective);

    std::ifstream in(dir / "a.json");
    const auto j = nlohmann::json::parse(in);
    CHECK(j.at("version") == 1);
    std::ofstream(dir / "broken.json") << "{ not json";
    CHECK_THROWS_AS(load_attack(dir / "broken.json"), FormatError);
}

TEST_CASE("config: strict parsing and canonical round trip") {
    const std::string text =
        "seed = 11  # comment\n"
        "[env]\nkind = line1d\nagents = 4\n"
        "[train]\nhidden = 16\nepochs = 3\nhead = diagonal\n"
        "[detector]\nquorum = 2\nbeta_plus = 3.5\n"
        "[attack slow]\nkind = grad\nvictims = 0,2\nt0 = 7\nepsilon = 0.1\n"
        "[attack off]\nkind = rand\nt0 = never\n";
    const RunConfig c = parse_config_text(text);
    CHECK(c.seed == 11);
    CHECK(c.env.kind == EnvKind::line1d);
    CHECK(c.env.num_agents == 4);
    CHECK(c.env.horizon == 60);  // the line1d default
    CHECK(c.train.head == HeadKind::diagonal);
    CHECK(c.detector.u == 2);
    REQUIRE(c.attacks.size() == 2);
    CHECK(c.attacks[0].spec.victims == std::vector<AgentId>{0, 2});
    CHECK(c.attacks[1].spec.t0 == AttackSpec::kNever);
    CHECK_NOTHROW(c.validate());

    const RunConfig again = parse_config_text(canonical_text(c));
    CHECK(canonical_text(again) == canonical_text(c));
    CHECK(config_hash(again) == config_hash(c));
    CHECK(config_hash(c).size() == 16);
    CHECK(config_hash(parse_config_text("seed = 12\n")) != config_hash(parse_config_text("seed = 11\n")));

    for (const char* bad : {"[env]\nagents = 3\nagents = 4\n", "[env]\ncolour = red\n", "[nope]\n",
                            "[env]\n[env]\n", "seed = -1\n", "[env]\nhorizon = ten\n", "[attack a]\nvictims = 1\n",
                            "[detector]\nbeta_plus\n", "[train]\nshare_params = yes\n"})
        CHECK_THROWS_AS(parse_config_text(bad), InvalidConfig);
    CHECK_THROWS_AS(parse_config_text("[attack a]\nkind = pgd\n"), UnknownKind);
    CHECK_THROWS_AS(parse_config_text("[detector]\nbeta_plus = 0\n").validate(), InvalidConfig);
    CHECK_THROWS_AS(parse_config_text("[detector]\nquorum = 9\n").validate(), InvalidConfig);
}

TEST_CASE("reports: csv round trip and empty evaluations") {
    const fs::path dir = scratch("report");
    std::vector<double> clean{0.3, 1.2, 2.5, 2.5, 0.01}, attacked{2.5, 4.0, 0.9, 12.0};
    const auto grid = log_grid(0.1, 100.0, 10);
    ReportData data;
    data.provenance = {"abcdabcdabcdabcd", "test"};
    data.config_text = "seed = 1\n";
    data.conditions.push_back({"rand", "rand", roc_from_statistics(clean, attacked, grid), {}});
    write_report(dir, data);
    const auto curves = read_roc_csv(dir / "roc.csv");
    REQUIRE(curves.size() == 1);
    CHECK(curves[0].name == "rand");
    CHECK(std::abs(trapezoid_auc(curves[0].points) - data.conditions[0].roc.auc) < 1e-12);
    CHECK(fs::exists(dir / "roc_rand.svg"));
    std::ifstream banner(dir / "roc.csv");
    std::string first;
    std::getline(banner, first);
    CHECK(first.rfind("# pgc-report v1 config_hash=abcdabcdabcdabcd", 0) == 0);

    const fs::path empty = scratch("report_empty");
    write_report(empty, ReportData{});
    std::ifstream in(empty / "summary.json");
    CHECK_NOTHROW((void)nlohmann::json::parse(in));
    CHECK(read_roc_csv(empty / "roc.csv").empty());
}

TEST_CASE("evaluation records round-trip and rebuild the same report") {
    EvaluationRecord rec;
    rec.seed = 3;
    rec.grid = log_grid(0.5, 20.0, 4);
    ConditionSummaries none{"none", "none", {}}, att{"rand", "rand", {}};
    for (int k = 0; k < 6; ++k) {
        none.episodes.push_back({false, AttackSpec::kNever, std::uint64_t(k), -1.0 * k, k * 0.7, {-1, -1, -1, -1}});
        att.episodes.push_back({true, 5, std::uint64_t(100 + k), -3.0 * k, k == 0 ? -INFINITY : k * 2.0, {9, 9, 12, -1}});
    }
    rec.conditions = {none, att};
    const fs::path dir = scratch("eval");
    save_evaluation(dir / "e.json", rec);
    const EvaluationRecord back = load_evaluation(dir / "e.json");
    REQUIRE(back.conditions.size() == 2);
    CHECK(back.conditions[1].episodes[0].statistic == -INFINITY);
    const ReportData a = build_report(rec, "x", 1), b = build_report(back, "x", 1);
    REQUIRE(a.conditions.size() == 1);
    CHECK(a.conditions[0].roc.auc == b.conditions[0].roc.auc);
    CHECK(a.conditions[0].ttd[0].ttd == doctest::Approx(4.0));
    CHECK(a.impact.size() == 2);
}
