#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>

#include <json.hpp>

namespace fs = std::filesystem;

namespace {

const fs::path kRoot = fs::temp_directory_path() / "pgc_test_cli";

const char* kConfig = R"(seed = 5
[env]
horizon = 20
[train]
episodes = 30
hidden = 8
epochs = 2
[cem]
population = 10
iterations = 3
episodes_per_candidate = 2
[eval]
clean_episodes = 100
attacked_episodes = 100
grid_points = 10
[attack rand]
kind = rand
t0 = 5
[attack act]
kind = act
t0 = 5
[attack dyn]
kind = dyn
lambda = 1
t0 = 5
)";

fs::path write_config(const std::string& name, const std::string& text) {
    fs::create_directories(kRoot);
    const fs::path p = kRoot / name;
    std::ofstream(p) << text;
    return p;
}

int run(const std::string& args) {
    const std::string cmd = std::string(PGC_CLI_PATH) + " " + args + " > " + (kRoot / "last.log").string() + " 2>&1";
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::stringstream s;
    s << in.rdbuf();
    return s.str();
}

std::size_t count_files(const fs::path& dir, const std::string& prefix) {
    std::size_t n = 0;
    for (const auto& e : fs::directory_iterator(dir)) n += e.path().filename().string().rfind(prefix, 0) == 0;
    return n;
}

}  // namespace

TEST_CASE("cli: full pipeline, reproducible across runs and worker counts") {
    fs::remove_all(kRoot);
    const fs::path cfg = write_config("tiny.cfg", kConfig);
    const std::string base = "--config " + cfg.string();
    for (const char* out : {"a", "b"}) {
        const std::string o = base + " --out " + (kRoot / out).string() + (std::string(out) == "b" ? " --workers 1" : "");
        REQUIRE(run("collect " + o) == 0);
        REQUIRE(run("train-predictor " + o) == 0);
        REQUIRE(run("train-attack act " + o) == 0);
        REQUIRE(run("train-attack dyn " + o) == 0);
        REQUIRE(run("evaluate " + o) == 0);
    }
    const fs::path a = kRoot / "a", b = kRoot / "b";
    CHECK(count_files(a / "traces", "episode_") == 30);
    CHECK(count_files(a / "models" / "pgc", "pair_") == 20);
    CHECK(slurp(a / "traces" / "episode_00007.jsonl") == slurp(b / "traces" / "episode_00007.jsonl"));
    CHECK(slurp(a / "models" / "pgc" / "pair_1_0.json") == slurp(b / "models" / "pgc" / "pair_1_0.json"));
    CHECK(slurp(a / "attacks" / "dyn.json") == slurp(b / "attacks" / "dyn.json"));
    CHECK(slurp(a / "eval" / "evaluation.json") == slurp(b / "eval" / "evaluation.json"));
    for (const char* f : {"roc.csv", "ttd.csv", "impact.csv", "summary.json", "roc_act.svg"}) {
        CAPTURE(f);
        CHECK(slurp(a / "report" / f) == slurp(b / "report" / f));
    }

    const auto summary = nlohmann::json::parse(slurp(a / "report" / "summary.json"));
    CHECK(summary.at("auc").size() == 3);
    const std::string before = slurp(a / "report" / "roc.csv");
    fs::remove_all(a / "report");
    REQUIRE(run("report " + base + " --out " + a.string()) == 0);
    CHECK(slurp(a / "report" / "roc.csv") == before);
}

TEST_CASE("cli: shared and diagonal model families") {
    const fs::path cfg = write_config("tiny2.cfg", kConfig);
    const std::string o = "--config " + cfg.string() + " --out " + (kRoot / "c").string();
    REQUIRE(run("collect " + o) == 0);
    REQUIRE(run("train-predictor --share-params " + o) == 0);
    CHECK(count_files(kRoot / "c" / "models" / "pgc-shared", "shared_") == 5);
    REQUIRE(run("train-predictor --diagonal-only " + o) == 0);
    const auto m = nlohmann::json::parse(slurp(kRoot / "c" / "models" / "ipgc" / "pair_0_1.json"));
    CHECK(m.at("family") == "ipgc");
    CHECK(m.at("version") == 1);
}

TEST_CASE("cli: error exit codes") {
    const fs::path cfg = write_config("tiny3.cfg", kConfig);
    const std::string o = "--config " + cfg.string() + " --out " + (kRoot / "empty").string();
    CHECK(run("train-attack rand " + o) == 2);         // nothing to train
    CHECK(run("train-attack missing " + o) == 2);      // no such section
    CHECK(run("train-predictor " + o) == 3);           // no traces yet
    CHECK(run("evaluate " + o) == 3);                  // no models yet
    CHECK(run("report " + o) == 3);                    // no evaluation yet
    CHECK(run("train-attack dyn " + o) == 3);          // dyn needs predictors
    CHECK(run("collect --config " + (kRoot / "nope.cfg").string()) == 2);
    CHECK(run("collect " + o + " --mode sideways") == 2);
    const fs::path bad = write_config("bad.cfg", "[env]\nagents = 5\nagents = 6\n");
    CHECK(run("collect --config " + bad.string()) == 2);
    const fs::path zero = write_config("zero.cfg", "[train]\nepisodes = 0\n");
    CHECK(run("collect --config " + zero.string() + " --out " + (kRoot / "zero").string()) == 0);
}
