// pgc: collect traces, train detectors and attacks, evaluate, report.
//
// Output layout under --out (default $PGC_OUT_ROOT, else ./pgc-out):
//   traces/episode_<n>.jsonl
//   models/<family>[-shared]/{pair_<i>_<j>,shared_<j>}.json, training.json
//   attacks/<name>.json, attacks/<name>_log.csv
//   eval/evaluation.json
//   report/{roc,ttd,impact}.csv, summary.json, roc_<condition>.svg
//
// Exit codes: 0 success, 2 configuration error, 3 missing artifact,
// 4 numerical failure, 1 anything else.

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <omp.h>

#include <CLI11.hpp>
#include <json.hpp>

#include "pgc/errors.hpp"
#include "pgc/pipeline.hpp"
#include "pgc/version.hpp"

namespace fs = std::filesystem;
using namespace pgc;

namespace {

struct Options {
    std::string config;
    std::optional<std::uint64_t> seed;
    std::string out;
    int workers = 0;
    bool share_params = false;
    bool diagonal_only = false;
    std::string mode;
    std::string attack;
};

struct Context {
    RunConfig cfg;
    fs::path out;
    Provenance provenance;
};

Context make_context(const Options& o) {
    Context c;
    c.cfg = load_config(o.config);
    if (o.seed) {
        c.cfg.seed = *o.seed;
        c.cfg.env.seed = *o.seed;
    }
    if (!o.mode.empty()) c.cfg.detector.mode = detection_mode_from_string(o.mode);
    if (o.share_params) c.cfg.train.share_params = true;
    if (o.diagonal_only) c.cfg.train.head = HeadKind::diagonal;
    c.cfg.validate();
    if (!o.out.empty()) c.out = o.out;
    else if (const char* root = std::getenv("PGC_OUT_ROOT")) c.out = root;
    else c.out = "pgc-out";
    c.provenance = Provenance{config_hash(c.cfg), kToolVersion};
    if (o.workers > 0) omp_set_num_threads(o.workers);
    return c;
}

void ensure_dir(const fs::path& dir) {
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());
}

fs::path model_dir(const Context& c) {
    std::string family = family_tag(c.cfg.train.head);
    if (c.cfg.train.share_params) family += "-shared";
    return c.out / "models" / family;
}

std::vector<fs::path> trace_files(const fs::path& dir) {
    std::vector<fs::path> files;
    if (fs::is_directory(dir))
        for (const auto& e : fs::directory_iterator(dir))
            if (e.path().extension() == ".jsonl") files.push_back(e.path());
    std::sort(files.begin(), files.end());
    return files;
}

const AttackEntry& find_attack(const RunConfig& cfg, const std::string& name) {
    for (const auto& a : cfg.attacks)
        if (a.name == name) return a;
    throw InvalidConfig("no [attack " + name + "] section in the config");
}

int cmd_collect(const Options& o) {
    const Context c = make_context(o);
    const fs::path dir = c.out / "traces";
    if (c.cfg.train.episodes == 0) {
        std::cerr << "warning: [train] episodes = 0, nothing collected\n";
        return 0;
    }
    ensure_dir(dir);
    const auto seeds = episode_seeds(c.cfg.seed, "collect", c.cfg.train.episodes);
    auto traces = collect_traces(c.cfg.env, seeds);
    for (std::size_t k = 0; k < traces.size(); ++k) {
        traces[k].config_hash = c.provenance.config_hash;
        char name[32];
        std::snprintf(name, sizeof name, "episode_%05zu.jsonl", k);
        save_trace(dir / name, traces[k]);
    }
    std::cout << "collected " << traces.size() << " episodes into " << dir.string() << "\n";
    return 0;
}

int cmd_train_predictor(const Options& o) {
    const Context c = make_context(o);
    const auto files = trace_files(c.out / "traces");
    if (files.empty()) throw MissingArtifact("no traces in '" + (c.out / "traces").string() + "'; run collect first");
    std::vector<EpisodeTrace> traces;
    for (const auto& f : files) traces.push_back(load_trace(f));

    const auto models = train_models(c.cfg.env, traces, detector_training(c.cfg.train), c.cfg.seed, {}, c.provenance);
    const fs::path dir = model_dir(c);
    ensure_dir(dir);
    nlohmann::ordered_json summary;
    summary["format"] = "pgc-training";
    summary["config_hash"] = c.provenance.config_hash;
    summary["tool_version"] = c.provenance.tool_version;
    summary["models"] = nlohmann::ordered_json::array();
    for (const auto& m : models) {
        const std::string file = model_file_name(m.observer, m.victim);
        save_model(dir / file, m);
        summary["models"].push_back({{"file", file}, {"final_loss", m.final_loss}});
    }
    std::ofstream(dir / "training.json") << summary.dump(2) << '\n';
    std::cout << "trained " << models.size() << " " << family_tag(c.cfg.train.head) << " models into "
              << dir.string() << "\n";
    return 0;
}

int cmd_train_attack(const Options& o) {
    const Context c = make_context(o);
    const AttackEntry& entry = find_attack(c.cfg, o.attack);
    const AttackKind kind = entry.spec.kind;
    if (kind != AttackKind::act && kind != AttackKind::dyn)
        throw UnknownTrainable(std::string(to_string(kind)) + " attacks need no training");
    std::optional<PredictorBank> bank;
    if (kind == AttackKind::dyn) bank = load_bank(model_dir(c));

    const AgentId victim = entry.spec.victims.front();
    const CemResult r = cem_train(c.cfg.env, kind, entry.spec.lambda, c.cfg.cem,
                                  derive_seed({c.cfg.seed, fnv1a64(entry.name)}), victim, bank ? &*bank : nullptr);
    const fs::path dir = c.out / "attacks";
    ensure_dir(dir);
    save_attack(dir / (entry.name + ".json"),
                StoredAttack{entry.name, kind, entry.spec.lambda, victim, r.policy, r.elite_objective, c.provenance});
    std::ofstream log(dir / (entry.name + "_log.csv"));
    log << "# pgc-report v1 config_hash=" << c.provenance.config_hash << " tool=" << c.provenance.tool_version << "\n"
        << "iteration,elite_objective\n";
    for (std::size_t k = 0; k < r.elite_objective.size(); ++k) log << k << ',' << r.elite_objective[k] << '\n';
    std::cout << "trained " << entry.name << ": best objective " << r.best_objective << "\n";
    return 0;
}

int write_report_from(const Context& c, const EvaluationRecord& record) {
    const ReportData data = build_report(record, canonical_text(c.cfg));
    write_report(c.out / "report", data);
    for (const auto& cond : data.conditions) std::cout << cond.name << " AUC " << cond.roc.auc << "\n";
    return 0;
}

int cmd_evaluate(const Options& o) {
    const Context c = make_context(o);
    const PredictorBank bank = load_bank(model_dir(c));
    std::vector<EvaluationCondition> conditions;
    for (const auto& a : c.cfg.attacks) {
        EvaluationCondition cond{a.name, a.spec};
        if (a.spec.kind == AttackKind::act || a.spec.kind == AttackKind::dyn)
            cond.spec.policy = load_attack(c.out / "attacks" / (a.name + ".json")).policy;
        conditions.push_back(std::move(cond));
    }
    const auto record = evaluate_conditions(c.cfg.env, bank, c.cfg.detector, conditions, c.cfg.eval.clean_episodes,
                                            c.cfg.eval.attacked_episodes, c.cfg.grid(), c.cfg.seed, c.provenance);
    ensure_dir(c.out / "eval");
    save_evaluation(c.out / "eval" / "evaluation.json", record);
    return write_report_from(c, record);
}

int cmd_report(const Options& o) {
    const Context c = make_context(o);
    return write_report_from(c, load_evaluation(c.out / "eval" / "evaluation.json"));
}

int exit_code_for(const std::exception& e) {
    if (dynamic_cast<const InvalidConfig*>(&e) || dynamic_cast<const UnknownKind*>(&e) ||
        dynamic_cast<const UnknownTrainable*>(&e))
        return 2;
    if (dynamic_cast<const MissingArtifact*>(&e) || dynamic_cast<const MissingPredictor*>(&e) ||
        dynamic_cast<const IoError*>(&e) || dynamic_cast<const FormatError*>(&e))
        return 3;
    if (dynamic_cast<const DivergenceDetected*>(&e) || dynamic_cast<const NotPositiveDefinite*>(&e))
        return 4;
    return 1;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Parameterized Gaussian CUSUM: detect action-manipulation attacks in cooperative multi-agent systems"};
    app.set_version_flag("--version", kToolVersion);
    app.require_subcommand(1);
    Options o;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--config", o.config, "experiment config file")->required()->check(CLI::ExistingFile);
        sub->add_option("--seed", o.seed, "override the base seed");
        sub->add_option("--out", o.out, "output directory (default $PGC_OUT_ROOT or ./pgc-out)");
        sub->add_option("--workers", o.workers, "worker threads (results do not depend on it)")
            ->check(CLI::NonNegativeNumber);
        sub->add_flag("--share-params", o.share_params, "one predictor per victim, shared by its observers");
        sub->add_flag("--diagonal-only", o.diagonal_only, "diagonal covariance (I-PGC)");
        sub->add_option("--mode", o.mode, "detection statistic")->check(CLI::IsMember({"cusum", "window"}));
    };

    std::function<int()> run;
    auto add = [&](const char* name, const char* help, int (*fn)(const Options&)) {
        CLI::App* sub = app.add_subcommand(name, help);
        common(sub);
        sub->callback([&run, fn, &o] { run = [fn, &o] { return fn(o); }; });
        return sub;
    };
    add("collect", "collect clean episodes", cmd_collect);
    add("train-predictor", "train the action predictors", cmd_train_predictor);
    add("train-attack", "train an act or dyn attack policy", cmd_train_attack)
        ->add_option("attack", o.attack, "attack section name")
        ->required();
    add("evaluate", "run clean and attacked episodes and write the report", cmd_evaluate);
    add("report", "rebuild the report from a stored evaluation", cmd_report);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }
    try {
        return run();
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return exit_code_for(e);
    }
}
