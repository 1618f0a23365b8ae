#include "pgc/model_io.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

#include "pgc/errors.hpp"

namespace pgc {

using ojson = nlohmann::ordered_json;

namespace {

constexpr int kFormatVersion = 1;

void write_json(const std::filesystem::path& path, const ojson& j) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump(1) << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

ojson read_json(const std::filesystem::path& path, const std::string& format) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot read '" + path.string() + "'");
    ojson j;
    try {
        j = ojson::parse(in);
    } catch (const ojson::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
    if (!j.is_object() || j.value("format", "") != format)
        throw FormatError(path.string() + ": not a " + format + " file");
    if (j.value("version", 0) != kFormatVersion)
        throw FormatError(path.string() + ": unsupported " + format + " version");
    return j;
}

Provenance read_provenance(const ojson& j) {
    return Provenance{j.at("config_hash").get<std::string>(), j.at("tool_version").get<std::string>()};
}

}  // namespace

std::string family_tag(HeadKind head) {
    switch (head) {
        case HeadKind::gaussian: return "pgc";
        case HeadKind::diagonal: return "ipgc";
        case HeadKind::categorical: return "discrete";
    }
    return "?";
}

std::string model_file_name(std::optional<AgentId> observer, AgentId victim) {
    if (observer) return "pair_" + std::to_string(*observer) + "_" + std::to_string(victim) + ".json";
    return "shared_" + std::to_string(victim) + ".json";
}

void save_model(const std::filesystem::path& path, const StoredModel& m) {
    const NetShape& s = m.model.net.shape();
    ojson j;
    j["format"] = "pgc-model";
    j["version"] = kFormatVersion;
    j["config_hash"] = m.provenance.config_hash;
    j["tool_version"] = m.provenance.tool_version;
    j["family"] = m.family;
    j["observer"] = m.observer ? ojson(*m.observer) : ojson(nullptr);
    j["victim"] = m.victim;
    j["final_loss"] = m.final_loss;
    j["shape"] = {{"obs_dim", s.obs_dim}, {"hidden", s.hidden},         {"action_dim", s.action_dim},
                  {"head", to_string(s.head)}, {"levels", s.levels}, {"prev_action", s.prev_action}};
    j["diag_floor"] = m.model.net.diag_floor();
    j["reference"] = {{"mean", m.model.reference.mean}, {"stddev", m.model.reference.stddev},
                      {"d", m.model.reference.d}};
    if (m.model.quantizer)
        j["quantizer"] = {{"levels", m.model.quantizer->levels},
                          {"low", m.model.quantizer->low},
                          {"high", m.model.quantizer->high}};
    const auto w = m.model.net.weights();
    j["weights"] = std::vector<double>(w.begin(), w.end());
    write_json(path, j);
}

StoredModel load_model(const std::filesystem::path& path) {
    const ojson j = read_json(path, "pgc-model");
    try {
        StoredModel m;
        m.provenance = read_provenance(j);
        m.family = j.at("family").get<std::string>();
        if (!j.at("observer").is_null()) m.observer = j.at("observer").get<AgentId>();
        m.victim = j.at("victim").get<AgentId>();
        m.final_loss = j.at("final_loss").get<double>();
        const ojson& sj = j.at("shape");
        NetShape shape{sj.at("obs_dim").get<std::size_t>(),   sj.at("hidden").get<std::size_t>(),
                       sj.at("action_dim").get<std::size_t>(), head_kind_from_string(sj.at("head").get<std::string>()),
                       sj.at("levels").get<std::size_t>(),     sj.at("prev_action").get<bool>()};
        PredictorNet net(shape, j.at("diag_floor").get<double>());
        net.set_weights(j.at("weights").get<Vec>());
        const ojson& rj = j.at("reference");
        const StandardMoments ref{rj.at("mean").get<double>(), rj.at("stddev").get<double>(), rj.at("d").get<std::size_t>()};
        std::optional<Quantizer> q;
        if (j.contains("quantizer")) {
            const ojson& qj = j.at("quantizer");
            q = Quantizer{qj.at("levels").get<std::size_t>(), qj.at("low").get<Vec>(), qj.at("high").get<Vec>()};
        }
        m.model = ScoreModel{std::move(net), std::move(q), ref};
        return m;
    } catch (const ojson::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    } catch (const DimensionMismatch& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

PredictorBank load_bank(const std::filesystem::path& dir) {
    if (!std::filesystem::is_directory(dir)) throw MissingArtifact("no model directory '" + dir.string() + "'");
    std::vector<std::filesystem::path> files;
    for (const auto& entry : std::filesystem::directory_iterator(dir))
        if (entry.path().extension() == ".json") {
            const std::string name = entry.path().filename().string();
            if (name.rfind("pair_", 0) == 0 || name.rfind("shared_", 0) == 0) files.push_back(entry.path());
        }
    if (files.empty()) throw MissingArtifact("no models in '" + dir.string() + "'");
    std::sort(files.begin(), files.end());
    PredictorBank bank;
    for (const auto& f : files) {
        StoredModel m = load_model(f);
        if (m.observer) bank.set_pair(*m.observer, m.victim, std::move(m.model));
        else bank.set_shared(m.victim, std::move(m.model));
    }
    return bank;
}

void save_attack(const std::filesystem::path& path, const StoredAttack& a) {
    ojson j;
    j["format"] = "pgc-attack";
    j["version"] = kFormatVersion;
    j["config_hash"] = a.provenance.config_hash;
    j["tool_version"] = a.provenance.tool_version;
    j["name"] = a.name;
    j["kind"] = to_string(a.kind);
    j["lambda"] = a.lambda;
    j["victim"] = a.victim;
    j["obs_dim"] = a.policy.obs_dim;
    j["action_dim"] = a.policy.action_dim;
    j["params"] = a.policy.params;
    j["elite_objective"] = a.elite_objective;
    write_json(path, j);
}

StoredAttack load_attack(const std::filesystem::path& path) {
    const ojson j = read_json(path, "pgc-attack");
    try {
        StoredAttack a;
        a.provenance = read_provenance(j);
        a.name = j.at("name").get<std::string>();
        a.kind = attack_kind_from_string(j.at("kind").get<std::string>());
        a.lambda = j.at("lambda").get<double>();
        a.victim = j.at("victim").get<AgentId>();
        a.policy = LinearPolicy{j.at("obs_dim").get<std::size_t>(), j.at("action_dim").get<std::size_t>(),
                                j.at("params").get<Vec>()};
        if (a.policy.params.size() != a.policy.param_count()) throw FormatError(path.string() + ": parameter count");
        a.elite_objective = j.at("elite_objective").get<std::vector<double>>();
        return a;
    } catch (const ojson::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

}  // namespace pgc
