#include "pgc/trace.hpp"

#include <fstream>

#include <json.hpp>

#include "pgc/errors.hpp"
#include "pgc/version.hpp"

namespace pgc {

using ojson = nlohmann::ordered_json;

void write_trace(std::ostream& out, const EpisodeTrace& trace) {
    ojson header;
    header["format"] = "pgc-trace";
    header["version"] = kTraceFormatVersion;
    header["env"] = to_string(trace.env);
    header["agents"] = trace.num_agents;
    header["horizon"] = trace.horizon;
    header["obs_dim"] = trace.obs_dim;
    header["action_dim"] = trace.action_dim;
    header["episode_seed"] = trace.episode_seed;
    header["attack"] = trace.attack;
    header["t0"] = trace.t0 == static_cast<std::size_t>(-1) ? -1 : static_cast<long long>(trace.t0);
    header["config_hash"] = trace.config_hash;
    header["tool_version"] = kToolVersion;
    out << header.dump() << '\n';
    for (const TraceStep& s : trace.steps) {
        ojson row;
        row["t"] = s.t;
        row["positions"] = s.positions;
        row["goal"] = s.goal;
        row["observations"] = s.observations;
        row["actions"] = s.actions;
        row["reward"] = s.reward;
        row["attack_active"] = s.attack_active;
        out << row.dump() << '\n';
    }
    if (!out) throw IoError("write_trace: stream failure");
}

EpisodeTrace read_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line)) throw FormatError("trace: empty file");
    EpisodeTrace trace;
    try {
        const auto header = ojson::parse(line);
        if (header.at("format") != "pgc-trace") throw FormatError("trace: not a pgc-trace file");
        if (header.at("version").get<int>() != kTraceFormatVersion) throw FormatError("trace: unsupported version");
        trace.env = env_kind_from_string(header.at("env").get<std::string>());
        trace.num_agents = header.at("agents").get<std::size_t>();
        trace.horizon = header.at("horizon").get<std::size_t>();
        trace.obs_dim = header.at("obs_dim").get<std::size_t>();
        trace.action_dim = header.at("action_dim").get<std::size_t>();
        trace.episode_seed = header.at("episode_seed").get<std::uint64_t>();
        trace.attack = header.at("attack").get<std::string>();
        const long long t0 = header.at("t0").get<long long>();
        trace.t0 = t0 < 0 ? static_cast<std::size_t>(-1) : static_cast<std::size_t>(t0);
        trace.config_hash = header.at("config_hash").get<std::string>();
        while (std::getline(in, line)) {
            if (line.empty()) continue;
            const auto row = ojson::parse(line);
            TraceStep s;
            s.t = row.at("t").get<std::size_t>();
            s.positions = row.at("positions").get<std::vector<Vec>>();
            s.goal = row.at("goal").get<Vec>();
            s.observations = row.at("observations").get<std::vector<Vec>>();
            s.actions = row.at("actions").get<std::vector<Vec>>();
            s.reward = row.at("reward").get<double>();
            s.attack_active = row.at("attack_active").get<bool>();
            trace.steps.push_back(std::move(s));
        }
    } catch (const nlohmann::json::exception& e) {
        throw FormatError(std::string("trace: ") + e.what());
    }
    return trace;
}

void save_trace(const std::filesystem::path& path, const EpisodeTrace& trace) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot open " + path.string() + " for writing");
    write_trace(out, trace);
}

EpisodeTrace load_trace(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path.string());
    return read_trace(in);
}

std::vector<TrainingSample> pair_samples(const EnvConfig& env, std::span<const EpisodeTrace> traces,
                                         AgentId observer, AgentId victim) {
    std::vector<TrainingSample> out;
    out.reserve(traces.size());
    for (const EpisodeTrace& tr : traces) {
        if (tr.obs_dim != observation_dim(env) || tr.action_dim != env.action_dim() || tr.num_agents != env.num_agents)
            throw DimensionMismatch("trace does not match the environment configuration");
        TrainingSample s;
        for (const TraceStep& st : tr.steps) {
            s.observations.push_back(pair_view(env, observer, victim, st.observations[observer]));
            s.actions.push_back(st.actions[victim]);
        }
        if (s.length() > 0) out.push_back(std::move(s));
    }
    return out;
}

std::vector<TrainingSample> shared_samples(const EnvConfig& env, std::span<const EpisodeTrace> traces,
                                           AgentId victim) {
    std::vector<TrainingSample> out;
    for (AgentId i : observers_of(env, victim)) {
        auto part = pair_samples(env, traces, i, victim);
        for (auto& s : part) out.push_back(std::move(s));
    }
    return out;
}

}  // namespace pgc
