#include "pgc/config.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "pgc/baselines.hpp"
#include "pgc/errors.hpp"
#include "pgc/eval.hpp"

namespace pgc {

namespace {

std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return "";
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
}

struct Section {
    std::string name;
    std::size_t line = 0;
    std::map<std::string, std::pair<std::string, std::size_t>> values;  // key -> (value, line)
};

// Consumes keys from one section; whatever is left over is an unknown key.
class Reader {
public:
    explicit Reader(Section& s) : s_(s) {}

    bool has(const std::string& key) const { return s_.values.count(key) > 0; }

    template <class Fn>
    void take(const std::string& key, Fn&& apply) {
        auto it = s_.values.find(key);
        if (it == s_.values.end()) return;
        const auto [value, line] = it->second;
        s_.values.erase(it);
        try {
            apply(value);
        } catch (const InvalidConfig& e) {
            throw InvalidConfig(where(line) + key + ": " + e.what());
        } catch (const UnknownKind& e) {
            throw UnknownKind(where(line) + key + ": " + e.what());
        }
    }

    void finish() const {
        if (!s_.values.empty()) {
            const auto& [key, v] = *s_.values.begin();
            throw InvalidConfig(where(v.second) + "unknown key '" + key + "' in section [" + s_.name + "]");
        }
    }

private:
    static std::string where(std::size_t line) { return "line " + std::to_string(line) + ": "; }
    Section& s_;
};

double to_double(const std::string& v) {
    double out = 0.0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size()) throw InvalidConfig("not a number: '" + v + "'");
    return out;
}

std::uint64_t to_uint(const std::string& v) {
    std::uint64_t out = 0;
    const auto r = std::from_chars(v.data(), v.data() + v.size(), out);
    if (r.ec != std::errc() || r.ptr != v.data() + v.size())
        throw InvalidConfig("not a nonnegative integer: '" + v + "'");
    return out;
}

bool to_bool(const std::string& v) {
    if (v == "true") return true;
    if (v == "false") return false;
    throw InvalidConfig("expected true or false, got '" + v + "'");
}

std::vector<AgentId> to_ids(const std::string& v) {
    std::vector<AgentId> ids;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) ids.push_back(static_cast<AgentId>(to_uint(trim(item))));
    if (ids.empty()) throw InvalidConfig("empty id list");
    return ids;
}

std::string fmt(double x) {
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

std::vector<Section> split_sections(std::istream& in) {
    std::vector<Section> sections(1);
    std::set<std::string> seen{""};
    std::string raw;
    std::size_t line_no = 0;
    while (std::getline(in, raw)) {
        ++line_no;
        const auto hash = raw.find('#');
        const std::string line = trim(hash == std::string::npos ? raw : raw.substr(0, hash));
        if (line.empty()) continue;
        if (line.front() == '[') {
            if (line.back() != ']') throw InvalidConfig("line " + std::to_string(line_no) + ": malformed section header");
            std::string name = trim(line.substr(1, line.size() - 2));
            // collapse inner whitespace of "attack  name"
            std::stringstream ss(name);
            std::string a, b, extra;
            ss >> a >> b >> extra;
            if (!extra.empty()) throw InvalidConfig("line " + std::to_string(line_no) + ": malformed section header");
            name = b.empty() ? a : a + " " + b;
            if (!seen.insert(name).second)
                throw InvalidConfig("line " + std::to_string(line_no) + ": repeated section [" + name + "]");
            sections.push_back(Section{name, line_no, {}});
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw InvalidConfig("line " + std::to_string(line_no) + ": expected key = value");
        const std::string key = trim(line.substr(0, eq)), value = trim(line.substr(eq + 1));
        if (key.empty() || value.empty())
            throw InvalidConfig("line " + std::to_string(line_no) + ": expected key = value");
        if (!sections.back().values.emplace(key, std::make_pair(value, line_no)).second)
            throw InvalidConfig("line " + std::to_string(line_no) + ": repeated key '" + key + "'");
    }
    return sections;
}

void read_env(Section& s, EnvConfig& env) {
    Reader r(s);
    r.take("kind", [&](const std::string& v) {
        env = env_kind_from_string(v) == EnvKind::line1d ? EnvConfig::line1d() : EnvConfig::formation2d();
    });
    double noise_std = std::sqrt(env.noise_cov(0, 0));
    double noise_rho = env.action_dim() > 1 ? env.noise_cov(1, 0) / env.noise_cov(0, 0) : 0.0;
    double low = env.bounds.low[0], high = env.bounds.high[0];
    r.take("agents", [&](const std::string& v) { env.num_agents = to_uint(v); });
    r.take("horizon", [&](const std::string& v) { env.horizon = to_uint(v); });
    r.take("noise_std", [&](const std::string& v) { noise_std = to_double(v); });
    r.take("noise_rho", [&](const std::string& v) { noise_rho = to_double(v); });
    r.take("action_low", [&](const std::string& v) { low = to_double(v); });
    r.take("action_high", [&](const std::string& v) { high = to_double(v); });
    r.take("gain", [&](const std::string& v) { env.gain = to_double(v); });
    r.take("discount", [&](const std::string& v) { env.discount = to_double(v); });
    r.take("observability", [&](const std::string& v) { env.observability = observability_from_string(v); });
    r.take("step_size", [&](const std::string& v) { env.step_size = to_double(v); });
    r.take("spacing", [&](const std::string& v) { env.spacing = to_double(v); });
    r.take("init_half_width", [&](const std::string& v) { env.init_half_width = to_double(v); });
    r.take("goal_half_width", [&](const std::string& v) { env.goal_half_width = to_double(v); });
    r.finish();
    if (!(noise_std > 0.0)) throw InvalidConfig("[env] noise_std must be positive");
    if (!(noise_rho > -1.0 && noise_rho < 1.0)) throw InvalidConfig("[env] noise_rho must lie in (-1, 1)");
    env.noise_cov = SymmetricPD::correlated(env.action_dim(), noise_std, noise_rho);
    env.bounds = ActionBox::uniform(env.action_dim(), low, high);
}

void read_train(Section& s, TrainSettings& t) {
    Reader r(s);
    r.take("episodes", [&](const std::string& v) { t.episodes = to_uint(v); });
    r.take("head", [&](const std::string& v) { t.head = head_kind_from_string(v); });
    r.take("levels", [&](const std::string& v) { t.levels = to_uint(v); });
    r.take("share_params", [&](const std::string& v) { t.share_params = to_bool(v); });
    r.take("learning_rate", [&](const std::string& v) { t.net.learning_rate = to_double(v); });
    r.take("batch_size", [&](const std::string& v) { t.net.batch_size = to_uint(v); });
    r.take("epochs", [&](const std::string& v) { t.net.epochs = to_uint(v); });
    r.take("bptt", [&](const std::string& v) { t.net.bptt_len = to_uint(v); });
    r.take("hidden", [&](const std::string& v) { t.net.hidden_size = to_uint(v); });
    r.take("diag_floor", [&](const std::string& v) { t.net.diag_floor = to_double(v); });
    r.take("momentum", [&](const std::string& v) { t.net.momentum = to_double(v); });
    r.finish();
}

void read_detector(Section& s, DetectorConfig& d) {
    Reader r(s);
    r.take("mode", [&](const std::string& v) { d.mode = detection_mode_from_string(v); });
    r.take("w", [&](const std::string& v) { d.w = to_double(v); });
    r.take("beta_plus", [&](const std::string& v) { d.beta_plus = to_double(v); });
    r.take("beta_minus", [&](const std::string& v) { d.beta_minus = to_double(v); });
    r.take("quorum", [&](const std::string& v) { d.u = to_uint(v); });
    r.take("window", [&](const std::string& v) { d.window_len = to_uint(v); });
    r.finish();
}

void read_cem(Section& s, CemConfig& c) {
    Reader r(s);
    r.take("population", [&](const std::string& v) { c.population = to_uint(v); });
    r.take("elite_fraction", [&](const std::string& v) { c.elite_fraction = to_double(v); });
    r.take("iterations", [&](const std::string& v) { c.iterations = to_uint(v); });
    r.take("episodes_per_candidate", [&](const std::string& v) { c.episodes_per_candidate = to_uint(v); });
    r.take("init_std", [&](const std::string& v) { c.init_std = to_double(v); });
    r.take("min_std", [&](const std::string& v) { c.min_std = to_double(v); });
    r.finish();
}

void read_eval(Section& s, EvalSettings& e) {
    Reader r(s);
    r.take("clean_episodes", [&](const std::string& v) { e.clean_episodes = to_uint(v); });
    r.take("attacked_episodes", [&](const std::string& v) { e.attacked_episodes = to_uint(v); });
    r.take("grid_min", [&](const std::string& v) { e.grid_min = to_double(v); });
    r.take("grid_max", [&](const std::string& v) { e.grid_max = to_double(v); });
    r.take("grid_points", [&](const std::string& v) { e.grid_points = to_uint(v); });
    r.finish();
}

AttackEntry read_attack(Section& s, const std::string& name) {
    AttackEntry a{name, {}};
    Reader r(s);
    if (!r.has("kind")) throw InvalidConfig("line " + std::to_string(s.line) + ": [attack " + name + "] needs a kind");
    r.take("kind", [&](const std::string& v) { a.spec.kind = attack_kind_from_string(v); });
    r.take("victims", [&](const std::string& v) { a.spec.victims = to_ids(v); });
    r.take("t0", [&](const std::string& v) { a.spec.t0 = v == "never" ? AttackSpec::kNever : to_uint(v); });
    r.take("epsilon", [&](const std::string& v) { a.spec.epsilon = to_double(v); });
    r.take("lambda", [&](const std::string& v) { a.spec.lambda = to_double(v); });
    r.finish();
    return a;
}

}  // namespace

std::vector<double> RunConfig::grid() const { return log_grid(eval.grid_min, eval.grid_max, eval.grid_points); }

void RunConfig::validate() const {
    env.validate();
    if (train.net.hidden_size == 0 || train.net.batch_size == 0 || train.net.epochs == 0 || train.net.bptt_len == 0)
        throw InvalidConfig("[train] sizes must be positive");
    if (!(train.net.learning_rate > 0.0)) throw InvalidConfig("[train] learning_rate must be positive");
    if (!(train.net.diag_floor > 0.0)) throw InvalidConfig("[train] diag_floor must be positive");
    if (!(train.net.momentum >= 0.0 && train.net.momentum < 1.0)) throw InvalidConfig("[train] momentum must lie in [0, 1)");
    if (train.head == HeadKind::categorical) (void)categorical_head_size(train.levels, env.action_dim());
    if (train.head == HeadKind::categorical && train.levels < 2) throw InvalidConfig("[train] levels must be at least 2");
    if (!(detector.w >= 0.0)) throw InvalidConfig("[detector] w must be nonnegative");
    if (!(detector.beta_plus > 0.0 && detector.beta_minus > 0.0))
        throw InvalidConfig("[detector] thresholds must be positive");
    if (detector.u == 0) throw InvalidConfig("[detector] quorum must be at least 1");
    if (detector.u > observers_of(env, 0).size())
        throw InvalidConfig("[detector] quorum exceeds the number of observers of an agent");
    if (detector.mode == DetectionMode::window && detector.window_len == 0)
        throw InvalidConfig("[detector] window must be positive");
    cem.validate();
    (void)grid();
    std::set<std::string> names;
    for (const auto& a : attacks) {
        if (!names.insert(a.name).second) throw InvalidConfig("repeated attack name '" + a.name + "'");
        AttackSpec probe = a.spec;
        if (probe.kind == AttackKind::act || probe.kind == AttackKind::dyn)
            probe.policy = LinearPolicy::zeros(observation_dim(env), env.action_dim());
        probe.validate(env);
    }
}

RunConfig parse_config(std::istream& in) {
    std::vector<Section> sections = split_sections(in);
    RunConfig cfg;
    {
        Reader r(sections.front());
        r.take("seed", [&](const std::string& v) { cfg.seed = to_uint(v); });
        r.finish();
    }
    // env first: its kind resets the defaults the other sections validate against.
    for (auto& s : sections)
        if (s.name == "env") read_env(s, cfg.env);
    for (std::size_t k = 1; k < sections.size(); ++k) {
        Section& s = sections[k];
        if (s.name == "env") continue;
        if (s.name == "train") read_train(s, cfg.train);
        else if (s.name == "detector") read_detector(s, cfg.detector);
        else if (s.name == "cem") read_cem(s, cfg.cem);
        else if (s.name == "eval") read_eval(s, cfg.eval);
        else if (s.name.rfind("attack ", 0) == 0) cfg.attacks.push_back(read_attack(s, s.name.substr(7)));
        else throw InvalidConfig("line " + std::to_string(s.line) + ": unknown section [" + s.name + "]");
    }
    cfg.env.seed = cfg.seed;
    cfg.validate();
    return cfg;
}

RunConfig parse_config_text(const std::string& text) {
    std::istringstream in(text);
    return parse_config(in);
}

RunConfig load_config(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read config '" + path.string() + "'");
    return parse_config(in);
}

std::string canonical_text(const RunConfig& c) {
    std::ostringstream o;
    const EnvConfig& e = c.env;
    const double sd = std::sqrt(e.noise_cov(0, 0));
    const double rho = e.action_dim() > 1 ? e.noise_cov(1, 0) / e.noise_cov(0, 0) : 0.0;
    o << "seed = " << c.seed << "\n\n[env]\n"
      << "kind = " << to_string(e.kind) << "\nagents = " << e.num_agents << "\nhorizon = " << e.horizon
      << "\nnoise_std = " << fmt(sd) << "\nnoise_rho = " << fmt(rho) << "\naction_low = " << fmt(e.bounds.low[0])
      << "\naction_high = " << fmt(e.bounds.high[0]) << "\ngain = " << fmt(e.gain) << "\ndiscount = " << fmt(e.discount)
      << "\nobservability = " << to_string(e.observability) << "\nstep_size = " << fmt(e.step_size)
      << "\nspacing = " << fmt(e.spacing) << "\ninit_half_width = " << fmt(e.init_half_width)
      << "\ngoal_half_width = " << fmt(e.goal_half_width) << "\n";
    const TrainSettings& t = c.train;
    o << "\n[train]\nepisodes = " << t.episodes << "\nhead = " << to_string(t.head) << "\nlevels = " << t.levels
      << "\nshare_params = " << (t.share_params ? "true" : "false") << "\nlearning_rate = " << fmt(t.net.learning_rate)
      << "\nbatch_size = " << t.net.batch_size << "\nepochs = " << t.net.epochs << "\nbptt = " << t.net.bptt_len
      << "\nhidden = " << t.net.hidden_size << "\ndiag_floor = " << fmt(t.net.diag_floor)
      << "\nmomentum = " << fmt(t.net.momentum) << "\n";
    const DetectorConfig& d = c.detector;
    o << "\n[detector]\nmode = " << to_string(d.mode) << "\nw = " << fmt(d.w) << "\nbeta_plus = " << fmt(d.beta_plus)
      << "\nbeta_minus = " << fmt(d.beta_minus) << "\nquorum = " << d.u << "\nwindow = " << d.window_len << "\n";
    const CemConfig& m = c.cem;
    o << "\n[cem]\npopulation = " << m.population << "\nelite_fraction = " << fmt(m.elite_fraction)
      << "\niterations = " << m.iterations << "\nepisodes_per_candidate = " << m.episodes_per_candidate
      << "\ninit_std = " << fmt(m.init_std) << "\nmin_std = " << fmt(m.min_std) << "\n";
    const EvalSettings& v = c.eval;
    o << "\n[eval]\nclean_episodes = " << v.clean_episodes << "\nattacked_episodes = " << v.attacked_episodes
      << "\ngrid_min = " << fmt(v.grid_min) << "\ngrid_max = " << fmt(v.grid_max)
      << "\ngrid_points = " << v.grid_points << "\n";
    for (const auto& a : c.attacks) {
        o << "\n[attack " << a.name << "]\nkind = " << to_string(a.spec.kind) << "\nvictims = ";
        for (std::size_t k = 0; k < a.spec.victims.size(); ++k) o << (k ? "," : "") << a.spec.victims[k];
        o << "\nt0 = ";
        if (a.spec.t0 == AttackSpec::kNever) o << "never";
        else o << a.spec.t0;
        o << "\nepsilon = " << fmt(a.spec.epsilon) << "\nlambda = " << fmt(a.spec.lambda) << "\n";
    }
    return o.str();
}

std::string config_hash(const RunConfig& cfg) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a64(canonical_text(cfg))));
    return buf;
}

}  // namespace pgc
