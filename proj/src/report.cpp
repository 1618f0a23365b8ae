#include "pgc/report.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "pgc/errors.hpp"

namespace pgc {

using ojson = nlohmann::ordered_json;

namespace {

std::string num(double x) {
    if (std::isinf(x)) return x > 0 ? "inf" : "-inf";
    char buf[32];
    const auto r = std::to_chars(buf, buf + sizeof buf, x);
    return std::string(buf, r.ptr);
}

double parse_num(const std::string& s) {
    double x = 0.0;
    const auto r = std::from_chars(s.data(), s.data() + s.size(), x);
    if (r.ec != std::errc() || r.ptr != s.data() + s.size()) throw FormatError("not a number: '" + s + "'");
    return x;
}

std::ofstream open_out(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    return out;
}

void close_out(std::ofstream& out, const std::filesystem::path& path) {
    out.flush();
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string banner(const Provenance& p) {
    return "# pgc-report v1 config_hash=" + p.config_hash + " tool=" + p.tool_version + "\n";
}

// A curve name becomes part of a file name.
std::string file_safe(const std::string& name) {
    std::string out;
    for (char c : name) out += (std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_') ? c : '_';
    return out;
}

}  // namespace

std::string roc_svg(const std::string& title, const RocCurve& curve) {
    constexpr double size = 320.0, pad = 40.0;
    auto x = [&](double fpr) { return pad + fpr * size; };
    auto y = [&](double tpr) { return pad + (1.0 - tpr) * size; };
    std::ostringstream o;
    o << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << size + 2 * pad << "\" height=\"" << size + 2 * pad
      << "\">\n";
    o << "<rect x=\"" << pad << "\" y=\"" << pad << "\" width=\"" << size << "\" height=\"" << size
      << "\" fill=\"none\" stroke=\"black\"/>\n";
    o << "<line x1=\"" << x(0) << "\" y1=\"" << y(0) << "\" x2=\"" << x(1) << "\" y2=\"" << y(1)
      << "\" stroke=\"gray\" stroke-dasharray=\"4\"/>\n";
    std::vector<RocPoint> pts = curve.points;
    std::sort(pts.begin(), pts.end(),
              [](const RocPoint& a, const RocPoint& b) { return a.fpr != b.fpr ? a.fpr < b.fpr : a.tpr < b.tpr; });
    o << "<polyline fill=\"none\" stroke=\"steelblue\" stroke-width=\"2\" points=\"";
    for (const auto& p : pts) o << x(p.fpr) << ',' << y(p.tpr) << ' ';
    o << "\"/>\n";
    std::string safe_title;
    for (char c : title) safe_title += (c == '<' || c == '>' || c == '&') ? '_' : c;
    o << "<text x=\"" << pad << "\" y=\"" << pad - 12 << "\" font-family=\"sans-serif\" font-size=\"14\">"
      << safe_title << " (AUC " << num(std::round(curve.auc * 1000.0) / 1000.0) << ")</text>\n";
    o << "<text x=\"" << pad + size / 2 - 12 << "\" y=\"" << size + 2 * pad - 10
      << "\" font-family=\"sans-serif\" font-size=\"12\">FPR</text>\n";
    o << "<text x=\"6\" y=\"" << pad + size / 2 << "\" font-family=\"sans-serif\" font-size=\"12\">TPR</text>\n";
    o << "</svg>\n";
    return o.str();
}

void write_report(const std::filesystem::path& dir, const ReportData& data) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create '" + dir.string() + "': " + ec.message());

    {
        const auto path = dir / "roc.csv";
        auto out = open_out(path);
        out << banner(data.provenance) << "curve,beta,fpr,tpr\n";
        for (const auto& c : data.conditions)
            for (const auto& p : c.roc.points)
                out << c.name << ',' << num(p.beta) << ',' << num(p.fpr) << ',' << num(p.tpr) << '\n';
        close_out(out, path);
    }
    {
        const auto path = dir / "ttd.csv";
        auto out = open_out(path);
        out << banner(data.provenance) << "curve,beta,fpr,tpr,true_positives,ttd\n";
        for (const auto& c : data.conditions)
            for (const auto& p : c.ttd)
                out << c.name << ',' << num(p.beta) << ',' << num(p.fpr) << ',' << num(p.tpr) << ','
                    << p.true_positives << ',' << (p.ttd ? num(*p.ttd) : "") << '\n';
        close_out(out, path);
    }
    {
        const auto path = dir / "impact.csv";
        auto out = open_out(path);
        out << banner(data.provenance) << "kind,episodes,mean_reward,std_error\n";
        for (const auto& r : data.impact)
            out << r.kind << ',' << r.episodes << ',' << num(r.mean_reward) << ',' << num(r.std_error) << '\n';
        close_out(out, path);
    }
    {
        ojson j;
        j["format"] = "pgc-summary";
        j["config_hash"] = data.provenance.config_hash;
        j["tool_version"] = data.provenance.tool_version;
        j["seed"] = data.seed;
        j["config"] = data.config_text;
        j["auc"] = ojson::object();
        j["conditions"] = ojson::array();
        for (const auto& c : data.conditions) {
            j["auc"][c.name] = c.roc.auc;
            j["conditions"].push_back({{"name", c.name}, {"kind", c.kind}, {"auc", c.roc.auc}});
        }
        j["impact"] = ojson::array();
        for (const auto& r : data.impact)
            j["impact"].push_back(
                {{"kind", r.kind}, {"episodes", r.episodes}, {"mean_reward", r.mean_reward}, {"std_error", r.std_error}});
        const auto path = dir / "summary.json";
        auto out = open_out(path);
        out << j.dump(2) << '\n';
        close_out(out, path);
    }
    for (const auto& c : data.conditions) {
        const auto path = dir / ("roc_" + file_safe(c.name) + ".svg");
        auto out = open_out(path);
        out << roc_svg(c.name, c.roc);
        close_out(out, path);
    }
}

std::vector<NamedCurve> read_roc_csv(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot read '" + path.string() + "'");
    std::vector<NamedCurve> curves;
    std::string line;
    bool header = false;
    while (std::getline(in, line)) {
        if (line.empty() || line.front() == '#') continue;
        if (!header) {
            if (line != "curve,beta,fpr,tpr") throw FormatError(path.string() + ": unexpected header");
            header = true;
            continue;
        }
        std::stringstream ss(line);
        std::string name, beta, fpr, tpr;
        if (!std::getline(ss, name, ',') || !std::getline(ss, beta, ',') || !std::getline(ss, fpr, ',') ||
            !std::getline(ss, tpr))
            throw FormatError(path.string() + ": malformed row '" + line + "'");
        if (curves.empty() || curves.back().name != name) curves.push_back(NamedCurve{name, {}});
        curves.back().points.push_back(RocPoint{parse_num(beta), parse_num(fpr), parse_num(tpr)});
    }
    if (!header) throw FormatError(path.string() + ": missing header");
    return curves;
}

void save_evaluation(const std::filesystem::path& path, const EvaluationRecord& record) {
    ojson j;
    j["format"] = "pgc-evaluation";
    j["config_hash"] = record.provenance.config_hash;
    j["tool_version"] = record.provenance.tool_version;
    j["seed"] = record.seed;
    j["grid"] = record.grid;
    j["conditions"] = ojson::array();
    for (const auto& c : record.conditions) {
        ojson cj{{"name", c.name}, {"kind", c.kind}, {"episodes", ojson::array()}};
        for (const auto& e : c.episodes)
            cj["episodes"].push_back({{"seed", e.seed},
                                      {"attacked", e.attacked},
                                      {"t0", e.t0 == AttackSpec::kNever ? -1LL : static_cast<long long>(e.t0)},
                                      {"total_reward", e.total_reward},
                                      {"statistic", e.statistic},
                                      {"detections", e.detections}});
        j["conditions"].push_back(std::move(cj));
    }
    std::ofstream out(path);
    if (!out) throw IoError("cannot write '" + path.string() + "'");
    out << j.dump() << '\n';
    if (!out) throw IoError("write failed for '" + path.string() + "'");
}

EvaluationRecord load_evaluation(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw MissingArtifact("cannot read '" + path.string() + "'");
    try {
        const ojson j = ojson::parse(in);
        if (j.value("format", "") != "pgc-evaluation") throw FormatError(path.string() + ": not an evaluation file");
        EvaluationRecord r;
        r.provenance = Provenance{j.at("config_hash").get<std::string>(), j.at("tool_version").get<std::string>()};
        r.seed = j.at("seed").get<std::uint64_t>();
        r.grid = j.at("grid").get<std::vector<double>>();
        for (const auto& cj : j.at("conditions")) {
            ConditionSummaries c{cj.at("name").get<std::string>(), cj.at("kind").get<std::string>(), {}};
            for (const auto& ej : cj.at("episodes")) {
                EpisodeSummary e;
                e.seed = ej.at("seed").get<std::uint64_t>();
                e.attacked = ej.at("attacked").get<bool>();
                const long long t0 = ej.at("t0").get<long long>();
                e.t0 = t0 < 0 ? AttackSpec::kNever : static_cast<std::size_t>(t0);
                e.total_reward = ej.at("total_reward").get<double>();
                // JSON has no infinity; a missing statistic is written as null.
                e.statistic = ej.at("statistic").is_null() ? -INFINITY : ej.at("statistic").get<double>();
                e.detections = ej.at("detections").get<std::vector<long long>>();
                c.episodes.push_back(std::move(e));
            }
            r.conditions.push_back(std::move(c));
        }
        return r;
    } catch (const ojson::exception& e) {
        throw FormatError(path.string() + ": " + e.what());
    }
}

ReportData build_report(const EvaluationRecord& record, const std::string& config_text,
                        std::size_t min_impact_episodes) {
    ReportData data;
    data.provenance = record.provenance;
    data.config_text = config_text;
    data.seed = record.seed;
    const ConditionSummaries* clean = nullptr;
    for (const auto& c : record.conditions)
        if (c.kind == "none") clean = &c;
    if (!clean) throw MissingArtifact("evaluation has no clean condition");

    std::map<std::string, const ConditionSummaries*> references;
    for (const auto& c : record.conditions)
        if (c.kind == "reference") references[c.name] = &c;

    std::map<std::string, std::vector<double>> rewards;
    for (const auto& c : record.conditions) {
        if (c.kind == "reference") continue;
        auto& r = rewards[c.name];
        for (const auto& e : c.episodes) r.push_back(e.total_reward);
        if (&c == clean) continue;
        const auto ref_it = references.find("none:" + c.name);
        const ConditionSummaries& ref = ref_it == references.end() ? *clean : *ref_it->second;
        std::vector<double> clean_stats, stats;
        for (const auto& e : ref.episodes) clean_stats.push_back(e.statistic);
        for (const auto& e : c.episodes) stats.push_back(e.statistic);
        ConditionReport cr;
        cr.name = c.name;
        cr.kind = c.kind;
        cr.roc = roc_from_statistics(clean_stats, stats, record.grid);
        cr.ttd = ttd_curve(ref.episodes, c.episodes, record.grid);
        data.conditions.push_back(std::move(cr));
    }
    data.impact = impact_table(rewards, min_impact_episodes);
    return data;
}

}  // namespace pgc
