#include "pgc/detector.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <istream>
#include <sstream>

#include "pgc/errors.hpp"

namespace pgc {

StandardMoments StandardMoments::for_dimension(std::size_t d) {
    if (d == 0) throw InvalidConfig("action dimension must be positive");
    const double half = static_cast<double>(d) / 2.0;
    return StandardMoments{-half, std::sqrt(half), d};
}

const char* to_string(DetectionMode mode) { return mode == DetectionMode::cusum ? "cusum" : "window"; }

DetectionMode detection_mode_from_string(const std::string& name) {
    if (name == "cusum") return DetectionMode::cusum;
    if (name == "window") return DetectionMode::window;
    throw InvalidConfig("unknown detection mode '" + name + "'");
}

const char* to_string(Side side) { return side == Side::plus ? "plus" : "minus"; }

NormalityScore normality_score(const GaussianParams& params, std::span<const double> action, std::size_t t,
                               AgentId observer, AgentId victim) {
    const double d2 = mahalanobis_sq(action, params.mu, params.chol);
    return NormalityScore{-0.5 * d2, t, observer, victim};
}

double standardize(double z, std::size_t d) {
    const StandardMoments m = StandardMoments::for_dimension(d);
    return (z - m.mean) / m.stddev;
}

CusumState cusum_update(CusumState state, double z_std) {
    state.c_plus = std::max(0.0, state.c_plus + z_std - state.w);
    state.c_minus = std::max(0.0, state.c_minus - z_std - state.w);
    return state;
}

std::optional<Alarm> check_alarm(CusumState& state, const DetectorConfig& cfg, std::size_t t) {
    if (state.alarmed) return state.alarmed;
    if (state.c_plus > cfg.beta_plus) {
        state.alarmed = Alarm{Side::plus, t};
    } else if (state.c_minus > cfg.beta_minus) {
        state.alarmed = Alarm{Side::minus, t};
    }
    return state.alarmed;
}

WindowScorer::WindowScorer(std::size_t window_len, double reference_mean, double reference_std)
    : window_len_(window_len), mean_(reference_mean), std_(reference_std) {
    if (window_len == 0) throw InvalidConfig("window_len must be positive");
    if (!(reference_std > 0.0)) throw InvalidConfig("window reference deviation must be positive");
}

std::optional<double> WindowScorer::push(double score) {
    buffer_.push_back(score);
    if (buffer_.size() > window_len_) buffer_.pop_front();
    if (buffer_.size() < window_len_) return std::nullopt;
    double sum = 0.0;
    for (double v : buffer_) sum += v;
    return std::abs(sum / static_cast<double>(window_len_) - mean_) / std_;
}

std::optional<double> window_score_update(std::deque<double>& buffer, double z, std::size_t window_len,
                                          const StandardMoments& moments) {
    if (window_len == 0) throw InvalidConfig("window_len must be positive");
    buffer.push_back(z);
    while (buffer.size() > window_len) buffer.pop_front();
    if (buffer.size() < window_len) return std::nullopt;
    double sum = 0.0;
    for (double v : buffer) sum += v;
    return std::abs(sum / static_cast<double>(window_len) - moments.mean) / moments.stddev;
}

std::optional<std::size_t> aggregate(const std::map<AgentId, std::optional<std::size_t>>& alarms, std::size_t u) {
    if (u == 0) throw InvalidConfig("aggregation quorum must be at least 1");
    std::vector<std::size_t> times;
    for (const auto& [id, t] : alarms)
        if (t) times.push_back(*t);
    if (times.size() < u) return std::nullopt;
    std::nth_element(times.begin(), times.begin() + static_cast<std::ptrdiff_t>(u - 1), times.end());
    return times[u - 1];
}

void write_score_trace(std::ostream& out, std::span<const ScoreTraceRow> rows) {
    out << "t,observer,victim,z,z_std,c_plus,c_minus,alarmed_side\n";
    out << std::setprecision(17);
    for (const auto& r : rows) {
        out << r.t << ',' << r.observer << ',' << r.victim << ',' << r.z << ',' << r.z_std << ',' << r.c_plus << ','
            << r.c_minus << ',' << (r.alarmed_side ? to_string(*r.alarmed_side) : "") << '\n';
    }
}

std::vector<ScoreTraceRow> read_score_trace(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "t,observer,victim,z,z_std,c_plus,c_minus,alarmed_side")
        throw FormatError("score trace: missing or unexpected header");
    std::vector<ScoreTraceRow> rows;
    while (std::getline(in, line)) {
        if (line.empty()) continue;
        std::vector<std::string> f;
        std::stringstream ss(line);
        std::string cell;
        while (std::getline(ss, cell, ',')) f.push_back(cell);
        if (f.size() == 7) f.emplace_back();
        if (f.size() != 8) throw FormatError("score trace: expected 8 columns in '" + line + "'");
        ScoreTraceRow r;
        r.t = std::stoull(f[0]);
        r.observer = std::stoull(f[1]);
        r.victim = std::stoull(f[2]);
        r.z = std::stod(f[3]);
        r.z_std = std::stod(f[4]);
        r.c_plus = std::stod(f[5]);
        r.c_minus = std::stod(f[6]);
        if (f[7] == "plus") r.alarmed_side = Side::plus;
        else if (f[7] == "minus") r.alarmed_side = Side::minus;
        else if (!f[7].empty()) throw FormatError("score trace: bad alarmed_side '" + f[7] + "'");
        rows.push_back(r);
    }
    return rows;
}

}  // namespace pgc
