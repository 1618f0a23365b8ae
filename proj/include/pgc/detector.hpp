#pragma once

// Normality score, its Gaussian moments, and the per-pair sequential tests.

#include <cstddef>
#include <deque>
#include <map>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "pgc/predictor.hpp"

namespace pgc {

using AgentId = std::size_t;

struct NormalityScore {
    double z = 0.0;  // always <= 0
    std::size_t t = 0;
    AgentId observer = 0;
    AgentId victim = 0;
};

/// Mean and deviation of the normality score when the action really follows
/// the predicted d-dimensional Gaussian: -d/2 and sqrt(d/2).
struct StandardMoments {
    double mean = 0.0;
    double stddev = 1.0;
    std::size_t d = 0;

    static StandardMoments for_dimension(std::size_t d);
};

enum class DetectionMode { cusum, window };

const char* to_string(DetectionMode mode);
DetectionMode detection_mode_from_string(const std::string& name);

struct DetectorConfig {
    double w = 0.5;
    double beta_plus = 5.0;
    double beta_minus = 5.0;
    std::size_t u = 1;
    DetectionMode mode = DetectionMode::cusum;
    std::size_t window_len = 10;
};

enum class Side { plus, minus };

const char* to_string(Side side);

struct Alarm {
    Side side = Side::plus;
    std::size_t t = 0;

    bool operator==(const Alarm&) const = default;
};

struct CusumState {
    double c_plus = 0.0;
    double c_minus = 0.0;
    double w = 0.0;
    std::optional<Alarm> alarmed;

    static CusumState fresh(double w) { return CusumState{0.0, 0.0, w, std::nullopt}; }
};

/// z = -1/2 (a - mu)^T Sigma^{-1} (a - mu), the log-density at a relative to
/// the log-density at the mode.
NormalityScore normality_score(const GaussianParams& params, std::span<const double> action, std::size_t t = 0,
                               AgentId observer = 0, AgentId victim = 0);

/// (z + d/2) / sqrt(d/2)
double standardize(double z, std::size_t d);
inline double standardize(const NormalityScore& score, std::size_t d) { return standardize(score.z, d); }

/// c+ <- max(0, c+ + z_std - w), c- <- max(0, c- - z_std - w)
CusumState cusum_update(CusumState state, double z_std);

/// Latches the first strict threshold crossing. When both sides cross on the
/// same step the alarm is attributed to Side::plus.
std::optional<Alarm> check_alarm(CusumState& state, const DetectorConfig& cfg, std::size_t t);

/// Sliding window (stride 1) over raw scores. Emits |mean - m| / s once the
/// window is full, where (m, s) are the reference moments of the score.
class WindowScorer {
public:
    WindowScorer(std::size_t window_len, double reference_mean, double reference_std);

    std::optional<double> push(double score);
    void reset() { buffer_.clear(); }

private:
    std::size_t window_len_;
    double mean_;
    double std_;
    std::deque<double> buffer_;
};

/// Stateless form of WindowScorer::push for a buffer owned by the caller.
std::optional<double> window_score_update(std::deque<double>& buffer, double z, std::size_t window_len,
                                          const StandardMoments& moments);

/// Earliest t at which at least u observers have alarmed at or before t.
std::optional<std::size_t> aggregate(const std::map<AgentId, std::optional<std::size_t>>& alarms, std::size_t u);

/// One row of the exported score trace.
struct ScoreTraceRow {
    std::size_t t = 0;
    AgentId observer = 0;
    AgentId victim = 0;
    double z = 0.0;
    double z_std = 0.0;
    double c_plus = 0.0;
    double c_minus = 0.0;
    std::optional<Side> alarmed_side;
};

/// CSV with header t,observer,victim,z,z_std,c_plus,c_minus,alarmed_side.
/// alarmed_side is "plus", "minus" or empty.
void write_score_trace(std::ostream& out, std::span<const ScoreTraceRow> rows);
std::vector<ScoreTraceRow> read_score_trace(std::istream& in);

}  // namespace pgc
