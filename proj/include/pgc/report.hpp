#pragma once

// Report files.
//
// roc.csv      curve,beta,fpr,tpr
// ttd.csv      curve,beta,fpr,tpr,true_positives,ttd    (ttd empty when no TP)
// impact.csv   kind,episodes,mean_reward,std_error
// summary.json config, hash, seeds, AUC per condition, impact rows
// roc_<curve>.svg
//
// CSV files start with "# pgc-report v1 config_hash=<h> tool=<version>";
// readers skip lines starting with '#'. Infinite thresholds are written as
// inf / -inf. Numbers use the shortest round-trip form.

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "pgc/eval.hpp"
#include "pgc/model_io.hpp"

namespace pgc {

struct ConditionReport {
    std::string name;
    std::string kind;
    RocCurve roc;
    std::vector<TtdPoint> ttd;
};

struct ReportData {
    Provenance provenance;
    std::string config_text;
    std::uint64_t seed = 0;
    std::vector<ConditionReport> conditions;
    std::vector<ImpactRow> impact;
};

/// Creates dir if needed. Throws IoError.
void write_report(const std::filesystem::path& dir, const ReportData& data);

struct NamedCurve {
    std::string name;
    std::vector<RocPoint> points;
};

/// Curves in file order. Throws IoError / FormatError.
std::vector<NamedCurve> read_roc_csv(const std::filesystem::path& path);

std::string roc_svg(const std::string& title, const RocCurve& curve);

// Stored evaluation: per-episode summaries for each condition, enough to
// rebuild every report without rerunning episodes.
struct ConditionSummaries {
    std::string name;
    // "none": the clean episodes. "reference": the clean episodes as seen
    // by the monitors of one attack condition, named "none:<condition>".
    std::string kind;
    std::vector<EpisodeSummary> episodes;
};

struct EvaluationRecord {
    Provenance provenance;
    std::uint64_t seed = 0;
    std::vector<double> grid;
    std::vector<ConditionSummaries> conditions;
};

void save_evaluation(const std::filesystem::path& path, const EvaluationRecord& record);
EvaluationRecord load_evaluation(const std::filesystem::path& path);

/// ROC and TTD of every attacked condition against its clean reference (or
/// the clean condition when it has none), and the impact table.
ReportData build_report(const EvaluationRecord& record, const std::string& config_text,
                        std::size_t min_impact_episodes = kMinImpactEpisodes);

}  // namespace pgc
