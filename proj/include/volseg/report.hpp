#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "volseg/harness.hpp"
#include "volseg/stats.hpp"

namespace volseg {

using Json = nlohmann::json;

inline constexpr const char* kCaseSchema = "volseg.case/1";
inline constexpr const char* kRunSchema = "volseg.run/1";
inline constexpr const char* kStatsSchema = "volseg.stats/1";

/// Shortest decimal text that round-trips to the same double.
std::string format_number(double v);

Json to_json(const MetricValue& v);
MetricValue metric_value_from_json(const Json& j);

Json to_json(const PostprocessReport& r);
Json to_json(const DetectionOutcome& o);
Json to_json(const CaseRecord& r);

/// Restores the fields needed for aggregation, statistics and subgroup
/// analysis (metadata, region metrics, detection scores).
CaseRecord case_record_from_json(const Json& j);

/// Reads every *.json case record under `dir` (non-recursive), sorted by case id.
std::vector<CaseRecord> read_case_records(const std::filesystem::path& dir);

/// One row per successfully evaluated case.
std::string cases_csv(const std::vector<CaseRecord>& records, const std::vector<double>& thresholds);
std::string aggregate_csv(const std::vector<MetricSummaryRow>& rows);
std::string subgroup_csv(const std::vector<SubgroupSummary>& rows);

StatsPlan stats_plan_from_json(const Json& j);
Json to_json(const PlanOutcome& o);

void write_text(const std::filesystem::path& path, const std::string& text);
Json read_json(const std::filesystem::path& path);

}  // namespace volseg
