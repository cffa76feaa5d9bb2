#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "volseg/harness.hpp"

namespace volseg::cli {

struct RunConfig {
  std::filesystem::path manifest;
  std::filesystem::path out_dir;
  EvaluationOptions options;
  std::size_t workers = 1;
  bool allow_failures = false;
};

/// Exit codes shared by all subcommands.
inline constexpr int kExitOk = 0;
inline constexpr int kExitCaseFailures = 1;
inline constexpr int kExitError = 2;

/// Writes cases/<id>.json, cases.csv, aggregate.csv and run_summary.json.
int cmd_evaluate(const RunConfig& config);

struct PostprocessCommand {
  std::filesystem::path input;
  std::filesystem::path output;
  std::optional<std::filesystem::path> report;
  std::optional<std::string> scheme;
  PostprocessConfig config;
};
int cmd_postprocess(const PostprocessCommand& c);

struct DetectCommand {
  std::filesystem::path pred;
  std::filesystem::path ref;
  std::string pred_scheme = "canonical";
  std::string ref_scheme = "canonical";
  std::vector<double> thresholds{0.0, 0.5};
  Connectivity connectivity = Connectivity::TwentySix;
  std::optional<std::filesystem::path> out;
};
int cmd_detect(const DetectCommand& c);

struct StatsCommand {
  std::filesystem::path records_dir;  // one sub-directory per model
  std::filesystem::path plan;
  std::optional<std::filesystem::path> out;
};
int cmd_stats(const StatsCommand& c);

struct SubgroupCommand {
  std::filesystem::path records_dir;
  std::string key;
  std::vector<double> age_bins{kDefaultAgeBins.begin(), kDefaultAgeBins.end()};
  std::filesystem::path out_dir;
};
int cmd_subgroup(const SubgroupCommand& c);

struct CropCommand {
  std::filesystem::path input;
  std::filesystem::path lung;
  std::filesystem::path bladder;
  double margin_mm = 10.0;
  std::filesystem::path output;
  std::optional<std::filesystem::path> box_out;
};
int cmd_crop(const CropCommand& c);

/// Case records of one evaluate run: `dir/cases` when present, else `dir`.
std::vector<CaseRecord> load_run_records(const std::filesystem::path& dir);

/// File-system safe name for a case id.
std::string case_file_stem(const std::string& case_id);

/// Parses argv and dispatches; argv[0] is the program name.
int run(int argc, const char* const* argv);

}  // namespace volseg::cli
