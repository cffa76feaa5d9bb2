#pragma once

#include <array>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "volseg/detection.hpp"
#include "volseg/metrics.hpp"
#include "volseg/morphology.hpp"
#include "volseg/postprocess.hpp"
#include "volseg/stats.hpp"
#include "volseg/volume.hpp"

namespace volseg {

struct CaseMetadata {
  std::string dataset = "unknown";
  std::string sex = "unknown";
  std::optional<double> age;  // years
  std::string contrast_phase = "unknown";  // early-venous | delayed-venous | arterial | unknown
  std::string subtype = "unknown";         // ccRCC | pRCC | chrRCC | RO | other | unknown

  bool operator==(const CaseMetadata&) const = default;
};

struct CaseManifestEntry {
  std::string case_id;
  std::filesystem::path pred_path;
  std::filesystem::path ref_path;
  std::optional<std::filesystem::path> lung_mask_path;
  std::optional<std::filesystem::path> bladder_mask_path;
  std::string pred_scheme = "canonical";
  std::string ref_scheme = "canonical";
  CaseMetadata metadata;
};

inline constexpr const char* kManifestHeader =
    "case_id,pred_path,ref_path,lung_mask_path,bladder_mask_path,scheme,sex,age,contrast_phase,subtype,dataset";

/// Parses a manifest CSV. Relative paths resolve against the manifest's
/// directory. The scheme column holds one scheme for both volumes or
/// "pred_scheme:ref_scheme".
std::vector<CaseManifestEntry> read_manifest(const std::filesystem::path& path);
std::vector<CaseManifestEntry> parse_manifest(const std::string& text, const std::filesystem::path& base_dir = {});

struct EvaluationOptions {
  bool postprocess = true;
  PostprocessConfig postprocess_config;
  std::vector<double> detection_thresholds{0.0, 0.5};
  MatchStrategy match_strategy = MatchStrategy::Optimal;
  Connectivity lesion_connectivity = Connectivity::TwentySix;
  bool roi_crop = false;
  double margin_mm = 10.0;
  /// Datasets whose references annotate a single kidney; predictions are
  /// limited to the components overlapping the reference.
  std::set<std::string> annotated_side_datasets;
  HausdorffMode hausdorff_mode = HausdorffMode::MaxOfDirected;

  void validate() const;
};

enum class CaseStatus { Ok, Failed };

struct CaseRecord {
  std::string case_id;
  CaseMetadata metadata;
  std::string pred_path;
  std::string ref_path;
  CaseStatus status = CaseStatus::Ok;
  std::string failure_kind;
  std::string failure_message;
  std::array<RegionMetrics, 3> regions{};  // kAllRegions order
  std::vector<DetectionOutcome> detection;
  std::optional<PostprocessReport> postprocess;
  std::optional<RoiBox> roi;
  bool annotated_side_only = false;
  std::vector<std::string> warnings;

  const RegionMetrics& region(Region r) const;
};

/// Keeps only the prediction's kidney+abnormality components that overlap the
/// reference's kidney+abnormality mask. No overlap yields an empty prediction.
LabelVolume select_annotated_side(const LabelVolume& pred, const LabelVolume& ref,
                                  Connectivity connectivity = Connectivity::TwentySix);

/// Evaluates one prediction/reference pair given as volumes already in their
/// source schemes. Load and grid failures become a failed record.
CaseRecord evaluate_volumes(const std::string& case_id, const CaseMetadata& metadata, const LabelVolume& pred_raw,
                            const LabelVolume& ref_raw, const LabelScheme& pred_scheme, const LabelScheme& ref_scheme,
                            const std::optional<LabelVolume>& lung, const std::optional<LabelVolume>& bladder,
                            const EvaluationOptions& options);

CaseRecord evaluate_case(const CaseManifestEntry& entry, const EvaluationOptions& options);

/// Evaluates every entry using `workers` threads; the result is ordered by
/// case id and independent of the worker count.
std::vector<CaseRecord> evaluate_all(const std::vector<CaseManifestEntry>& entries, const EvaluationOptions& options,
                                     std::size_t workers);

struct MetricSummaryRow {
  std::string dataset;
  std::string region;
  std::string metric;
  std::optional<double> threshold;  // detection rows only
  std::size_t n_undefined = 0;
  std::optional<Summary> summary;   // absent when no defined value exists
};

/// Per dataset x region summaries of dice and hd95 plus per dataset x
/// threshold detection summaries. Failed records are skipped.
std::vector<MetricSummaryRow> aggregate(std::vector<CaseRecord> records);

// Subgroup analysis.

inline constexpr std::array<double, 8> kDefaultAgeBins{20, 30, 40, 50, 60, 70, 80, 90};

/// Group label for an age: "30-39" for integer decade bins, "<20" / ">=90"
/// outside the edges, "unknown" when missing.
std::string age_group(std::optional<double> age, const std::vector<double>& edges);

std::string metadata_value(const CaseMetadata& m, const std::string& key, const std::vector<double>& age_bins);

struct SubgroupSummary {
  std::string key;
  std::string group;
  std::string metric;
  std::string region;
  std::size_t n_undefined = 0;
  std::optional<Summary> summary;
};

/// One summary per (metric, region, group). `key` is one of sex, age,
/// contrast_phase, subtype, dataset; age requires bin edges.
std::vector<SubgroupSummary> subgroup_summarize(const std::vector<CaseRecord>& records, const std::string& key,
                                                const std::vector<double>& age_bins = {});

}  // namespace volseg
