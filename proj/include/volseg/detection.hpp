#pragma once

#include <cstdint>
#include <vector>

#include "volseg/metrics.hpp"
#include "volseg/morphology.hpp"

namespace volseg {

struct LesionMatch {
  std::uint32_t pred_id = 0;
  std::uint32_t ref_id = 0;
  double iou = 0.0;
  bool operator==(const LesionMatch&) const = default;
};

/// Sparse IoU table between two component sets; only overlapping pairs.
struct OverlapTable {
  std::size_t pred_count = 0;
  std::size_t ref_count = 0;
  std::vector<LesionMatch> pairs;  // sorted by (pred_id, ref_id)
};

OverlapTable lesion_overlaps(const ComponentSet& pred, const ComponentSet& ref);

enum class MatchStrategy {
  /// Maximum number of matches, then maximum total IoU (Hungarian solve).
  Optimal,
  /// Descending IoU, ties broken by lower pred id then lower ref id. Equal to
  /// Optimal whenever the threshold is at least 0.5.
  Greedy,
};

struct DetectionOutcome {
  double threshold = 0.5;
  std::vector<LesionMatch> matches;  // sorted by pred id
  std::vector<std::uint32_t> false_positives;
  std::vector<std::uint32_t> false_negatives;
  MetricValue precision;
  MetricValue recall;
  MetricValue f1;

  std::size_t tp() const noexcept { return matches.size(); }
  std::size_t fp() const noexcept { return false_positives.size(); }
  std::size_t fn() const noexcept { return false_negatives.size(); }
};

/// Candidates are pairs with IoU strictly above `threshold`, so 0 accepts any
/// overlap. Matching is one-to-one.
DetectionOutcome match_lesions(const OverlapTable& overlaps, double threshold,
                               MatchStrategy strategy = MatchStrategy::Optimal);
DetectionOutcome match_lesions(const ComponentSet& pred, const ComponentSet& ref, double threshold,
                               MatchStrategy strategy = MatchStrategy::Optimal);

struct DetectionScores {
  MetricValue precision;
  MetricValue recall;
  MetricValue f1;
};

/// precision = TP/(TP+FP), recall = TP/(TP+FN), f1 = 2PR/(P+R), with f1 = 0
/// whenever TP = 0 and reference lesions exist. Cases without reference
/// lesions are undefined ("no-lesions" or "no-reference").
DetectionScores detection_metrics(std::size_t tp, std::size_t fp, std::size_t fn);

inline constexpr const char* kNoLesions = "no-lesions";
inline constexpr const char* kNoReference = "no-reference";
inline constexpr const char* kNoPredictions = "no-predictions";

}  // namespace volseg
