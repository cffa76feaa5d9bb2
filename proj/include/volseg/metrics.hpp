#pragma once

#include <optional>
#include <string>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg {

/// A metric that may be undefined; `reason` is machine-readable
/// ("both-empty", "one-empty", ...) and empty when a value is present.
struct MetricValue {
  std::optional<double> value;
  std::string reason;

  static MetricValue of(double v) { return {v, {}}; }
  static MetricValue undefined(std::string why) { return {std::nullopt, std::move(why)}; }
  bool defined() const noexcept { return value.has_value(); }
  bool operator==(const MetricValue&) const = default;
};

inline constexpr const char* kBothEmpty = "both-empty";
inline constexpr const char* kOneEmpty = "one-empty";

/// 2|A∩B| / (|A|+|B|). Both empty is undefined; exactly one empty scores 0.
MetricValue dice(const RegionMask& a, const RegionMask& b);

/// |A∩B| / |A∪B| with the same empty-mask rules as dice.
MetricValue iou(const RegionMask& a, const RegionMask& b);

enum class HausdorffMode {
  MaxOfDirected,  // max of the two directed percentiles
  Pooled,         // percentile of both directed distance sets pooled together
};

/// Distances (mm) from each surface voxel of `from` to the nearest surface
/// voxel of `to`. Both masks must be non-empty.
std::vector<double> directed_surface_distances(const RegionMask& from, const RegionMask& to);

/// Percentile Hausdorff distance between mask surfaces; q = 0.95 gives HD95
/// and q = 1 the classic Hausdorff distance. Undefined when either mask is empty.
MetricValue hausdorff_percentile(const RegionMask& a, const RegionMask& b, double q,
                                 HausdorffMode mode = HausdorffMode::MaxOfDirected);

MetricValue hd95(const RegionMask& a, const RegionMask& b, HausdorffMode mode = HausdorffMode::MaxOfDirected);

double mask_volume(const RegionMask& a);

struct RegionMetrics {
  Region region = Region::Kidney;
  MetricValue dice;
  MetricValue hd95_mm;
  double pred_volume_mm3 = 0.0;
  double ref_volume_mm3 = 0.0;
};

RegionMetrics region_metrics(const RegionMask& pred, const RegionMask& ref, Region region,
                             HausdorffMode mode = HausdorffMode::MaxOfDirected);

}  // namespace volseg
