#include "volseg/metrics.hpp"

#include <algorithm>

#include "volseg/morphology.hpp"
#include "volseg/stats.hpp"

namespace volseg {

namespace {

struct OverlapCounts {
  std::size_t a = 0, b = 0, both = 0;
};

OverlapCounts count_overlap(const RegionMask& a, const RegionMask& b) {
  assert_same_grid(a.grid(), b.grid());
  OverlapCounts c;
  const auto ba = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ba.size(); ++i) {
    c.a += ba[i];
    c.b += bb[i];
    c.both += ba[i] & bb[i];
  }
  return c;
}

}  // namespace

MetricValue dice(const RegionMask& a, const RegionMask& b) {
  const auto c = count_overlap(a, b);
  if (c.a == 0 && c.b == 0) return MetricValue::undefined(kBothEmpty);
  return MetricValue::of(2.0 * static_cast<double>(c.both) / static_cast<double>(c.a + c.b));
}

MetricValue iou(const RegionMask& a, const RegionMask& b) {
  const auto c = count_overlap(a, b);
  if (c.a == 0 && c.b == 0) return MetricValue::undefined(kBothEmpty);
  return MetricValue::of(static_cast<double>(c.both) / static_cast<double>(c.a + c.b - c.both));
}

std::vector<double> directed_surface_distances(const RegionMask& from, const RegionMask& to) {
  assert_same_grid(from.grid(), to.grid());
  const RegionMask from_surface = surface_voxels(from);
  const DistanceField field = distance_transform(surface_voxels(to));
  std::vector<double> out;
  for (std::size_t off = 0; off < from_surface.size(); ++off)
    if (from_surface.test(off)) out.push_back(field.at(off));
  return out;
}

MetricValue hausdorff_percentile(const RegionMask& a, const RegionMask& b, double q, HausdorffMode mode) {
  assert_same_grid(a.grid(), b.grid());
  const bool ea = a.empty(), eb = b.empty();
  if (ea && eb) return MetricValue::undefined(kBothEmpty);
  if (ea || eb) return MetricValue::undefined(kOneEmpty);

  std::vector<double> ab = directed_surface_distances(a, b);
  std::vector<double> ba = directed_surface_distances(b, a);
  if (mode == HausdorffMode::Pooled) {
    ab.insert(ab.end(), ba.begin(), ba.end());
    return MetricValue::of(percentile(ab, q));
  }
  return MetricValue::of(std::max(percentile(ab, q), percentile(ba, q)));
}

MetricValue hd95(const RegionMask& a, const RegionMask& b, HausdorffMode mode) {
  return hausdorff_percentile(a, b, 0.95, mode);
}

double mask_volume(const RegionMask& a) {
  return static_cast<double>(a.count()) * a.grid().voxel_volume();
}

RegionMetrics region_metrics(const RegionMask& pred, const RegionMask& ref, Region region, HausdorffMode mode) {
  RegionMetrics m;
  m.region = region;
  m.dice = dice(pred, ref);
  m.hd95_mm = hd95(pred, ref, mode);
  m.pred_volume_mm3 = mask_volume(pred);
  m.ref_volume_mm3 = mask_volume(ref);
  return m;
}

}  // namespace volseg
