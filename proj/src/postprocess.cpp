#include "volseg/postprocess.hpp"

#include <cmath>

namespace volseg {

void PostprocessConfig::validate() const {
  if (!(volume_exemption_mm3 >= 0.0) || !std::isfinite(volume_exemption_mm3))
    throw Error(ErrorKind::InvalidArgument, "volume exemption threshold must be non-negative");
  if (!(min_axial_diameter_mm >= 0.0) || !std::isfinite(min_axial_diameter_mm))
    throw Error(ErrorKind::InvalidArgument, "minimum axial diameter must be non-negative");
}

std::string_view to_string(PostprocessAction a) {
  switch (a) {
    case PostprocessAction::Kept: return "kept";
    case PostprocessAction::RemovedDetached: return "removed-detached";
    case PostprocessAction::KeptLargeDetached: return "kept-large-detached";
    case PostprocessAction::RemovedSmall: return "removed-small";
  }
  return "unknown";
}

std::size_t PostprocessReport::removed() const noexcept {
  std::size_t n = 0;
  for (const auto& d : decisions)
    n += d.action == PostprocessAction::RemovedDetached || d.action == PostprocessAction::RemovedSmall;
  return n;
}

PostprocessResult postprocess(const LabelVolume& pred, const PostprocessConfig& cfg) {
  cfg.validate();
  require_canonical(pred);

  const RegionMask kidney = extract_region(pred, Region::Kidney);
  const ComponentSet lesions = connected_components(extract_region(pred, Region::Abnormality), cfg.connectivity);

  PostprocessResult out{pred, {cfg, {}}};
  auto labels = out.volume.labels();
  for (const Component& c : lesions.components) {
    ComponentDecision d;
    d.component_id = c.id;
    d.voxel_count = c.voxel_count();
    d.volume_mm3 = c.volume_mm3;
    d.axial_diameter_mm = axial_diameter(c, pred.grid());
    d.attached = is_attached(c, kidney);
    if (!d.attached) {
      d.action = d.volume_mm3 > cfg.volume_exemption_mm3 ? PostprocessAction::KeptLargeDetached
                                                         : PostprocessAction::RemovedDetached;
    } else {
      d.action = d.axial_diameter_mm > cfg.min_axial_diameter_mm ? PostprocessAction::Kept
                                                                 : PostprocessAction::RemovedSmall;
    }
    if (d.action == PostprocessAction::RemovedDetached || d.action == PostprocessAction::RemovedSmall)
      for (std::size_t off : c.voxels) labels[off] = kBackground;
    out.report.decisions.push_back(d);
  }
  return out;
}

}  // namespace volseg
