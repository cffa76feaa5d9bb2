#pragma once

#include <string_view>
#include <vector>

#include "volseg/morphology.hpp"
#include "volseg/volume.hpp"

namespace volseg {

struct PostprocessConfig {
  /// Detached lesions strictly larger than this survive (100 cm^3).
  double volume_exemption_mm3 = 100'000.0;
  /// Attached lesions need a per-slice diameter strictly above this to survive.
  double min_axial_diameter_mm = 3.0;
  Connectivity connectivity = Connectivity::TwentySix;

  void validate() const;
};

enum class PostprocessAction { Kept, RemovedDetached, KeptLargeDetached, RemovedSmall };

std::string_view to_string(PostprocessAction a);

struct ComponentDecision {
  std::uint32_t component_id = 0;
  std::size_t voxel_count = 0;
  double volume_mm3 = 0.0;
  double axial_diameter_mm = 0.0;
  bool attached = false;
  PostprocessAction action = PostprocessAction::Kept;
};

struct PostprocessReport {
  PostprocessConfig config;
  std::vector<ComponentDecision> decisions;

  std::size_t removed() const noexcept;
};

struct PostprocessResult {
  LabelVolume volume;
  PostprocessReport report;
};

/// Cleans a canonical prediction: detached abnormality components are removed
/// unless larger than the exemption volume, and attached components must
/// exceed the minimum axial diameter. Every decision is taken on the input
/// prediction and applied in a single pass, so removals never influence one
/// another. Kidney voxels are never modified.
PostprocessResult postprocess(const LabelVolume& pred, const PostprocessConfig& cfg = {});

}  // namespace volseg
