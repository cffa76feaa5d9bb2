#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "volseg/volume.hpp"

namespace volseg {

enum class Connectivity { Six = 6, TwentySix = 26 };

Connectivity connectivity_from_int(int c);

struct BoundingBox {
  Index3 lo{};
  Index3 hi{};  // inclusive
  bool operator==(const BoundingBox&) const = default;
};

struct Component {
  std::uint32_t id = 0;
  std::vector<std::size_t> voxels;  // ascending linear offsets
  BoundingBox bbox;
  double volume_mm3 = 0.0;

  std::size_t voxel_count() const noexcept { return voxels.size(); }
};

/// Labelled partition of a mask's foreground. ids are 1..K, assigned in the
/// order their first voxel appears in an x-fastest scan.
struct ComponentSet {
  Grid grid;
  Connectivity connectivity = Connectivity::TwentySix;
  std::vector<std::uint32_t> ids;  // 0 for background
  std::vector<Component> components;

  std::size_t size() const noexcept { return components.size(); }
  const Component& operator[](std::uint32_t id) const { return components.at(id - 1); }
  RegionMask mask_of(std::uint32_t id) const;
};

ComponentSet connected_components(const RegionMask& m, Connectivity connectivity = Connectivity::TwentySix);

/// Voxel count times voxel volume, in mm^3.
double component_volume(const Component& c, const Grid& grid);

/// Largest in-plane Feret diameter (mm) over the constant-z slices the
/// component occupies, measured between voxel centers.
double axial_diameter(const Component& c, const Grid& grid);

/// Same quantity for a bare list of in-slice voxel indices.
double slice_diameter(const std::vector<std::array<std::int64_t, 2>>& points, double spacing_x, double spacing_y);

/// True iff some component voxel has a kidney voxel in its 26-neighborhood.
bool is_attached(const Component& c, const RegionMask& kidney);

/// Voxels of m with a 6-neighbor outside m; volume-border voxels count as surface.
RegionMask surface_voxels(const RegionMask& m);

struct DistanceField {
  Grid grid;
  std::vector<double> mm;

  double at(std::size_t offset) const { return mm[offset]; }
};

/// Exact Euclidean distance (mm, spacing-weighted) from every voxel to the
/// nearest source voxel. Separable lower-envelope transform, one pass per axis.
DistanceField distance_transform(const RegionMask& source);

struct RoiBox {
  BoundingBox box;
  std::string provenance;

  Index3 extent() const noexcept {
    return {box.hi[0] - box.lo[0] + 1, box.hi[1] - box.lo[1] + 1, box.hi[2] - box.lo[2] + 1};
  }
};

std::optional<BoundingBox> bounding_box(const RegionMask& m);

/// Union of the two landmark bounding boxes, grown by ceil(margin/spacing)
/// voxels per axis and clipped to the volume.
RoiBox roi_from_landmarks(const RegionMask& lung_lower_lobes, const RegionMask& bladder, double margin_mm);

struct CropResult {
  LabelVolume volume;
  RoiBox roi;
};

CropResult roi_crop(const LabelVolume& v, const RegionMask& lung_lower_lobes, const RegionMask& bladder,
                    double margin_mm = 10.0);

/// Restricts v to the box; origin moves so world coordinates are preserved.
LabelVolume crop_to(const LabelVolume& v, const BoundingBox& box);
RegionMask crop_to(const RegionMask& m, const BoundingBox& box);

/// Re-embeds a cropped volume into a background volume on the original grid.
LabelVolume uncrop(const LabelVolume& cropped, const BoundingBox& box, const Grid& original);

}  // namespace volseg
