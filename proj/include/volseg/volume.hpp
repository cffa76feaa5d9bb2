#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace volseg {

enum class ErrorKind {
  Io,
  UnsupportedFormat,
  CorruptHeader,
  CorruptPayload,
  UnsupportedDatatype,
  NotAxisAligned,
  GridMismatch,
  UnknownLabel,
  NonCanonical,
  EmptySource,
  NoLandmark,
  EmptySample,
  InvalidArgument,
  UnknownField,
  MissingRecordSet,
};

std::string_view to_string(ErrorKind kind);

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

using Index3 = std::array<std::size_t, 3>;
using Vec3 = std::array<double, 3>;

/// Voxel grid geometry shared by volumes and masks. Storage is x-fastest:
/// offset = x + dims[0] * (y + dims[1] * z).
struct Grid {
  Index3 dims{1, 1, 1};
  Vec3 spacing{1.0, 1.0, 1.0};  // mm
  Vec3 origin{0.0, 0.0, 0.0};   // world position of voxel (0,0,0), mm
  std::array<int, 3> direction{1, 1, 1};

  std::size_t size() const noexcept { return dims[0] * dims[1] * dims[2]; }
  double voxel_volume() const noexcept { return spacing[0] * spacing[1] * spacing[2]; }
  std::size_t offset(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return x + dims[0] * (y + dims[1] * z);
  }
  Index3 coords(std::size_t offset) const noexcept {
    const std::size_t x = offset % dims[0];
    const std::size_t rest = offset / dims[0];
    return {x, rest % dims[1], rest / dims[1]};
  }
  bool operator==(const Grid&) const = default;

  /// Throws InvalidArgument on zero dims or non-positive spacing.
  void validate() const;
};

std::string describe(const Grid& g);

/// Succeeds iff dims are equal and spacing agrees within 1e-4 relative per axis.
void assert_same_grid(const Grid& a, const Grid& b);
bool same_grid(const Grid& a, const Grid& b) noexcept;

using Label = std::uint8_t;

/// Canonical labels after harmonization.
inline constexpr Label kBackground = 0;
inline constexpr Label kKidney = 1;
inline constexpr Label kAbnormality = 2;

class LabelVolume {
 public:
  LabelVolume() = default;
  LabelVolume(Grid grid, std::vector<Label> labels);
  /// All-background volume.
  explicit LabelVolume(Grid grid);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const Label> labels() const noexcept { return labels_; }
  std::span<Label> labels() noexcept { return labels_; }
  std::size_t size() const noexcept { return labels_.size(); }

  Label at(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return labels_[grid_.offset(x, y, z)];
  }
  Label& at(std::size_t x, std::size_t y, std::size_t z) noexcept {
    return labels_[grid_.offset(x, y, z)];
  }

  bool operator==(const LabelVolume&) const = default;

 private:
  Grid grid_;
  std::vector<Label> labels_;
};

/// Binary occupancy on a grid. Bits are stored one byte per voxel so kernels
/// get random access without bit twiddling.
class RegionMask {
 public:
  RegionMask() = default;
  explicit RegionMask(Grid grid);
  RegionMask(Grid grid, std::vector<std::uint8_t> bits);

  const Grid& grid() const noexcept { return grid_; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }
  std::size_t size() const noexcept { return bits_.size(); }

  bool test(std::size_t offset) const noexcept { return bits_[offset] != 0; }
  bool test(std::size_t x, std::size_t y, std::size_t z) const noexcept {
    return bits_[grid_.offset(x, y, z)] != 0;
  }
  void set(std::size_t offset, bool value = true) noexcept { bits_[offset] = value ? 1 : 0; }
  void set(std::size_t x, std::size_t y, std::size_t z, bool value = true) noexcept {
    set(grid_.offset(x, y, z), value);
  }

  std::size_t count() const noexcept;
  bool empty() const noexcept { return count() == 0; }

  bool operator==(const RegionMask&) const = default;

 private:
  Grid grid_;
  std::vector<std::uint8_t> bits_;
};

enum class Semantic {
  Background,
  Kidney,
  Abnormality,
  Tumor,
  Cyst,
  KidneyLeft,
  KidneyRight,
  CystLeft,
  CystRight,
  OtherStructure,  // non-kidney anatomy in multi-organ outputs; maps to background
};

std::string_view to_string(Semantic s);
Label canonical_label(Semantic s) noexcept;

/// Mapping from stored integer label to meaning. Label 0 is always background.
class LabelScheme {
 public:
  LabelScheme(std::string name, std::map<Label, Semantic> entries);

  static LabelScheme canonical();
  /// {0 background, 1 kidney, 2 tumor, 3 cyst}
  static LabelScheme kits();
  /// TotalSegmentator v2 "total" task: 2 right kidney, 3 left kidney,
  /// 116 left cyst, 117 right cyst; every other label in 1..117 is another organ.
  static LabelScheme totalsegmentator();
  /// {0 background, 1 left kidney, 2 right kidney, 3 left cyst, 4 right cyst}
  static LabelScheme sided();
  /// Looks up a built-in scheme by name ("canonical", "kits", "totalseg", "sided").
  static LabelScheme by_name(std::string_view name);

  const std::string& name() const noexcept { return name_; }
  bool contains(Label l) const noexcept { return entries_.contains(l); }
  Semantic semantic(Label l) const;
  bool is_sided() const noexcept;
  bool is_canonical() const noexcept;
  const std::map<Label, Semantic>& entries() const noexcept { return entries_; }

 private:
  std::string name_;
  std::map<Label, Semantic> entries_;
};

/// Maps a volume into the canonical {background, kidney, abnormality} scheme.
LabelVolume harmonize_labels(const LabelVolume& v, const LabelScheme& source);

/// Collapses left/right kidney and cyst labels into canonical kidney / abnormality.
LabelVolume merge_sides(const LabelVolume& v, const LabelScheme& side_scheme);

/// Throws NonCanonical if any label is outside {0,1,2}.
void require_canonical(const LabelVolume& v);

enum class Region { Kidney, KidneyPlusAbnormality, Abnormality };

inline constexpr std::array<Region, 3> kAllRegions{Region::Kidney, Region::KidneyPlusAbnormality,
                                                   Region::Abnormality};

std::string_view to_string(Region r);
Region region_from_string(std::string_view s);

RegionMask extract_region(const LabelVolume& v, Region region);

}  // namespace volseg
