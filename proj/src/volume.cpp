#include "volseg/volume.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

namespace volseg {

std::string_view to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::Io: return "io";
    case ErrorKind::UnsupportedFormat: return "unsupported-format";
    case ErrorKind::CorruptHeader: return "corrupt-header";
    case ErrorKind::CorruptPayload: return "corrupt-payload";
    case ErrorKind::UnsupportedDatatype: return "unsupported-datatype";
    case ErrorKind::NotAxisAligned: return "not-axis-aligned";
    case ErrorKind::GridMismatch: return "grid-mismatch";
    case ErrorKind::UnknownLabel: return "unknown-label";
    case ErrorKind::NonCanonical: return "non-canonical";
    case ErrorKind::EmptySource: return "empty-source";
    case ErrorKind::NoLandmark: return "no-landmark";
    case ErrorKind::EmptySample: return "empty-sample";
    case ErrorKind::InvalidArgument: return "invalid-argument";
    case ErrorKind::UnknownField: return "unknown-field";
    case ErrorKind::MissingRecordSet: return "missing-record-set";
  }
  return "unknown";
}

void Grid::validate() const {
  for (int a = 0; a < 3; ++a) {
    if (dims[a] == 0) throw Error(ErrorKind::InvalidArgument, "grid dimension is zero: " + describe(*this));
    if (!(spacing[a] > 0.0) || !std::isfinite(spacing[a]))
      throw Error(ErrorKind::InvalidArgument, "grid spacing must be positive: " + describe(*this));
    if (direction[a] != 1 && direction[a] != -1)
      throw Error(ErrorKind::InvalidArgument, "axis direction must be +1 or -1");
  }
}

std::string describe(const Grid& g) {
  std::ostringstream os;
  os.precision(9);
  os << "dims(" << g.dims[0] << "," << g.dims[1] << "," << g.dims[2] << ") spacing(" << g.spacing[0]
     << "," << g.spacing[1] << "," << g.spacing[2] << ")";
  return os.str();
}

bool same_grid(const Grid& a, const Grid& b) noexcept {
  if (a.dims != b.dims) return false;
  for (int i = 0; i < 3; ++i) {
    const double scale = std::max(std::abs(a.spacing[i]), std::abs(b.spacing[i]));
    if (std::abs(a.spacing[i] - b.spacing[i]) > 1e-4 * scale) return false;
  }
  return true;
}

void assert_same_grid(const Grid& a, const Grid& b) {
  if (!same_grid(a, b))
    throw Error(ErrorKind::GridMismatch, "grid mismatch: " + describe(a) + " vs " + describe(b));
}

LabelVolume::LabelVolume(Grid grid, std::vector<Label> labels)
    : grid_(grid), labels_(std::move(labels)) {
  grid_.validate();
  if (labels_.size() != grid_.size())
    throw Error(ErrorKind::CorruptPayload, "label count " + std::to_string(labels_.size()) +
                                               " does not match " + describe(grid_));
}

LabelVolume::LabelVolume(Grid grid) : grid_(grid) {
  grid_.validate();
  labels_.assign(grid_.size(), kBackground);
}

RegionMask::RegionMask(Grid grid) : grid_(grid) {
  grid_.validate();
  bits_.assign(grid_.size(), 0);
}

RegionMask::RegionMask(Grid grid, std::vector<std::uint8_t> bits)
    : grid_(grid), bits_(std::move(bits)) {
  grid_.validate();
  if (bits_.size() != grid_.size())
    throw Error(ErrorKind::CorruptPayload, "mask size does not match " + describe(grid_));
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t RegionMask::count() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

std::string_view to_string(Semantic s) {
  switch (s) {
    case Semantic::Background: return "background";
    case Semantic::Kidney: return "kidney";
    case Semantic::Abnormality: return "abnormality";
    case Semantic::Tumor: return "tumor";
    case Semantic::Cyst: return "cyst";
    case Semantic::KidneyLeft: return "kidney_left";
    case Semantic::KidneyRight: return "kidney_right";
    case Semantic::CystLeft: return "kidney_cyst_left";
    case Semantic::CystRight: return "kidney_cyst_right";
    case Semantic::OtherStructure: return "other";
  }
  return "unknown";
}

Label canonical_label(Semantic s) noexcept {
  switch (s) {
    case Semantic::Kidney:
    case Semantic::KidneyLeft:
    case Semantic::KidneyRight: return kKidney;
    case Semantic::Abnormality:
    case Semantic::Tumor:
    case Semantic::Cyst:
    case Semantic::CystLeft:
    case Semantic::CystRight: return kAbnormality;
    case Semantic::Background:
    case Semantic::OtherStructure: return kBackground;
  }
  return kBackground;
}

LabelScheme::LabelScheme(std::string name, std::map<Label, Semantic> entries)
    : name_(std::move(name)), entries_(std::move(entries)) {
  auto bg = entries_.find(0);
  if (bg == entries_.end() || bg->second != Semantic::Background)
    throw Error(ErrorKind::InvalidArgument, "label scheme '" + name_ + "' must map 0 to background");
  std::set<Semantic> seen;
  for (const auto& [label, sem] : entries_) {
    if (sem == Semantic::OtherStructure) continue;
    if (!seen.insert(sem).second)
      throw Error(ErrorKind::InvalidArgument,
                  "label scheme '" + name_ + "' maps two labels to " + std::string(to_string(sem)));
  }
}

LabelScheme LabelScheme::canonical() {
  return {"canonical",
          {{0, Semantic::Background}, {1, Semantic::Kidney}, {2, Semantic::Abnormality}}};
}

LabelScheme LabelScheme::kits() {
  return {"kits",
          {{0, Semantic::Background},
           {1, Semantic::Kidney},
           {2, Semantic::Tumor},
           {3, Semantic::Cyst}}};
}

LabelScheme LabelScheme::totalsegmentator() {
  std::map<Label, Semantic> entries{{0, Semantic::Background}};
  for (int l = 1; l <= 117; ++l) entries[static_cast<Label>(l)] = Semantic::OtherStructure;
  entries[2] = Semantic::KidneyRight;
  entries[3] = Semantic::KidneyLeft;
  entries[116] = Semantic::CystLeft;
  entries[117] = Semantic::CystRight;
  return {"totalseg", std::move(entries)};
}

LabelScheme LabelScheme::sided() {
  return {"sided",
          {{0, Semantic::Background},
           {1, Semantic::KidneyLeft},
           {2, Semantic::KidneyRight},
           {3, Semantic::CystLeft},
           {4, Semantic::CystRight}}};
}

LabelScheme LabelScheme::by_name(std::string_view name) {
  if (name == "canonical") return canonical();
  if (name == "kits") return kits();
  if (name == "totalseg" || name == "totalsegmentator") return totalsegmentator();
  if (name == "sided") return sided();
  throw Error(ErrorKind::InvalidArgument, "unknown label scheme: " + std::string(name));
}

Semantic LabelScheme::semantic(Label l) const {
  auto it = entries_.find(l);
  if (it == entries_.end())
    throw Error(ErrorKind::UnknownLabel,
                "label " + std::to_string(int{l}) + " is not part of scheme '" + name_ + "'");
  return it->second;
}

bool LabelScheme::is_sided() const noexcept {
  bool kl = false, kr = false;
  for (const auto& [_, s] : entries_) {
    kl |= s == Semantic::KidneyLeft;
    kr |= s == Semantic::KidneyRight;
  }
  return kl && kr;
}

bool LabelScheme::is_canonical() const noexcept {
  return entries_ == canonical().entries_;
}

namespace {

LabelVolume remap(const LabelVolume& v, const LabelScheme& scheme) {
  std::array<int, 256> table;
  table.fill(-1);
  for (const auto& [label, sem] : scheme.entries()) table[label] = canonical_label(sem);

  std::vector<Label> out(v.size());
  const auto in = v.labels();
  for (std::size_t i = 0; i < in.size(); ++i) {
    const int mapped = table[in[i]];
    if (mapped < 0) scheme.semantic(in[i]);  // throws UnknownLabel
    out[i] = static_cast<Label>(mapped);
  }
  return LabelVolume(v.grid(), std::move(out));
}

}  // namespace

LabelVolume harmonize_labels(const LabelVolume& v, const LabelScheme& source) {
  return remap(v, source);
}

LabelVolume merge_sides(const LabelVolume& v, const LabelScheme& side_scheme) {
  if (!side_scheme.is_sided())
    throw Error(ErrorKind::InvalidArgument,
                "scheme '" + side_scheme.name() + "' does not distinguish left and right kidney");
  return remap(v, side_scheme);
}

void require_canonical(const LabelVolume& v) {
  for (Label l : v.labels()) {
    if (l > kAbnormality)
      throw Error(ErrorKind::NonCanonical,
                  "label " + std::to_string(int{l}) + " is outside the canonical scheme");
  }
}

std::string_view to_string(Region r) {
  switch (r) {
    case Region::Kidney: return "kidney";
    case Region::KidneyPlusAbnormality: return "kidney_plus_abnormality";
    case Region::Abnormality: return "abnormality";
  }
  return "unknown";
}

Region region_from_string(std::string_view s) {
  for (Region r : kAllRegions)
    if (to_string(r) == s) return r;
  throw Error(ErrorKind::InvalidArgument, "unknown region: " + std::string(s));
}

RegionMask extract_region(const LabelVolume& v, Region region) {
  std::vector<std::uint8_t> bits(v.size());
  const auto labels = v.labels();
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const Label l = labels[i];
    switch (region) {
      case Region::Kidney: bits[i] = l == kKidney; break;
      case Region::Abnormality: bits[i] = l == kAbnormality; break;
      case Region::KidneyPlusAbnormality: bits[i] = l == kKidney || l == kAbnormality; break;
    }
  }
  return RegionMask(v.grid(), std::move(bits));
}

}  // namespace volseg
