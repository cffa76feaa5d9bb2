#include "volseg/morphology.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>
#include <map>

namespace volseg {

namespace {

using Offset3 = std::array<int, 3>;

std::vector<Offset3> neighbor_offsets(Connectivity c) {
  std::vector<Offset3> out;
  for (int dz = -1; dz <= 1; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        const int manhattan = std::abs(dx) + std::abs(dy) + std::abs(dz);
        if (manhattan == 0) continue;
        if (c == Connectivity::Six && manhattan != 1) continue;
        out.push_back({dx, dy, dz});
      }
  return out;
}

bool step(const Grid& g, const Index3& p, const Offset3& d, Index3& out) {
  for (int a = 0; a < 3; ++a) {
    const auto v = static_cast<std::int64_t>(p[a]) + d[a];
    if (v < 0 || v >= static_cast<std::int64_t>(g.dims[a])) return false;
    out[a] = static_cast<std::size_t>(v);
  }
  return true;
}

std::int64_t cross(const std::array<std::int64_t, 2>& o, const std::array<std::int64_t, 2>& a,
                   const std::array<std::int64_t, 2>& b) {
  return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0]);
}

/// Convex hull in CCW order without collinear points (Andrew's monotone chain).
std::vector<std::array<std::int64_t, 2>> convex_hull(std::vector<std::array<std::int64_t, 2>> pts) {
  std::sort(pts.begin(), pts.end());
  pts.erase(std::unique(pts.begin(), pts.end()), pts.end());
  if (pts.size() < 3) return pts;
  std::vector<std::array<std::int64_t, 2>> hull(2 * pts.size());
  std::size_t k = 0;
  for (const auto& p : pts) {
    while (k >= 2 && cross(hull[k - 2], hull[k - 1], p) <= 0) --k;
    hull[k++] = p;
  }
  for (std::size_t i = pts.size() - 1, t = k + 1; i-- > 0;) {
    while (k >= t && cross(hull[k - 2], hull[k - 1], pts[i]) <= 0) --k;
    hull[k++] = pts[i];
  }
  hull.resize(k - 1);
  return hull;
}

/// 1D squared distance transform of f sampled at positions i*spacing
/// (Felzenszwalb & Huttenlocher lower envelope of parabolas). Infinite
/// entries are non-sources.
void edt_1d(std::vector<double>& f, double spacing, std::vector<std::size_t>& v, std::vector<double>& z,
            std::vector<double>& out) {
  const std::size_t n = f.size();
  constexpr double inf = std::numeric_limits<double>::infinity();
  v.resize(n);
  z.resize(n + 1);
  out.resize(n);

  std::size_t k = 0;
  bool any = false;
  for (std::size_t q = 0; q < n; ++q) {
    if (f[q] == inf) continue;
    const double pq = spacing * static_cast<double>(q);
    if (!any) {
      v[0] = q;
      z[0] = -inf;
      z[1] = inf;
      any = true;
      continue;
    }
    for (;;) {
      const double pv = spacing * static_cast<double>(v[k]);
      const double s = ((f[q] + pq * pq) - (f[v[k]] + pv * pv)) / (2.0 * (pq - pv));
      if (s <= z[k]) {  // z[0] is -inf, so this never pops the last parabola
        --k;
        continue;
      }
      ++k;
      v[k] = q;
      z[k] = s;
      z[k + 1] = inf;
      break;
    }
  }
  if (!any) {
    std::fill(out.begin(), out.end(), inf);
    f = out;
    return;
  }
  k = 0;
  for (std::size_t q = 0; q < n; ++q) {
    const double pq = spacing * static_cast<double>(q);
    while (z[k + 1] < pq) ++k;
    const double d = spacing * (static_cast<double>(q) - static_cast<double>(v[k]));
    out[q] = d * d + f[v[k]];
  }
  f = out;
}

}  // namespace

Connectivity connectivity_from_int(int c) {
  if (c == 6) return Connectivity::Six;
  if (c == 26) return Connectivity::TwentySix;
  throw Error(ErrorKind::InvalidArgument, "connectivity must be 6 or 26, got " + std::to_string(c));
}

RegionMask ComponentSet::mask_of(std::uint32_t id) const {
  RegionMask m(grid);
  for (std::size_t off : (*this)[id].voxels) m.set(off);
  return m;
}

ComponentSet connected_components(const RegionMask& m, Connectivity connectivity) {
  const Grid& g = m.grid();
  ComponentSet out;
  out.grid = g;
  out.connectivity = connectivity;
  out.ids.assign(m.size(), 0);
  const auto offsets = neighbor_offsets(connectivity);

  std::deque<std::size_t> queue;
  for (std::size_t seed = 0; seed < m.size(); ++seed) {
    if (!m.test(seed) || out.ids[seed] != 0) continue;
    const auto id = static_cast<std::uint32_t>(out.components.size() + 1);
    Component comp;
    comp.id = id;
    comp.bbox.lo = g.coords(seed);
    comp.bbox.hi = comp.bbox.lo;
    out.ids[seed] = id;
    queue.push_back(seed);
    while (!queue.empty()) {
      const std::size_t cur = queue.front();
      queue.pop_front();
      comp.voxels.push_back(cur);
      const Index3 p = g.coords(cur);
      for (int a = 0; a < 3; ++a) {
        comp.bbox.lo[a] = std::min(comp.bbox.lo[a], p[a]);
        comp.bbox.hi[a] = std::max(comp.bbox.hi[a], p[a]);
      }
      Index3 q;
      for (const auto& d : offsets) {
        if (!step(g, p, d, q)) continue;
        const std::size_t off = g.offset(q[0], q[1], q[2]);
        if (m.test(off) && out.ids[off] == 0) {
          out.ids[off] = id;
          queue.push_back(off);
        }
      }
    }
    std::sort(comp.voxels.begin(), comp.voxels.end());
    comp.volume_mm3 = component_volume(comp, g);
    out.components.push_back(std::move(comp));
  }
  return out;
}

double component_volume(const Component& c, const Grid& grid) {
  return static_cast<double>(c.voxel_count()) * grid.voxel_volume();
}

double slice_diameter(const std::vector<std::array<std::int64_t, 2>>& points, double spacing_x,
                      double spacing_y) {
  // Antipodal pairs are preserved by axis scaling, so the hull and caliper
  // walk run exactly in index space and only distances use millimetres.
  const auto hull = convex_hull(points);
  auto dist = [&](const std::array<std::int64_t, 2>& a, const std::array<std::int64_t, 2>& b) {
    const double dx = spacing_x * static_cast<double>(a[0] - b[0]);
    const double dy = spacing_y * static_cast<double>(a[1] - b[1]);
    return std::sqrt(dx * dx + dy * dy);
  };
  const std::size_t h = hull.size();
  if (h <= 1) return 0.0;
  if (h == 2) return dist(hull[0], hull[1]);

  double best = 0.0;
  std::size_t j = 1;
  for (std::size_t i = 0; i < h; ++i) {
    const std::size_t ni = (i + 1) % h;
    while (std::abs(cross(hull[i], hull[ni], hull[(j + 1) % h])) > std::abs(cross(hull[i], hull[ni], hull[j])))
      j = (j + 1) % h;
    const std::size_t nj = (j + 1) % h;
    best = std::max({best, dist(hull[i], hull[j]), dist(hull[ni], hull[j]), dist(hull[i], hull[nj]),
                     dist(hull[ni], hull[nj])});
  }
  return best;
}

double axial_diameter(const Component& c, const Grid& grid) {
  std::map<std::size_t, std::vector<std::array<std::int64_t, 2>>> slices;
  for (std::size_t off : c.voxels) {
    const Index3 p = grid.coords(off);
    slices[p[2]].push_back({static_cast<std::int64_t>(p[0]), static_cast<std::int64_t>(p[1])});
  }
  double best = 0.0;
  for (const auto& [_, pts] : slices) best = std::max(best, slice_diameter(pts, grid.spacing[0], grid.spacing[1]));
  return best;
}

bool is_attached(const Component& c, const RegionMask& kidney) {
  const Grid& g = kidney.grid();
  const auto offsets = neighbor_offsets(Connectivity::TwentySix);
  Index3 q;
  for (std::size_t off : c.voxels) {
    const Index3 p = g.coords(off);
    for (const auto& d : offsets)
      if (step(g, p, d, q) && kidney.test(q[0], q[1], q[2])) return true;
  }
  return false;
}

RegionMask surface_voxels(const RegionMask& m) {
  const Grid& g = m.grid();
  RegionMask out(g);
  const auto offsets = neighbor_offsets(Connectivity::Six);
  Index3 q;
  for (std::size_t off = 0; off < m.size(); ++off) {
    if (!m.test(off)) continue;
    const Index3 p = g.coords(off);
    for (const auto& d : offsets) {
      if (!step(g, p, d, q) || !m.test(q[0], q[1], q[2])) {
        out.set(off);
        break;
      }
    }
  }
  return out;
}

DistanceField distance_transform(const RegionMask& source) {
  if (source.empty()) throw Error(ErrorKind::EmptySource, "distance transform needs a non-empty source mask");
  const Grid& g = source.grid();
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<double> sq(source.size());
  for (std::size_t i = 0; i < sq.size(); ++i) sq[i] = source.test(i) ? 0.0 : inf;

  std::vector<double> line, envelope_z, scratch;
  std::vector<std::size_t> envelope_v;
  const std::size_t nx = g.dims[0], ny = g.dims[1], nz = g.dims[2];

  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t y = 0; y < ny; ++y) {
      line.assign(sq.begin() + static_cast<std::ptrdiff_t>(g.offset(0, y, z)),
                  sq.begin() + static_cast<std::ptrdiff_t>(g.offset(0, y, z) + nx));
      edt_1d(line, g.spacing[0], envelope_v, envelope_z, scratch);
      std::copy(line.begin(), line.end(), sq.begin() + static_cast<std::ptrdiff_t>(g.offset(0, y, z)));
    }
  for (std::size_t z = 0; z < nz; ++z)
    for (std::size_t x = 0; x < nx; ++x) {
      line.resize(ny);
      for (std::size_t y = 0; y < ny; ++y) line[y] = sq[g.offset(x, y, z)];
      edt_1d(line, g.spacing[1], envelope_v, envelope_z, scratch);
      for (std::size_t y = 0; y < ny; ++y) sq[g.offset(x, y, z)] = line[y];
    }
  for (std::size_t y = 0; y < ny; ++y)
    for (std::size_t x = 0; x < nx; ++x) {
      line.resize(nz);
      for (std::size_t z = 0; z < nz; ++z) line[z] = sq[g.offset(x, y, z)];
      edt_1d(line, g.spacing[2], envelope_v, envelope_z, scratch);
      for (std::size_t z = 0; z < nz; ++z) sq[g.offset(x, y, z)] = line[z];
    }

  DistanceField field{g, std::move(sq)};
  for (double& d : field.mm) d = std::sqrt(d);
  return field;
}

std::optional<BoundingBox> bounding_box(const RegionMask& m) {
  const Grid& g = m.grid();
  std::optional<BoundingBox> box;
  for (std::size_t off = 0; off < m.size(); ++off) {
    if (!m.test(off)) continue;
    const Index3 p = g.coords(off);
    if (!box) {
      box = BoundingBox{p, p};
      continue;
    }
    for (int a = 0; a < 3; ++a) {
      box->lo[a] = std::min(box->lo[a], p[a]);
      box->hi[a] = std::max(box->hi[a], p[a]);
    }
  }
  return box;
}

RoiBox roi_from_landmarks(const RegionMask& lung_lower_lobes, const RegionMask& bladder, double margin_mm) {
  assert_same_grid(lung_lower_lobes.grid(), bladder.grid());
  if (!(margin_mm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "ROI margin must be non-negative");
  const auto lung = bounding_box(lung_lower_lobes);
  const auto blad = bounding_box(bladder);
  if (!lung) throw Error(ErrorKind::NoLandmark, "lung lower-lobe landmark mask is empty");
  if (!blad) throw Error(ErrorKind::NoLandmark, "urinary bladder landmark mask is empty");

  const Grid& g = bladder.grid();
  RoiBox roi;
  for (int a = 0; a < 3; ++a) {
    // The epsilon keeps exact multiples such as 3.0/0.3 from rounding up a voxel.
    const auto grow = static_cast<std::int64_t>(std::ceil(margin_mm / g.spacing[a] - 1e-9));
    const auto lo = static_cast<std::int64_t>(std::min(lung->lo[a], blad->lo[a])) - grow;
    const auto hi = static_cast<std::int64_t>(std::max(lung->hi[a], blad->hi[a])) + grow;
    roi.box.lo[a] = static_cast<std::size_t>(std::max<std::int64_t>(lo, 0));
    roi.box.hi[a] = static_cast<std::size_t>(std::min<std::int64_t>(hi, static_cast<std::int64_t>(g.dims[a]) - 1));
  }
  roi.provenance = "lung_lower_lobes+urinary_bladder, margin_mm=" + std::to_string(margin_mm);
  return roi;
}

namespace {

Grid cropped_grid(const Grid& g, const BoundingBox& box) {
  for (int a = 0; a < 3; ++a)
    if (box.lo[a] > box.hi[a] || box.hi[a] >= g.dims[a])
      throw Error(ErrorKind::InvalidArgument, "crop box lies outside the volume");
  Grid out = g;
  for (int a = 0; a < 3; ++a) {
    out.dims[a] = box.hi[a] - box.lo[a] + 1;
    out.origin[a] = g.origin[a] + g.direction[a] * static_cast<double>(box.lo[a]) * g.spacing[a];
  }
  return out;
}

template <typename T, typename Src>
std::vector<T> copy_box(const Src& src, const Grid& g, const BoundingBox& box) {
  std::vector<T> out;
  out.reserve((box.hi[0] - box.lo[0] + 1) * (box.hi[1] - box.lo[1] + 1) * (box.hi[2] - box.lo[2] + 1));
  for (std::size_t z = box.lo[2]; z <= box.hi[2]; ++z)
    for (std::size_t y = box.lo[1]; y <= box.hi[1]; ++y)
      for (std::size_t x = box.lo[0]; x <= box.hi[0]; ++x) out.push_back(src[g.offset(x, y, z)]);
  return out;
}

}  // namespace

LabelVolume crop_to(const LabelVolume& v, const BoundingBox& box) {
  Grid g = cropped_grid(v.grid(), box);
  return LabelVolume(g, copy_box<Label>(v.labels(), v.grid(), box));
}

RegionMask crop_to(const RegionMask& m, const BoundingBox& box) {
  Grid g = cropped_grid(m.grid(), box);
  return RegionMask(g, copy_box<std::uint8_t>(m.bits(), m.grid(), box));
}

CropResult roi_crop(const LabelVolume& v, const RegionMask& lung_lower_lobes, const RegionMask& bladder,
                    double margin_mm) {
  assert_same_grid(v.grid(), lung_lower_lobes.grid());
  assert_same_grid(v.grid(), bladder.grid());
  RoiBox roi = roi_from_landmarks(lung_lower_lobes, bladder, margin_mm);
  return {crop_to(v, roi.box), std::move(roi)};
}

LabelVolume uncrop(const LabelVolume& cropped, const BoundingBox& box, const Grid& original) {
  LabelVolume out(original);
  const Grid& cg = cropped.grid();
  for (std::size_t z = 0; z < cg.dims[2]; ++z)
    for (std::size_t y = 0; y < cg.dims[1]; ++y)
      for (std::size_t x = 0; x < cg.dims[0]; ++x)
        out.at(x + box.lo[0], y + box.lo[1], z + box.lo[2]) = cropped.at(x, y, z);
  return out;
}

}  // namespace volseg
