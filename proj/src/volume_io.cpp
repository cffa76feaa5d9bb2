#include "volseg/volume_io.hpp"

#include <zlib.h>

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>

namespace volseg {

static_assert(std::endian::native == std::endian::little, "volume codecs assume a little-endian host");

namespace {

// NIfTI-1 header field offsets.
constexpr std::size_t kOffDim = 40;
constexpr std::size_t kOffDatatype = 70;
constexpr std::size_t kOffBitpix = 72;
constexpr std::size_t kOffPixdim = 76;
constexpr std::size_t kOffVoxOffset = 108;
constexpr std::size_t kOffSclSlope = 112;
constexpr std::size_t kOffSclInter = 116;
constexpr std::size_t kOffXyztUnits = 123;
constexpr std::size_t kOffDescrip = 148;
constexpr std::size_t kOffQformCode = 252;
constexpr std::size_t kOffSformCode = 254;
constexpr std::size_t kOffQuatern = 256;
constexpr std::size_t kOffQoffset = 268;
constexpr std::size_t kOffSrow = 280;
constexpr std::size_t kOffMagic = 344;

constexpr std::int16_t kDtUint8 = 2;
constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;

template <typename T>
T get(std::span<const std::uint8_t> b, std::size_t off) {
  T v;
  std::memcpy(&v, b.data() + off, sizeof(T));
  return v;
}

template <typename T>
void put(std::vector<std::uint8_t>& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof(T));
}

bool ends_with(const std::string& s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

std::vector<std::uint8_t> read_all(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path))
    throw Error(ErrorKind::Io, "no such file: " + path.string());
  // gzread passes uncompressed files through unchanged.
  gzFile f = gzopen(path.c_str(), "rb");
  if (!f) throw Error(ErrorKind::Io, "cannot open " + path.string());
  std::vector<std::uint8_t> out;
  std::uint8_t chunk[1 << 16];
  for (;;) {
    const int n = gzread(f, chunk, sizeof(chunk));
    if (n < 0) {
      gzclose(f);
      throw Error(ErrorKind::CorruptPayload, "gzip stream is corrupt: " + path.string());
    }
    if (n == 0) break;
    out.insert(out.end(), chunk, chunk + n);
  }
  gzclose(f);
  return out;
}

void write_all(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes, bool gzip) {
  if (gzip) {
    gzFile f = gzopen(path.c_str(), "wb6");
    if (!f) throw Error(ErrorKind::Io, "cannot write " + path.string());
    const int n = gzwrite(f, bytes.data(), static_cast<unsigned>(bytes.size()));
    const int rc = gzclose(f);
    if (n != static_cast<int>(bytes.size()) || rc != Z_OK)
      throw Error(ErrorKind::Io, "short write to " + path.string());
    return;
  }
  std::ofstream os(path, std::ios::binary);
  if (!os) throw Error(ErrorKind::Io, "cannot write " + path.string());
  os.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw Error(ErrorKind::Io, "short write to " + path.string());
}

int sign_of(double v) { return v < 0.0 ? -1 : 1; }

LabelVolume decode_raw(std::span<const std::uint8_t> b) {
  if (b.size() < kRawHeaderSize) throw Error(ErrorKind::CorruptHeader, "raw header truncated");
  Grid g;
  for (int a = 0; a < 3; ++a) g.dims[a] = get<std::uint32_t>(b, 8 + 4 * a);
  for (int a = 0; a < 3; ++a) g.spacing[a] = get<double>(b, 20 + 8 * a);
  for (int a = 0; a < 3; ++a) g.origin[a] = get<double>(b, 44 + 8 * a);
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] == 0) throw Error(ErrorKind::CorruptHeader, "raw header has a zero dimension");
    if (!(g.spacing[a] > 0.0)) throw Error(ErrorKind::CorruptHeader, "raw header has non-positive spacing");
  }
  const std::size_t payload = b.size() - kRawHeaderSize;
  if (payload != g.size())
    throw Error(ErrorKind::CorruptPayload, "raw header declares " + std::to_string(g.size()) +
                                               " voxels but payload holds " + std::to_string(payload));
  std::vector<Label> labels(b.begin() + kRawHeaderSize, b.end());
  return LabelVolume(g, std::move(labels));
}

/// Rotation columns from the NIfTI quaternion; only the diagonal is needed
/// once we have checked the off-diagonal terms vanish.
bool quaternion_axis_aligned(double qb, double qc, double qd, double qfac, std::array<int, 3>& dir) {
  double qa = 1.0 - (qb * qb + qc * qc + qd * qd);
  qa = qa < 1e-7 ? 0.0 : std::sqrt(qa);
  const double r[3][3] = {
      {qa * qa + qb * qb - qc * qc - qd * qd, 2 * (qb * qc - qa * qd), 2 * (qb * qd + qa * qc)},
      {2 * (qb * qc + qa * qd), qa * qa + qc * qc - qb * qb - qd * qd, 2 * (qc * qd - qa * qb)},
      {2 * (qb * qd - qa * qc), 2 * (qc * qd + qa * qb), qa * qa + qd * qd - qc * qc - qb * qb}};
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j)
      if (i != j && std::abs(r[i][j]) > 1e-4) return false;
  dir = {sign_of(r[0][0]), sign_of(r[1][1]), sign_of(r[2][2] * qfac)};
  return true;
}

LabelVolume decode_nifti(std::span<const std::uint8_t> b) {
  if (b.size() < kNiftiHeaderSize) throw Error(ErrorKind::CorruptHeader, "NIfTI header truncated");
  if (std::memcmp(b.data() + kOffMagic, "n+1\0", 4) != 0)
    throw Error(ErrorKind::UnsupportedFormat, "only single-file NIfTI-1 (magic n+1) is supported");

  const auto ndim = get<std::int16_t>(b, kOffDim);
  if (ndim < 1 || ndim > 7) throw Error(ErrorKind::CorruptHeader, "NIfTI dim[0] out of range");
  Grid g;
  for (int a = 0; a < 3; ++a) {
    const auto d = a < ndim ? get<std::int16_t>(b, kOffDim + 2 * (a + 1)) : std::int16_t{1};
    if (d <= 0) throw Error(ErrorKind::CorruptHeader, "NIfTI dimension must be positive");
    g.dims[a] = static_cast<std::size_t>(d);
  }
  for (int a = 3; a < ndim; ++a)
    if (get<std::int16_t>(b, kOffDim + 2 * (a + 1)) != 1)
      throw Error(ErrorKind::UnsupportedFormat, "only 3D volumes are supported");
  for (int a = 0; a < 3; ++a) {
    const double s = a < ndim ? std::abs(static_cast<double>(get<float>(b, kOffPixdim + 4 * (a + 1)))) : 1.0;
    if (!(s > 0.0) || !std::isfinite(s)) throw Error(ErrorKind::CorruptHeader, "NIfTI pixdim must be positive");
    g.spacing[a] = s;
  }

  const auto datatype = get<std::int16_t>(b, kOffDatatype);
  std::size_t bytes_per_voxel = 0;
  switch (datatype) {
    case kDtUint8: bytes_per_voxel = 1; break;
    case kDtInt16: bytes_per_voxel = 2; break;
    case kDtInt32: bytes_per_voxel = 4; break;
    default:
      throw Error(ErrorKind::UnsupportedDatatype,
                  "NIfTI datatype " + std::to_string(datatype) + " is not an accepted integer type");
  }
  const float slope = get<float>(b, kOffSclSlope);
  const float inter = get<float>(b, kOffSclInter);
  if ((slope != 0.0f && slope != 1.0f) || (slope != 0.0f && inter != 0.0f))
    throw Error(ErrorKind::UnsupportedDatatype, "scaled NIfTI intensities cannot hold labels");

  const auto qform = get<std::int16_t>(b, kOffQformCode);
  const auto sform = get<std::int16_t>(b, kOffSformCode);
  if (sform > 0) {
    double m[3][4];
    double largest = 0.0;
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        m[i][j] = get<float>(b, kOffSrow + 16 * i + 4 * j);
        if (j < 3) largest = std::max(largest, std::abs(m[i][j]));
      }
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 3; ++j)
        if (i != j && std::abs(m[i][j]) > 1e-4 * largest)
          throw Error(ErrorKind::NotAxisAligned, "NIfTI sform is not axis-aligned");
    for (int a = 0; a < 3; ++a) {
      g.direction[a] = sign_of(m[a][a]);
      g.origin[a] = m[a][3];
    }
  } else if (qform > 0) {
    double qfac = get<float>(b, kOffPixdim);
    if (qfac == 0.0) qfac = 1.0;
    if (!quaternion_axis_aligned(get<float>(b, kOffQuatern), get<float>(b, kOffQuatern + 4),
                                 get<float>(b, kOffQuatern + 8), qfac, g.direction))
      throw Error(ErrorKind::NotAxisAligned, "NIfTI qform is not axis-aligned");
    for (int a = 0; a < 3; ++a) g.origin[a] = get<float>(b, kOffQoffset + 4 * a);
  }

  const float vox_offset = get<float>(b, kOffVoxOffset);
  if (!(vox_offset >= static_cast<float>(kNiftiHeaderSize)) || vox_offset != std::floor(vox_offset))
    throw Error(ErrorKind::CorruptHeader, "NIfTI vox_offset is invalid");
  const auto start = static_cast<std::size_t>(vox_offset);
  if (start > b.size()) throw Error(ErrorKind::CorruptPayload, "NIfTI vox_offset beyond end of file");
  const std::size_t expected = g.size() * bytes_per_voxel;
  const std::size_t payload = b.size() - start;
  if (payload != expected)
    throw Error(ErrorKind::CorruptPayload,
                "NIfTI header declares " + std::to_string(g.size()) + " voxels (" +
                    std::to_string(expected) + " bytes) but payload holds " + std::to_string(payload) +
                    " bytes");

  std::vector<Label> labels(g.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    std::int64_t v = 0;
    const std::size_t off = start + i * bytes_per_voxel;
    switch (datatype) {
      case kDtUint8: v = b[off]; break;
      case kDtInt16: v = get<std::int16_t>(b, off); break;
      case kDtInt32: v = get<std::int32_t>(b, off); break;
    }
    if (v < 0 || v > 255)
      throw Error(ErrorKind::UnknownLabel, "voxel label " + std::to_string(v) + " is outside 0..255");
    labels[i] = static_cast<Label>(v);
  }
  return LabelVolume(g, std::move(labels));
}

}  // namespace

VolumeFormat format_for_path(const std::filesystem::path& path) {
  const std::string s = path.string();
  if (ends_with(s, ".nii.gz")) return VolumeFormat::NiftiGz;
  if (ends_with(s, ".nii")) return VolumeFormat::Nifti;
  if (ends_with(s, ".vsraw")) return VolumeFormat::Raw;
  throw Error(ErrorKind::UnsupportedFormat, "unrecognised volume extension: " + s);
}

LabelVolume decode_volume(std::span<const std::uint8_t> bytes) {
  if (bytes.size() >= sizeof(kRawMagic) && std::memcmp(bytes.data(), kRawMagic, sizeof(kRawMagic)) == 0)
    return decode_raw(bytes);
  if (bytes.size() >= 4) {
    const auto sizeof_hdr = get<std::int32_t>(bytes, 0);
    if (sizeof_hdr == static_cast<std::int32_t>(kNiftiHeaderSize)) return decode_nifti(bytes);
    if (static_cast<std::int32_t>(__builtin_bswap32(static_cast<std::uint32_t>(sizeof_hdr))) == static_cast<std::int32_t>(kNiftiHeaderSize))
      throw Error(ErrorKind::UnsupportedFormat, "big-endian NIfTI is not supported");
  }
  throw Error(ErrorKind::UnsupportedFormat, "content is neither NIfTI-1 nor a raw label fixture");
}

LabelVolume load_volume(const std::filesystem::path& path) {
  const auto bytes = read_all(path);
  try {
    return decode_volume(bytes);
  } catch (const Error& e) {
    throw Error(e.kind(), path.string() + ": " + e.what());
  }
}

std::vector<std::uint8_t> encode_nifti(const LabelVolume& v) {
  const Grid& g = v.grid();
  for (auto d : g.dims)
    if (d > 32767) throw Error(ErrorKind::InvalidArgument, "dimension too large for NIfTI-1");
  constexpr std::size_t kVoxOffset = kNiftiHeaderSize + 4;
  std::vector<std::uint8_t> b(kVoxOffset + v.size(), 0);
  put<std::int32_t>(b, 0, static_cast<std::int32_t>(kNiftiHeaderSize));
  put<std::int16_t>(b, kOffDim, 3);
  for (int a = 0; a < 3; ++a) put<std::int16_t>(b, kOffDim + 2 * (a + 1), static_cast<std::int16_t>(g.dims[a]));
  for (int a = 4; a < 8; ++a) put<std::int16_t>(b, kOffDim + 2 * a, 1);
  put<std::int16_t>(b, kOffDatatype, kDtUint8);
  put<std::int16_t>(b, kOffBitpix, 8);
  put<float>(b, kOffPixdim, 1.0f);
  for (int a = 0; a < 3; ++a) put<float>(b, kOffPixdim + 4 * (a + 1), static_cast<float>(g.spacing[a]));
  put<float>(b, kOffVoxOffset, static_cast<float>(kVoxOffset));
  put<float>(b, kOffSclSlope, 1.0f);
  b[kOffXyztUnits] = 2;  // mm
  const char descrip[] = "volseg label volume";
  std::memcpy(b.data() + kOffDescrip, descrip, sizeof(descrip) - 1);
  put<std::int16_t>(b, kOffSformCode, 1);
  for (int a = 0; a < 3; ++a) {
    put<float>(b, kOffSrow + 16 * a + 4 * a, static_cast<float>(g.direction[a] * g.spacing[a]));
    put<float>(b, kOffSrow + 16 * a + 12, static_cast<float>(g.origin[a]));
  }
  std::memcpy(b.data() + kOffMagic, "n+1\0", 4);
  std::memcpy(b.data() + kVoxOffset, v.labels().data(), v.size());
  return b;
}

std::vector<std::uint8_t> encode_raw(const LabelVolume& v) {
  const Grid& g = v.grid();
  std::vector<std::uint8_t> b(kRawHeaderSize + v.size());
  std::memcpy(b.data(), kRawMagic, sizeof(kRawMagic));
  for (int a = 0; a < 3; ++a) {
    if (g.dims[a] > 0xFFFFFFFFu) throw Error(ErrorKind::InvalidArgument, "dimension too large for raw format");
    put<std::uint32_t>(b, 8 + 4 * a, static_cast<std::uint32_t>(g.dims[a]));
    put<double>(b, 20 + 8 * a, g.spacing[a]);
    put<double>(b, 44 + 8 * a, g.origin[a]);
  }
  std::memcpy(b.data() + kRawHeaderSize, v.labels().data(), v.size());
  return b;
}

void write_volume(const LabelVolume& v, const std::filesystem::path& path) {
  switch (format_for_path(path)) {
    case VolumeFormat::Nifti: write_all(path, encode_nifti(v), false); break;
    case VolumeFormat::NiftiGz: write_all(path, encode_nifti(v), true); break;
    case VolumeFormat::Raw: write_all(path, encode_raw(v), false); break;
  }
}

}  // namespace volseg
