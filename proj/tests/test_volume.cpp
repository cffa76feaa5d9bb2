#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstring>
#include <fstream>
#include <random>

#include "support/oracles.hpp"
#include "support/phantoms.hpp"
#include "volseg/volume.hpp"
#include "volseg/volume_io.hpp"

using namespace volseg;

namespace {

// Byte-level NIfTI-1 writer kept separate from the library encoder.
struct NiftiFixture {
  std::int16_t datatype = 2;
  std::int16_t bitpix = 8;
  std::array<std::int16_t, 3> dims{1, 1, 1};
  std::array<float, 3> pixdim{1, 1, 1};
  std::int16_t sform_code = 0;
  std::array<std::array<float, 4>, 3> srow{};
  std::int16_t qform_code = 0;
  std::array<float, 3> quatern{0, 0, 0};
  float scl_slope = 0.0f;
  std::vector<std::uint8_t> payload;

  std::vector<std::uint8_t> bytes() const {
    std::vector<std::uint8_t> b(352, 0);
    auto put = [&](std::size_t off, auto v) { std::memcpy(b.data() + off, &v, sizeof(v)); };
    put(0, std::int32_t{348});
    put(40, std::int16_t{3});
    for (int a = 0; a < 3; ++a) put(42 + 2 * a, dims[a]);
    put(70, datatype);
    put(72, bitpix);
    put(76, 1.0f);
    for (int a = 0; a < 3; ++a) put(80 + 4 * a, pixdim[a]);
    put(108, 352.0f);
    put(112, scl_slope);
    put(252, qform_code);
    put(254, sform_code);
    for (int a = 0; a < 3; ++a) put(256 + 4 * a, quatern[a]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) put(280 + 16 * i + 4 * j, srow[i][j]);
    std::memcpy(b.data() + 344, "n+1\0", 4);
    b.resize(352 + payload.size());
    if (!payload.empty()) std::memcpy(b.data() + 352, payload.data(), payload.size());
    return b;
  }
};

void write_bytes(const std::filesystem::path& p, const std::vector<std::uint8_t>& b) {
  std::ofstream os(p, std::ios::binary);
  os.write(reinterpret_cast<const char*>(b.data()), static_cast<std::streamsize>(b.size()));
}

ErrorKind kind_of(const std::function<void()>& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.kind();
  }
  FAIL("expected an error");
  return ErrorKind::Io;
}

}  // namespace

TEST_CASE("load_volume reads an all-background 4x4x4 volume") {
  phantom::TempDir dir("vol");
  NiftiFixture f;
  f.dims = {4, 4, 4};
  f.payload.assign(64, 0);
  write_bytes(dir / "zeros.nii", f.bytes());
  const auto v = load_volume(dir / "zeros.nii");
  CHECK(v.size() == 64);
  CHECK(std::all_of(v.labels().begin(), v.labels().end(), [](Label l) { return l == 0; }));
  CHECK(v.grid().spacing == Vec3{1, 1, 1});
}

TEST_CASE("payload shorter than the header declares is a corrupt payload") {
  NiftiFixture f;
  f.dims = {10, 10, 10};
  f.payload.assign(999, 0);
  CHECK(kind_of([&] { decode_volume(f.bytes()); }) == ErrorKind::CorruptPayload);

  std::vector<std::uint8_t> raw(kRawHeaderSize + 999, 0);
  std::memcpy(raw.data(), kRawMagic, 8);
  for (int a = 0; a < 3; ++a) {
    const std::uint32_t d = 10;
    const double s = 1.0;
    std::memcpy(raw.data() + 8 + 4 * a, &d, 4);
    std::memcpy(raw.data() + 20 + 8 * a, &s, 8);
  }
  CHECK(kind_of([&] { decode_volume(raw); }) == ErrorKind::CorruptPayload);
  raw.resize(kRawHeaderSize + 1001);
  CHECK(kind_of([&] { decode_volume(raw); }) == ErrorKind::CorruptPayload);
}

TEST_CASE("anisotropic 2x2x2 fixture keeps labels and spacing exactly") {
  NiftiFixture f;
  f.dims = {2, 2, 2};
  f.pixdim = {0.7f, 0.7f, 3.0f};
  f.payload = {0, 1, 2, 3, 3, 2, 1, 0};
  const auto v = decode_volume(f.bytes());
  CHECK(v.grid().dims == Index3{2, 2, 2});
  CHECK(v.grid().spacing == Vec3{double(0.7f), double(0.7f), 3.0});
  CHECK(std::vector<Label>(v.labels().begin(), v.labels().end()) == std::vector<Label>{0, 1, 2, 3, 3, 2, 1, 0});
  CHECK(v.at(1, 0, 0) == 1);  // x fastest
  CHECK(v.at(0, 1, 0) == 2);
  CHECK(v.at(0, 0, 1) == 3);
}

TEST_CASE("signed 16 and 32 bit payloads are accepted, other types are not") {
  NiftiFixture f;
  f.dims = {2, 1, 1};
  f.datatype = 4;
  f.bitpix = 16;
  f.payload = {1, 0, 117, 0};
  auto v = decode_volume(f.bytes());
  CHECK(v.labels()[0] == 1);
  CHECK(v.labels()[1] == 117);

  f.datatype = 8;
  f.bitpix = 32;
  f.payload = {2, 0, 0, 0, 0, 0, 0, 0};
  v = decode_volume(f.bytes());
  CHECK(v.labels()[0] == 2);

  f.payload = {0xff, 0xff, 0xff, 0xff, 0, 0, 0, 0};  // -1
  CHECK(kind_of([&] { decode_volume(f.bytes()); }) == ErrorKind::UnknownLabel);

  f.datatype = 16;  // float32
  CHECK(kind_of([&] { decode_volume(f.bytes()); }) == ErrorKind::UnsupportedDatatype);

  f.datatype = 2;
  f.bitpix = 8;
  f.payload = {0, 1};
  f.scl_slope = 2.0f;
  CHECK(kind_of([&] { decode_volume(f.bytes()); }) == ErrorKind::UnsupportedDatatype);
}

TEST_CASE("orientation: axis-aligned flips are accepted, oblique volumes rejected") {
  NiftiFixture f;
  f.dims = {2, 2, 2};
  f.payload.assign(8, 0);
  f.sform_code = 1;
  f.srow = {{{-0.8f, 0, 0, 10.0f}, {0, -0.8f, 0, 20.0f}, {0, 0, 2.5f, -30.0f}}};
  auto v = decode_volume(f.bytes());
  CHECK(v.grid().direction == std::array<int, 3>{-1, -1, 1});
  CHECK(v.grid().origin == Vec3{10.0, 20.0, -30.0});

  f.srow[0][1] = 0.3f;
  CHECK(kind_of([&] { decode_volume(f.bytes()); }) == ErrorKind::NotAxisAligned);

  f.sform_code = 0;
  f.qform_code = 1;
  f.quatern = {0, 0, 1};  // 180 degrees about z: diagonal (-1, -1, 1)
  v = decode_volume(f.bytes());
  CHECK(v.grid().direction == std::array<int, 3>{-1, -1, 1});
  f.quatern = {0, 0, 0.3826834f};  // 45 degrees about z
  CHECK(kind_of([&] { decode_volume(f.bytes()); }) == ErrorKind::NotAxisAligned);
}

TEST_CASE("unsupported containers are rejected") {
  CHECK(kind_of([] { decode_volume(std::vector<std::uint8_t>(400, 0)); }) == ErrorKind::UnsupportedFormat);
  NiftiFixture f;
  f.payload = {0};
  auto bytes = f.bytes();
  std::swap(bytes[0], bytes[3]);
  std::swap(bytes[1], bytes[2]);
  CHECK(kind_of([&] { decode_volume(bytes); }) == ErrorKind::UnsupportedFormat);
  bytes = f.bytes();
  std::memcpy(bytes.data() + 344, "ni1\0", 4);
  CHECK(kind_of([&] { decode_volume(bytes); }) == ErrorKind::UnsupportedFormat);
  CHECK(kind_of([] { load_volume("/nonexistent/volume.nii"); }) == ErrorKind::Io);
  CHECK(kind_of([] { format_for_path("volume.mha"); }) == ErrorKind::UnsupportedFormat);
}

TEST_CASE("write/load round trip preserves grid and labels in every container") {
  phantom::TempDir dir("rt");
  std::mt19937_64 rng(7);
  for (int trial = 0; trial < 12; ++trial) {
    Grid g = oracle::random_grid(rng, 9);
    // Dyadic spacing is exact in NIfTI's float32 pixdim.
    for (auto& s : g.spacing) s = std::round(s * 1024.0) / 1024.0;
    g.origin = {trial * 1.5, -4.0, 0.25};
    g.direction = {trial % 2 ? -1 : 1, 1, 1};
    const LabelVolume v = phantom::random_canonical(rng, g);
    for (const char* name : {"a.nii", "a.nii.gz", "a.vsraw"}) {
      write_volume(v, dir / name);
      const LabelVolume back = load_volume(dir / name);
      CHECK(back.grid().dims == v.grid().dims);
      CHECK(back.grid().spacing == v.grid().spacing);
      CHECK(std::equal(back.labels().begin(), back.labels().end(), v.labels().begin(), v.labels().end()));
      CHECK(back.grid().origin == v.grid().origin);
      if (std::string(name) != "a.vsraw") CHECK(back.grid().direction == v.grid().direction);
    }
  }
}

TEST_CASE("assert_same_grid") {
  Grid a = oracle::make_grid(512, 512, 100, {0.7, 0.7, 3.0});
  CHECK_NOTHROW(assert_same_grid(a, a));
  Grid b = a;
  b.dims[2] = 99;
  CHECK(kind_of([&] { assert_same_grid(a, b); }) == ErrorKind::GridMismatch);
  // |0.70003 - 0.7| / 0.70003 = 4.3e-5 < 1e-4
  b = a;
  b.spacing = {0.70003, 0.70003, 3.0};
  CHECK_NOTHROW(assert_same_grid(a, b));
  b.spacing = {0.7002, 0.7, 3.0};  // 2.9e-4 relative
  CHECK(kind_of([&] { assert_same_grid(a, b); }) == ErrorKind::GridMismatch);
}

TEST_CASE("harmonize_labels merges KiTS tumor and cyst into abnormality") {
  LabelVolume v(oracle::make_grid(4, 1, 1), {0, 1, 2, 3});
  const auto h = harmonize_labels(v, LabelScheme::kits());
  CHECK(std::vector<Label>(h.labels().begin(), h.labels().end()) == std::vector<Label>{0, 1, 2, 2});

  LabelVolume bg(oracle::make_grid(3, 3, 3));
  CHECK(harmonize_labels(bg, LabelScheme::kits()) == bg);

  LabelVolume bad(oracle::make_grid(2, 1, 1), {0, 7});
  CHECK(kind_of([&] { harmonize_labels(bad, LabelScheme::kits()); }) == ErrorKind::UnknownLabel);
}

TEST_CASE("harmonize_labels is idempotent on canonical volumes") {
  std::mt19937_64 rng(11);
  for (int i = 0; i < 20; ++i) {
    const auto v = phantom::random_canonical(rng, oracle::random_grid(rng, 8));
    const auto once = harmonize_labels(v, LabelScheme::canonical());
    CHECK(once == v);
    CHECK(harmonize_labels(once, LabelScheme::canonical()) == once);
  }
}

TEST_CASE("label schemes keep background at 0 and names injective") {
  CHECK_THROWS_AS(LabelScheme("bad", {{0, Semantic::Kidney}}), Error);
  CHECK_THROWS_AS(LabelScheme("bad", {{0, Semantic::Background}, {1, Semantic::Kidney}, {2, Semantic::Kidney}}), Error);
  CHECK(LabelScheme::by_name("kits").name() == "kits");
  CHECK_THROWS_AS(LabelScheme::by_name("nope"), Error);
  CHECK(LabelScheme::canonical().is_canonical());
  CHECK(LabelScheme::sided().is_sided());
  CHECK_FALSE(LabelScheme::kits().is_sided());
}

TEST_CASE("extract_region") {
  LabelVolume v(oracle::make_grid(3, 1, 1), {0, 1, 2});
  auto bits = [](const RegionMask& m) { return std::vector<std::uint8_t>(m.bits().begin(), m.bits().end()); };
  CHECK(bits(extract_region(v, Region::Kidney)) == std::vector<std::uint8_t>{0, 1, 0});
  CHECK(bits(extract_region(v, Region::Abnormality)) == std::vector<std::uint8_t>{0, 0, 1});
  CHECK(bits(extract_region(v, Region::KidneyPlusAbnormality)) == std::vector<std::uint8_t>{0, 1, 1});

  LabelVolume kidney(oracle::make_grid(2, 2, 2), std::vector<Label>(8, 1));
  CHECK(extract_region(kidney, Region::Kidney).count() == 8);
  CHECK(extract_region(kidney, Region::Abnormality).empty());

  // 1000-voxel phantom with 300 kidney and 50 abnormality voxels.
  std::vector<Label> labels(1000, 0);
  std::fill(labels.begin(), labels.begin() + 300, 1);
  std::fill(labels.begin() + 300, labels.begin() + 350, 2);
  std::shuffle(labels.begin(), labels.end(), std::mt19937_64(3));
  LabelVolume ph(oracle::make_grid(10, 10, 10), labels);
  const auto n_kidney = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 1));
  const auto n_abn = static_cast<std::size_t>(std::count(labels.begin(), labels.end(), 2));
  CHECK(extract_region(ph, Region::KidneyPlusAbnormality).count() == n_kidney + n_abn);
  CHECK(n_kidney + n_abn == 350);
}

TEST_CASE("merge_sides collapses left and right labels") {
  LabelVolume v(oracle::make_grid(5, 1, 1), {0, 1, 2, 3, 4});
  const auto m = merge_sides(v, LabelScheme::sided());
  CHECK(std::vector<Label>(m.labels().begin(), m.labels().end()) == std::vector<Label>{0, 1, 1, 2, 2});

  LabelVolume ts(oracle::make_grid(6, 1, 1), {0, 2, 3, 116, 117, 5});
  const auto mt = merge_sides(ts, LabelScheme::totalsegmentator());
  CHECK(std::vector<Label>(mt.labels().begin(), mt.labels().end()) == std::vector<Label>{0, 1, 1, 2, 2, 0});

  LabelVolume empty(oracle::make_grid(3, 3, 3));
  CHECK(merge_sides(empty, LabelScheme::sided()) == empty);

  LabelVolume unknown(oracle::make_grid(1, 1, 1), {200});
  CHECK(kind_of([&] { merge_sides(unknown, LabelScheme::totalsegmentator()); }) == ErrorKind::UnknownLabel);
  CHECK(kind_of([&] { merge_sides(empty, LabelScheme::kits()); }) == ErrorKind::InvalidArgument);
}

TEST_CASE("LabelVolume rejects inconsistent construction") {
  CHECK(kind_of([] { LabelVolume(oracle::make_grid(2, 2, 2), std::vector<Label>(7, 0)); }) == ErrorKind::CorruptPayload);
  CHECK(kind_of([] { LabelVolume(oracle::make_grid(2, 2, 2, {1, 0, 1})); }) == ErrorKind::InvalidArgument);
}
