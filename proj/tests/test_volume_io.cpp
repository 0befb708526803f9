// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/conform.hpp"
#include "mpvqa/error.hpp"
#include "mpvqa/nifti.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <cstring>
#include <filesystem>
#include <random>

using namespace mpvqa;
using Catch::Approx;

namespace {

template <class T>
void put(Bytes& b, std::size_t off, T v) {
  std::memcpy(b.data() + off, &v, sizeof v);
}

// Header bytes laid out field by field from the NIfTI-1 byte map.
Bytes hand_header(std::int16_t datatype, std::int16_t bitpix, std::array<std::int16_t, 8> dim) {
  Bytes b(352, 0);
  put<std::int32_t>(b, 0, 348);
  for (int i = 0; i < 8; ++i) put<std::int16_t>(b, 40 + 2 * i, dim[i]);
  put<std::int16_t>(b, 70, datatype);
  put<std::int16_t>(b, 72, bitpix);
  for (int i = 0; i < 8; ++i) put<float>(b, 76 + 4 * i, 1.0f);
  put<float>(b, 108, 352.0f);
  std::memcpy(b.data() + 344, "n+1\0", 4);
  return b;
}

Volume3D zeros(Dims d, int code = dt::float32) { return Volume3D(VolumeHeader::make(d, {1, 1, 1}, code)); }

}  // namespace

TEST_CASE("zero volume survives a write/parse round trip") {
  const Volume3D v = zeros({4, 4, 4});
  const Volume3D back = parse_nifti(write_nifti(v));
  CHECK(back.dims() == v.dims());
  CHECK(back.spacing() == v.spacing());
  CHECK(back.data() == v.data());
  CHECK(back.header().orientation() == "RAS");
}

TEST_CASE("hand-built float32 header parses field by field") {
  Bytes b = hand_header(dt::float32, 32, {3, 4, 4, 4, 1, 1, 1, 1});
  for (int v = 0; v < 64; ++v) {
    const float f = static_cast<float>(v) * 0.5f;
    const auto* p = reinterpret_cast<const std::uint8_t*>(&f);
    b.insert(b.end(), p, p + 4);
  }
  REQUIRE(b.size() == 352 + 256);
  const Volume3D v = parse_nifti(b);
  CHECK(v.dims() == Dims{4, 4, 4});
  CHECK(v.header().datatype_code == dt::float32);
  CHECK(v.at(1, 0, 0) == 0.5);
  CHECK(v.at(3, 3, 3) == 31.5);
  // No sform/qform: diagonal pixdim affine.
  CHECK(v.header().affine.isApprox(Eigen::Matrix4d::Identity()));

  SECTION("a dim[0] of 8 with trailing unit dims is still 3D") {
    Bytes c = b;
    put<std::int16_t>(c, 40, 7);
    CHECK(parse_nifti(c).dims() == Dims{4, 4, 4});
  }
  SECTION("gzip wrapping is transparent") {
    const Bytes z = gzip_compress(b);
    CHECK(is_gzip(z));
    CHECK(parse_nifti(z).data() == v.data());
  }
  SECTION("a short payload is a length mismatch") {
    Bytes c(b.begin(), b.end() - 4);
    CHECK_THROWS_AS(parse_nifti(c), LengthMismatchError);
  }
  SECTION("bad magic") {
    Bytes c = b;
    c[345] = 'x';
    CHECK_THROWS_AS(parse_nifti(c), FormatError);
  }
  SECTION("header/image pair magic is rejected") {
    Bytes c = b;
    std::memcpy(c.data() + 344, "ni1\0", 4);
    CHECK_THROWS_AS(parse_nifti(c), FormatError);
  }
  SECTION("unknown datatype") {
    Bytes c = b;
    put<std::int16_t>(c, 70, 1536);  // float128
    CHECK_THROWS_AS(parse_nifti(c), UnsupportedDatatypeError);
  }
  SECTION("4D input") {
    Bytes c = b;
    put<std::int16_t>(c, 40, 4);
    put<std::int16_t>(c, 48, 2);
    CHECK_THROWS_AS(parse_nifti(c), FormatError);
  }
}

TEST_CASE("scl_slope promotes to float64 and scales") {
  Bytes b = hand_header(dt::int16, 16, {3, 2, 1, 1, 1, 1, 1, 1});
  put<float>(b, 112, 2.0f);
  put<float>(b, 116, 1.0f);
  for (std::int16_t v : {3, -4}) {
    const auto* p = reinterpret_cast<const std::uint8_t*>(&v);
    b.insert(b.end(), p, p + 2);
  }
  const Volume3D v = parse_nifti(b);
  CHECK(v.header().datatype_code == dt::float64);
  CHECK(v.data() == std::vector<double>{7.0, -7.0});
}

TEST_CASE("random integer mask round trips bit-identically, gzip included") {
  std::mt19937_64 g(11);
  std::uniform_int_distribution<int> lab(0, 4);
  Volume3D m = zeros({8, 8, 8}, dt::uint8);
  for (auto& x : m.data()) x = lab(g);
  const Volume3D a = parse_nifti(write_nifti(m));
  CHECK(a.data() == m.data());
  CHECK(a.header().datatype_code == dt::uint8);

  const auto dir = std::filesystem::temp_directory_path() / "mpvqa_test_volume_io";
  std::filesystem::create_directories(dir);
  write_nifti_file(m, dir / "m.nii.gz");
  CHECK(read_nifti(dir / "m.nii.gz").data() == m.data());
  std::filesystem::remove_all(dir);
}

TEST_CASE("values outside the datatype and huge dims are capacity errors") {
  Volume3D m = zeros({2, 1, 1}, dt::uint8);
  m.data()[0] = 300;
  CHECK_THROWS_AS(write_nifti(m), CapacityError);
  // Header only: a 70000-long axis cannot be stored in the 16-bit dim field.
  VolumeHeader h = VolumeHeader::make({70000, 1, 1}, {1, 1, 1}, dt::uint8);
  CHECK_THROWS_AS(write_nifti(Volume3D(h)), CapacityError);
}

TEST_CASE("voxel volume is the spacing product") {
  CHECK(voxel_volume(VolumeHeader::make({2, 2, 2}, {1, 1, 1})) == 1.0);
  CHECK(voxel_volume(VolumeHeader::make({2, 2, 2}, {1, 1, 2})) == 2.0);
  CHECK(voxel_volume(VolumeHeader::make({2, 2, 2}, {0.5, 0.5, 0.5})) == 0.125);
}

TEST_CASE("header validation") {
  VolumeHeader h = VolumeHeader::make({2, 2, 2}, {1, 1, 1});
  h.affine(2, 2) = 0;
  CHECK_THROWS_AS(h.validate(), GeometryError);
  CHECK_THROWS_AS(VolumeHeader::make({0, 2, 2}, {1, 1, 1}).validate(), GeometryError);
  CHECK_THROWS_AS(VolumeHeader::make({2, 2, 2}, {1, -1, 1}).validate(), GeometryError);
}

TEST_CASE("orientation codes follow the dominant affine axes") {
  Eigen::Matrix4d a = Eigen::Matrix4d::Identity();
  CHECK(orientation_code(a) == "RAS");
  a(0, 0) = -1;
  a(1, 1) = -1;
  CHECK(orientation_code(a) == "LPS");
  Eigen::Matrix4d p = Eigen::Matrix4d::Zero();
  p(3, 3) = 1;
  p(1, 0) = 1;   // i -> A
  p(2, 1) = -1;  // j -> I
  p(0, 2) = 1;   // k -> R
  CHECK(orientation_code(p) == "AIR");
}

TEST_CASE("label masks reject non-labels and unnamed labels") {
  Volume3D v = zeros({2, 1, 1});
  v.data() = {0.0, 1.5};
  CHECK_THROWS_AS(LabelMask(v), FormatError);
  v.data() = {0.0, -1.0};
  CHECK_THROWS_AS(LabelMask(v), FormatError);
  v.data() = {2.0, 3.0};
  CHECK_THROWS_AS(LabelMask(v, {{2, "two"}}), ConfigError);
  const LabelMask m(v);
  CHECK(m.label_set() == std::set<int>{2, 3});
  CHECK(m.binary(3).data() == std::vector<double>{0.0, 1.0});
}

TEST_CASE("conform is the identity on RAS input at the target spacing") {
  std::mt19937_64 g(5);
  Volume3D m = oracle::random_mask(g, {7, 5, 6}, 0.3);
  const Volume3D c = conform_to_ras(m, {1, 1, 1});
  CHECK(c.dims() == m.dims());
  CHECK(c.data() == m.data());
  CHECK(c.header().affine.isApprox(m.header().affine));
}

TEST_CASE("conforming LPS keeps a voxel's world position") {
  VolumeHeader h = VolumeHeader::make({9, 7, 5}, {1, 1, 1}, dt::uint8);
  h.affine(0, 0) = -1;
  h.affine(1, 1) = -1;
  h.affine(0, 3) = 12.0;
  h.affine(1, 3) = -3.0;
  h.affine(2, 3) = 4.0;
  Volume3D m(h);
  m.at(2, 5, 3) = 1;
  const Eigen::Vector4d before = h.affine * Eigen::Vector4d(2, 5, 3, 1);

  const Volume3D c = conform_to_ras(m, {1, 1, 1});
  CHECK(c.header().orientation() == "RAS");
  REQUIRE(c.count_nonzero() == 1);
  for (std::int64_t k = 0; k < c.dims()[2]; ++k)
    for (std::int64_t j = 0; j < c.dims()[1]; ++j)
      for (std::int64_t i = 0; i < c.dims()[0]; ++i) {
        if (c.at(i, j, k) == 0) continue;
        const Eigen::Vector4d after = c.header().affine * Eigen::Vector4d(i, j, k, 1);
        CHECK((after - before).head<3>().norm() <= 0.5);
      }
}

TEST_CASE("2 mm voxels become 2x2x2 blocks at 1 mm") {
  std::mt19937_64 g(9);
  std::uniform_int_distribution<int> lab(0, 3);
  Volume3D m(VolumeHeader::make({3, 4, 2}, {2, 2, 2}, dt::uint8));
  for (auto& x : m.data()) x = lab(g);
  const Volume3D c = conform_to_ras(m, {1, 1, 1});
  REQUIRE(c.dims() == Dims{6, 8, 4});
  CHECK(c.header().datatype_code == dt::uint8);
  bool all = true;
  for (std::int64_t k = 0; k < 4; ++k)
    for (std::int64_t j = 0; j < 8; ++j)
      for (std::int64_t i = 0; i < 6; ++i) all = all && c.at(i, j, k) == m.at(i / 2, j / 2, k / 2);
  CHECK(all);
}

TEST_CASE("trilinear conform returns float64 and bad spacing is rejected") {
  Volume3D m = zeros({4, 4, 4});
  for (auto& x : m.data()) x = 3.0;
  const Volume3D c = conform_to_ras(m, {1, 1, 1}, Interpolation::trilinear);
  CHECK(c.header().datatype_code == dt::float64);
  CHECK(c.at(1, 1, 1) == Approx(3.0));
  CHECK_THROWS_AS(conform_to_ras(m, {0, 1, 1}), GeometryError);
}
