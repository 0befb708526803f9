// SPDX-License-Identifier: Apache-2.0
//
// Dense 3D grids with NIfTI-style geometry. Voxel (i, j, k) lives at linear
// index i + dims[0] * (j + dims[1] * k), the on-disk order.
#pragma once

#include <Eigen/Core>

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace mpvqa {

/// NIfTI-1 datatype codes this library reads and writes.
namespace dt {
inline constexpr int uint8 = 2;
inline constexpr int int16 = 4;
inline constexpr int int32 = 8;
inline constexpr int float32 = 16;
inline constexpr int float64 = 64;
inline constexpr int int8 = 256;
inline constexpr int uint16 = 512;
inline constexpr int uint32 = 768;
inline constexpr int int64 = 1024;
inline constexpr int uint64 = 1280;
}  // namespace dt

bool is_supported_datatype(int code);
int datatype_bytes(int code);
bool is_integer_datatype(int code);

using Dims = std::array<std::int64_t, 3>;
using Spacing = std::array<double, 3>;

struct VolumeHeader {
  Dims dims{1, 1, 1};
  int datatype_code = dt::float32;
  Spacing pixdim{1.0, 1.0, 1.0};
  /// Voxel index (homogeneous) to world millimeters.
  Eigen::Matrix4d affine = Eigen::Matrix4d::Identity();

  /// Three-letter axis code such as "RAS" or "LPS", derived from the affine.
  std::string orientation() const;

  std::size_t voxel_count() const {
    return static_cast<std::size_t>(dims[0] * dims[1] * dims[2]);
  }

  /// Throws GeometryError when dims, pixdim or the affine are invalid.
  void validate() const;

  /// Header with a diagonal affine built from the spacing.
  static VolumeHeader make(Dims dims, Spacing spacing, int datatype_code = dt::float32);
};

/// Product of the voxel spacings, in mm^3.
double voxel_volume(const VolumeHeader& header);

/// Axis code for an arbitrary affine. Each voxel axis gets the world axis with
/// the largest-magnitude entry in its column; ties go to the lower index.
std::string orientation_code(const Eigen::Matrix4d& affine);

class Volume3D {
 public:
  Volume3D() = default;
  Volume3D(VolumeHeader header, std::vector<double> data);
  /// Zero-filled volume.
  explicit Volume3D(VolumeHeader header);

  const VolumeHeader& header() const { return header_; }
  const Dims& dims() const { return header_.dims; }
  const Spacing& spacing() const { return header_.pixdim; }
  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }
  std::size_t size() const { return data_.size(); }

  std::size_t index(std::int64_t i, std::int64_t j, std::int64_t k) const {
    return static_cast<std::size_t>(i + header_.dims[0] * (j + header_.dims[1] * k));
  }
  double at(std::int64_t i, std::int64_t j, std::int64_t k) const { return data_[index(i, j, k)]; }
  double& at(std::int64_t i, std::int64_t j, std::int64_t k) { return data_[index(i, j, k)]; }

  /// Same dims and (to 1e-6 mm) the same affine.
  bool same_grid(const Volume3D& other) const;

  std::size_t count_nonzero() const;

 private:
  VolumeHeader header_;
  std::vector<double> data_;
};

/// Integer label volume plus the clinical names of its labels.
class LabelMask {
 public:
  LabelMask() = default;
  /// Throws FormatError when an element is negative or non-integral.
  LabelMask(Volume3D volume, std::map<int, std::string> label_names = {});

  const Volume3D& volume() const { return volume_; }
  const std::set<int>& label_set() const { return label_set_; }
  const std::map<int, std::string>& label_names() const { return label_names_; }

  /// Binary volume (0/1) of the voxels carrying `label`.
  Volume3D binary(int label) const;

 private:
  Volume3D volume_;
  std::set<int> label_set_;
  std::map<int, std::string> label_names_;
};

}  // namespace mpvqa
