// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/volume.hpp"

#include "mpvqa/error.hpp"

#include <Eigen/LU>

#include <algorithm>
#include <cmath>

namespace mpvqa {

bool is_supported_datatype(int code) { return datatype_bytes(code) > 0; }

int datatype_bytes(int code) {
  switch (code) {
    case dt::uint8:
    case dt::int8:
      return 1;
    case dt::int16:
    case dt::uint16:
      return 2;
    case dt::int32:
    case dt::uint32:
    case dt::float32:
      return 4;
    case dt::float64:
    case dt::int64:
    case dt::uint64:
      return 8;
    default:
      return 0;
  }
}

bool is_integer_datatype(int code) {
  return is_supported_datatype(code) && code != dt::float32 && code != dt::float64;
}

std::string orientation_code(const Eigen::Matrix4d& affine) {
  static constexpr char positive[3] = {'R', 'A', 'S'};
  static constexpr char negative[3] = {'L', 'P', 'I'};
  // Greedy assignment on |entry|, largest first, so the result is always a
  // permutation even for oblique affines.
  struct Cand {
    double mag;
    int world;
    int voxel;
  };
  std::vector<Cand> cands;
  for (int w = 0; w < 3; ++w)
    for (int v = 0; v < 3; ++v) cands.push_back({std::abs(affine(w, v)), w, v});
  std::stable_sort(cands.begin(), cands.end(), [](const Cand& a, const Cand& b) {
    if (a.mag != b.mag) return a.mag > b.mag;
    if (a.voxel != b.voxel) return a.voxel < b.voxel;
    return a.world < b.world;
  });
  std::string code(3, '?');
  bool world_used[3] = {false, false, false};
  for (const auto& c : cands) {
    if (code[c.voxel] != '?' || world_used[c.world]) continue;
    world_used[c.world] = true;
    code[c.voxel] = affine(c.world, c.voxel) >= 0 ? positive[c.world] : negative[c.world];
  }
  return code;
}

std::string VolumeHeader::orientation() const { return orientation_code(affine); }

void VolumeHeader::validate() const {
  for (auto d : dims)
    if (d < 1) throw GeometryError("volume dims must be >= 1");
  for (auto s : pixdim)
    if (!(s > 0) || !std::isfinite(s)) throw GeometryError("volume pixdim must be positive and finite");
  const Eigen::Matrix3d linear = affine.topLeftCorner<3, 3>();
  if (!affine.allFinite()) throw GeometryError("affine has non-finite entries");
  const double scale = linear.cwiseAbs().maxCoeff();
  if (scale == 0 || std::abs(linear.determinant()) <= 1e-12 * scale * scale * scale)
    throw GeometryError("affine is not invertible");
}

VolumeHeader VolumeHeader::make(Dims dims, Spacing spacing, int datatype_code) {
  VolumeHeader h;
  h.dims = dims;
  h.pixdim = spacing;
  h.datatype_code = datatype_code;
  h.affine = Eigen::Matrix4d::Identity();
  for (int a = 0; a < 3; ++a) h.affine(a, a) = spacing[a];
  return h;
}

double voxel_volume(const VolumeHeader& header) {
  return header.pixdim[0] * header.pixdim[1] * header.pixdim[2];
}

Volume3D::Volume3D(VolumeHeader header, std::vector<double> data)
    : header_(std::move(header)), data_(std::move(data)) {
  header_.validate();
  if (data_.size() != header_.voxel_count())
    throw LengthMismatchError("volume data length " + std::to_string(data_.size()) +
                              " does not match dims product " +
                              std::to_string(header_.voxel_count()));
  for (double v : data_)
    if (!std::isfinite(v)) throw FormatError("volume contains non-finite values");
}

Volume3D::Volume3D(VolumeHeader header) : header_(std::move(header)) {
  header_.validate();
  data_.assign(header_.voxel_count(), 0.0);
}

bool Volume3D::same_grid(const Volume3D& other) const {
  if (header_.dims != other.header_.dims) return false;
  return (header_.affine - other.header_.affine).cwiseAbs().maxCoeff() <= 1e-6;
}

std::size_t Volume3D::count_nonzero() const {
  return static_cast<std::size_t>(
      std::count_if(data_.begin(), data_.end(), [](double v) { return v != 0.0; }));
}

LabelMask::LabelMask(Volume3D volume, std::map<int, std::string> label_names)
    : volume_(std::move(volume)), label_names_(std::move(label_names)) {
  for (double v : volume_.data()) {
    if (v < 0 || v != std::floor(v)) throw FormatError("label volume holds a non-label value");
    if (v != 0) label_set_.insert(static_cast<int>(v));
  }
  if (!label_names_.empty())
    for (int label : label_set_)
      if (!label_names_.count(label))
        throw ConfigError("label " + std::to_string(label) + " has no configured name");
}

Volume3D LabelMask::binary(int label) const {
  VolumeHeader h = volume_.header();
  h.datatype_code = dt::uint8;
  std::vector<double> out(volume_.size());
  const auto& src = volume_.data();
  for (std::size_t i = 0; i < src.size(); ++i) out[i] = src[i] == label ? 1.0 : 0.0;
  return Volume3D(std::move(h), std::move(out));
}

}  // namespace mpvqa
