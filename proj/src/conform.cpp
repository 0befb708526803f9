// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/conform.hpp"

#include "mpvqa/error.hpp"

#include <Eigen/LU>

#include <cmath>
#include <limits>

namespace mpvqa {

namespace {

double sample_trilinear(const Volume3D& vol, const Eigen::Vector3d& p) {
  const auto& d = vol.dims();
  const double fx = std::floor(p.x()), fy = std::floor(p.y()), fz = std::floor(p.z());
  const double tx = p.x() - fx, ty = p.y() - fy, tz = p.z() - fz;
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz)
    for (int dy = 0; dy < 2; ++dy)
      for (int dx = 0; dx < 2; ++dx) {
        const auto i = static_cast<std::int64_t>(fx) + dx;
        const auto j = static_cast<std::int64_t>(fy) + dy;
        const auto k = static_cast<std::int64_t>(fz) + dz;
        if (i < 0 || j < 0 || k < 0 || i >= d[0] || j >= d[1] || k >= d[2]) continue;
        const double w = (dx ? tx : 1 - tx) * (dy ? ty : 1 - ty) * (dz ? tz : 1 - tz);
        if (w != 0) acc += w * vol.at(i, j, k);
      }
  return acc;
}

}  // namespace

Volume3D conform_to_ras(const Volume3D& vol, const Spacing& target_spacing,
                        Interpolation interpolation) {
  for (double s : target_spacing)
    if (!(s > 0)) throw GeometryError("target spacing must be positive");
  const Eigen::Matrix4d& in_affine = vol.header().affine;
  vol.header().validate();
  const Eigen::Matrix4d inv = in_affine.inverse();

  const auto& d = vol.dims();
  Eigen::Vector3d lo = Eigen::Vector3d::Constant(std::numeric_limits<double>::infinity());
  Eigen::Vector3d hi = -lo;
  for (int corner = 0; corner < 8; ++corner) {
    Eigen::Vector4d idx(corner & 1 ? d[0] - 0.5 : -0.5, corner & 2 ? d[1] - 0.5 : -0.5,
                        corner & 4 ? d[2] - 0.5 : -0.5, 1.0);
    const Eigen::Vector3d w = (in_affine * idx).head<3>();
    lo = lo.cwiseMin(w);
    hi = hi.cwiseMax(w);
  }

  VolumeHeader out_header;
  out_header.pixdim = target_spacing;
  out_header.affine = Eigen::Matrix4d::Identity();
  for (int a = 0; a < 3; ++a) {
    const double extent = hi[a] - lo[a];
    out_header.dims[a] = std::max<std::int64_t>(1, std::llround(extent / target_spacing[a]));
    const double center = 0.5 * (lo[a] + hi[a]);
    out_header.affine(a, a) = target_spacing[a];
    out_header.affine(a, 3) = center - 0.5 * static_cast<double>(out_header.dims[a] - 1) * target_spacing[a];
  }
  out_header.datatype_code =
      interpolation == Interpolation::nearest ? vol.header().datatype_code : dt::float64;

  Volume3D out(out_header);
  const Eigen::Matrix4d to_input = inv * out_header.affine;
  const auto& od = out_header.dims;
  for (std::int64_t k = 0; k < od[2]; ++k)
    for (std::int64_t j = 0; j < od[1]; ++j)
      for (std::int64_t i = 0; i < od[0]; ++i) {
        const Eigen::Vector3d p =
            (to_input * Eigen::Vector4d(static_cast<double>(i), static_cast<double>(j),
                                        static_cast<double>(k), 1.0))
                .head<3>();
        double value = 0.0;
        if (interpolation == Interpolation::nearest) {
          const auto si = static_cast<std::int64_t>(std::floor(p.x() + 0.5));
          const auto sj = static_cast<std::int64_t>(std::floor(p.y() + 0.5));
          const auto sk = static_cast<std::int64_t>(std::floor(p.z() + 0.5));
          if (si >= 0 && sj >= 0 && sk >= 0 && si < d[0] && sj < d[1] && sk < d[2])
            value = vol.at(si, sj, sk);
        } else {
          value = sample_trilinear(vol, p);
        }
        out.at(i, j, k) = value;
      }
  return out;
}

}  // namespace mpvqa
