// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <vector>

namespace mpvqa {

struct ConvexHull {
  std::vector<Eigen::Vector3d> points;            // input points
  std::vector<std::array<int, 3>> faces;          // outward-wound triangles
  double volume = 0.0;
};

/// Quickhull in 3D. Points within a scale-relative tolerance of a face plane
/// count as on the hull, so lattice inputs with many coplanar points are fine.
/// Throws DegenerateHullError when all points are (nearly) coplanar.
ConvexHull convex_hull(const std::vector<Eigen::Vector3d>& points);

/// Hull volume, summing signed tetrahedra from the hull centroid.
double convex_hull_volume(const std::vector<Eigen::Vector3d>& points);

}  // namespace mpvqa
