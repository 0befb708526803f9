// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpvqa/volume.hpp"

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <array>
#include <cstdint>
#include <ostream>
#include <vector>

namespace mpvqa {

struct SurfaceMesh {
  std::vector<Eigen::Vector3d> vertices;          // world millimeters
  std::vector<std::array<std::uint32_t, 3>> triangles;  // counter-clockwise seen from outside
};

/// Iso-surface at level 0.5 of a binary mask, computed on a copy padded by
/// one background voxel so the surface is closed. Vertex positions are voxel
/// indices scaled by the spacing. Ambiguous cube faces always separate the
/// foreground corners, which makes neighbouring cubes agree and the mesh
/// watertight. A single-voxel mask yields the analytic octahedron.
///
/// Throws EmptyMeshError for an all-background mask.
SurfaceMesh marching_cubes(const Volume3D& mask);

/// Same, restricted to a list of foreground voxel linear indices of a grid.
SurfaceMesh marching_cubes(const Dims& dims, const Spacing& spacing,
                           const std::vector<std::size_t>& voxels);

/// Sum of triangle areas, 0.5 * |(q - p) x (r - p)|.
double mesh_area(const SurfaceMesh& mesh);

/// Enclosed volume by the divergence theorem; positive for outward winding.
double mesh_signed_volume(const SurfaceMesh& mesh);

/// Every undirected edge belongs to exactly two triangles.
bool mesh_is_closed(const SurfaceMesh& mesh);

/// Every directed edge appears once and its reverse once.
bool mesh_is_oriented(const SurfaceMesh& mesh);

/// ASCII OFF: header, counts, vertex coordinates, index triples.
void write_off(std::ostream& out, const SurfaceMesh& mesh);

/// Loops of cube-edge ids for one of the 256 corner configurations, oriented so
/// fan triangulation winds outward. Exposed for tests.
const std::vector<std::vector<int>>& marching_cubes_case(int config);

}  // namespace mpvqa
