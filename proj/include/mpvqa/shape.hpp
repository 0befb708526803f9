// SPDX-License-Identifier: Apache-2.0
//
// Per-component shape descriptors and the five-way shape category.
#pragma once

#include "mpvqa/mesh.hpp"
#include "mpvqa/morphology.hpp"
#include "mpvqa/volume.hpp"

#include <Eigen/Core>

#include <array>
#include <string_view>
#include <vector>

namespace mpvqa {

struct ShapeMetrics {
  double volume = 0;       // mm^3
  double area = 0;         // mm^2
  double sphericity = 0;   // pi^(1/3) (6V)^(2/3) / A
  double compactness = 0;  // A / V, 1/mm
  std::array<double, 3> eigenvalues{0, 0, 0};  // descending, mm^2
  double elongation = 1;   // sqrt(l1 / l2)
  double flatness = 1;     // sqrt(l3 / l2)
  double solidity = 1;     // V / V_hull
};

/// Eigenvalues (descending, clamped at 0) of the biased covariance of the
/// world-space voxel coordinates (index * spacing).
std::array<double, 3> pca_axes(const std::vector<Eigen::Vector3d>& points);

/// Covariance matrix used by pca_axes.
Eigen::Matrix3d coordinate_covariance(const std::vector<Eigen::Vector3d>& points);

/// Metrics for one component of a labeling. Components with fewer than 3
/// voxels, or a vanishing second or third eigenvalue, get the single-voxel
/// variance floor s^2/12 added per axis before ratios are taken. Solidity uses
/// voxel corners for the hull.
ShapeMetrics shape_metrics(const ComponentLabeling& labeling, std::size_t component);

/// Convenience: metrics of a mask treated as one component (all foreground
/// voxels, connected or not).
ShapeMetrics shape_metrics(const Volume3D& component_mask);

/// The core component's metrics when there is one component or the core holds
/// at least 70% of the volume; otherwise the unweighted mean of every field.
ShapeMetrics aggregate_metrics(const std::vector<ShapeMetrics>& per_component, double core_fraction);

enum class ShapeCategory { focus, round, oval, elongated, irregular, not_applicable };

std::string_view to_string(ShapeCategory category);
ShapeCategory parse_shape(std::string_view text);

inline constexpr double kFocusVolumeMm3 = 100.0;  // 0.1 cm^3

/// First match wins: focus (V_tot < 100 mm^3), round (phi >= 0.85, E <= 1.3),
/// oval (0.60 <= phi < 0.85, 1.3 < E <= 2.5), elongated (E > 2.5), irregular.
ShapeCategory shape_classify(double sphericity, double elongation, double total_volume_mm3);
ShapeCategory shape_classify(const ShapeMetrics& aggregated, double total_volume_mm3);

}  // namespace mpvqa
