// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/shape.hpp"

#include "mpvqa/error.hpp"
#include "mpvqa/hull.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <unordered_map>

namespace mpvqa {

namespace {

std::array<double, 3> sorted_eigenvalues(const Eigen::Matrix3d& cov) {
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix3d> solver(cov, Eigen::EigenvaluesOnly);
  const Eigen::Vector3d ev = solver.eigenvalues();  // ascending
  return {std::max(ev[2], 0.0), std::max(ev[1], 0.0), std::max(ev[0], 0.0)};
}

// Hull input: per column of voxel corners along z, only the lowest and the
// highest corner can be extreme.
std::vector<Eigen::Vector3d> corner_points(const std::vector<std::array<std::int64_t, 3>>& voxels,
                                           const Spacing& s) {
  struct Range {
    std::int64_t lo, hi;
  };
  std::unordered_map<std::uint64_t, Range> columns;
  auto key = [](std::int64_t x, std::int64_t y) {
    return (static_cast<std::uint64_t>(x + (1 << 20)) << 32) | static_cast<std::uint64_t>(y + (1 << 20));
  };
  for (const auto& v : voxels)
    for (int dx = 0; dx < 2; ++dx)
      for (int dy = 0; dy < 2; ++dy) {
        auto [it, inserted] = columns.try_emplace(key(v[0] + dx, v[1] + dy), Range{v[2], v[2] + 1});
        if (!inserted) {
          it->second.lo = std::min(it->second.lo, v[2]);
          it->second.hi = std::max(it->second.hi, v[2] + 1);
        }
      }
  std::vector<Eigen::Vector3d> pts;
  pts.reserve(columns.size() * 2);
  for (const auto& [k, r] : columns) {
    const auto cx = static_cast<std::int64_t>(k >> 32) - (1 << 20);
    const auto cy = static_cast<std::int64_t>(k & 0xffffffffULL) - (1 << 20);
    // Corner (c) sits half a voxel below center c.
    for (auto cz : {r.lo, r.hi})
      pts.emplace_back((static_cast<double>(cx) - 0.5) * s[0], (static_cast<double>(cy) - 0.5) * s[1],
                       (static_cast<double>(cz) - 0.5) * s[2]);
  }
  // Deterministic order regardless of hash iteration.
  std::sort(pts.begin(), pts.end(), [](const Eigen::Vector3d& a, const Eigen::Vector3d& b) {
    return std::lexicographical_compare(a.data(), a.data() + 3, b.data(), b.data() + 3);
  });
  return pts;
}

ShapeMetrics metrics_from_voxels(const Dims& dims, const Spacing& spacing,
                                 const std::vector<std::size_t>& linear) {
  if (linear.empty()) throw EmptyMeshError("shape metrics of an empty component");
  std::vector<std::array<std::int64_t, 3>> voxels;
  std::vector<Eigen::Vector3d> centers;
  voxels.reserve(linear.size());
  centers.reserve(linear.size());
  for (auto idx : linear) {
    const auto i = static_cast<std::int64_t>(idx % static_cast<std::size_t>(dims[0]));
    const auto rest = static_cast<std::int64_t>(idx / static_cast<std::size_t>(dims[0]));
    const std::array<std::int64_t, 3> v{i, rest % dims[1], rest / dims[1]};
    voxels.push_back(v);
    centers.emplace_back(static_cast<double>(v[0]) * spacing[0], static_cast<double>(v[1]) * spacing[1],
                         static_cast<double>(v[2]) * spacing[2]);
  }

  ShapeMetrics m;
  const double dv = spacing[0] * spacing[1] * spacing[2];
  m.volume = static_cast<double>(linear.size()) * dv;
  m.area = mesh_area(marching_cubes(dims, spacing, linear));
  m.sphericity = std::cbrt(std::numbers::pi) * std::pow(6.0 * m.volume, 2.0 / 3.0) / m.area;
  m.compactness = m.area / m.volume;

  Eigen::Matrix3d cov = coordinate_covariance(centers);
  auto ev = sorted_eigenvalues(cov);
  const double floor_scale = std::max({spacing[0], spacing[1], spacing[2]});
  const double tiny = 1e-12 * std::max(ev[0], floor_scale * floor_scale);
  if (linear.size() < 3 || ev[1] <= tiny || ev[2] <= tiny) {
    for (int a = 0; a < 3; ++a) cov(a, a) += spacing[a] * spacing[a] / 12.0;
    ev = sorted_eigenvalues(cov);
  }
  m.eigenvalues = ev;
  m.elongation = std::sqrt(ev[0] / ev[1]);
  m.flatness = std::sqrt(ev[2] / ev[1]);

  m.solidity = m.volume / convex_hull_volume(corner_points(voxels, spacing));
  return m;
}

}  // namespace

Eigen::Matrix3d coordinate_covariance(const std::vector<Eigen::Vector3d>& points) {
  Eigen::Vector3d mean = Eigen::Vector3d::Zero();
  for (const auto& p : points) mean += p;
  mean /= static_cast<double>(points.size());
  Eigen::Matrix3d cov = Eigen::Matrix3d::Zero();
  for (const auto& p : points) {
    const Eigen::Vector3d d = p - mean;
    cov += d * d.transpose();
  }
  return cov / static_cast<double>(points.size());
}

std::array<double, 3> pca_axes(const std::vector<Eigen::Vector3d>& points) {
  if (points.empty()) throw ShapeError("pca_axes needs at least one point");
  return sorted_eigenvalues(coordinate_covariance(points));
}

ShapeMetrics shape_metrics(const ComponentLabeling& labeling, std::size_t component) {
  return metrics_from_voxels(labeling.dims, labeling.spacing, labeling.voxels_of(component));
}

ShapeMetrics shape_metrics(const Volume3D& component_mask) {
  std::vector<std::size_t> voxels;
  const auto& data = component_mask.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i] != 0) voxels.push_back(i);
  return metrics_from_voxels(component_mask.dims(), component_mask.spacing(), voxels);
}

ShapeMetrics aggregate_metrics(const std::vector<ShapeMetrics>& per_component, double core_fraction) {
  if (per_component.empty()) throw ShapeError("aggregate_metrics needs at least one component");
  if (per_component.size() == 1 || core_fraction >= kCoreFractionThreshold) return per_component.front();
  ShapeMetrics mean;
  mean.elongation = mean.flatness = mean.solidity = 0;
  for (const auto& m : per_component) {
    mean.volume += m.volume;
    mean.area += m.area;
    mean.sphericity += m.sphericity;
    mean.compactness += m.compactness;
    for (int a = 0; a < 3; ++a) mean.eigenvalues[a] += m.eigenvalues[a];
    mean.elongation += m.elongation;
    mean.flatness += m.flatness;
    mean.solidity += m.solidity;
  }
  const double n = static_cast<double>(per_component.size());
  mean.volume /= n;
  mean.area /= n;
  mean.sphericity /= n;
  mean.compactness /= n;
  for (auto& e : mean.eigenvalues) e /= n;
  mean.elongation /= n;
  mean.flatness /= n;
  mean.solidity /= n;
  return mean;
}

std::string_view to_string(ShapeCategory category) {
  switch (category) {
    case ShapeCategory::focus: return "focus";
    case ShapeCategory::round: return "round";
    case ShapeCategory::oval: return "oval";
    case ShapeCategory::elongated: return "elongated";
    case ShapeCategory::irregular: return "irregular";
    case ShapeCategory::not_applicable: return "N/A";
  }
  return "N/A";
}

ShapeCategory parse_shape(std::string_view text) {
  for (auto c : {ShapeCategory::focus, ShapeCategory::round, ShapeCategory::oval, ShapeCategory::elongated,
                 ShapeCategory::irregular, ShapeCategory::not_applicable})
    if (to_string(c) == text) return c;
  throw ConfigError("unknown shape category '" + std::string(text) + "'");
}

ShapeCategory shape_classify(double sphericity, double elongation, double total_volume_mm3) {
  if (total_volume_mm3 < kFocusVolumeMm3) return ShapeCategory::focus;
  if (sphericity >= 0.85 && elongation <= 1.3) return ShapeCategory::round;
  if (sphericity >= 0.60 && sphericity < 0.85 && elongation > 1.3 && elongation <= 2.5)
    return ShapeCategory::oval;
  if (elongation > 2.5) return ShapeCategory::elongated;
  return ShapeCategory::irregular;
}

ShapeCategory shape_classify(const ShapeMetrics& aggregated, double total_volume_mm3) {
  return shape_classify(aggregated.sphericity, aggregated.elongation, total_volume_mm3);
}

}  // namespace mpvqa
