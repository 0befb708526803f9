// SPDX-License-Identifier: Apache-2.0
//
// 26-connected component labeling and the lesion spread pattern.
#pragma once

#include "mpvqa/volume.hpp"

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

namespace mpvqa {

struct ComponentLabeling {
  Dims dims{0, 0, 0};
  Spacing spacing{1, 1, 1};
  /// 0 for background, c + 1 for voxels of component c.
  std::vector<std::int32_t> component_id;
  /// Sorted by decreasing voxel count, ties by lowest first-voxel linear
  /// index, so the core is always component 0.
  std::vector<std::size_t> component_voxels;
  std::vector<double> component_volumes;  // mm^3
  std::vector<std::size_t> first_voxel;   // lowest linear index per component

  std::size_t n_components() const { return component_voxels.size(); }
  std::size_t total_voxels() const;
  double total_volume() const;
  static constexpr std::size_t core_index = 0;
  /// Core volume over total volume; 0 for an empty mask.
  double core_fraction() const;

  /// Voxel linear indices of one component, ascending.
  std::vector<std::size_t> voxels_of(std::size_t component) const;
};

/// Two-pass union-find labeling; every nonzero element is foreground.
ComponentLabeling connected_components(const Volume3D& mask);

enum class SpreadCategory { single_lesion, core_with_satellites, scattered, not_applicable };

std::string_view to_string(SpreadCategory category);
/// Inverse of to_string; throws ConfigError on unknown text.
SpreadCategory parse_spread(std::string_view text);

struct SpreadDescriptor {
  SpreadCategory category = SpreadCategory::not_applicable;
  double core_fraction = 0.0;
  std::size_t n_components = 0;
};

inline constexpr double kCoreFractionThreshold = 0.7;

/// 0 components -> N/A; 1 -> single lesion; several with core_fraction >= 0.7
/// -> core with satellite lesions; otherwise scattered lesions.
SpreadCategory classify_spread(std::size_t n_components, double core_fraction);
SpreadDescriptor spread_classify(const ComponentLabeling& labeling);

}  // namespace mpvqa
