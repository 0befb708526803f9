// SPDX-License-Identifier: Apache-2.0
//
// Relative lesion volume, its bin, and atlas-based region localization.
#pragma once

#include "mpvqa/volume.hpp"

#include <array>
#include <cstddef>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace mpvqa {

inline constexpr std::array<std::string_view, 9> kRegionNames = {
    "frontal", "parietal", "occipital", "temporal", "limbic",
    "insula",  "subcortical", "cerebellum", "brainstem"};

/// Position of a name in kRegionNames, or -1.
int region_index(std::string_view name);

enum class VolumeBinCategory { lt1, p1_5, p5_10, p10_25, p25_50, p50_75, not_applicable };

inline constexpr std::array<std::string_view, 7> kVolumeBinNames = {
    "<1%", "1-5%", "5-10%", "10-25%", "25-50%", "50-75%", "N/A"};

std::string_view to_string(VolumeBinCategory category);
/// Accepts the bin strings; throws ConfigError otherwise.
VolumeBinCategory parse_volume_bin(std::string_view text);

struct VolumeBin {
  VolumeBinCategory category = VolumeBinCategory::not_applicable;
  double raw_fraction = 0.0;
  bool clamped = false;  // fraction was above 0.75
};

/// Mask voxels over nonzero brain voxels. Throws GeometryError when the grids
/// differ and UndefinedMetricError when the brain is empty.
double relative_volume(const Volume3D& mask, const Volume3D& brain);

/// Half-open bins, boundary in the upper bin; values above 0.75 clamp to
/// "50-75%" with `clamped` set. Throws ConfigError for negative or NaN input.
VolumeBin volume_bin(double fraction);

struct Atlas {
  LabelMask labels;
  std::map<int, std::string> region_map;  // atlas label -> region name
  std::string provenance;

  /// Throws ConfigError when a present nonzero label is unmapped or a name is
  /// outside the region vocabulary.
  void validate() const;
};

struct RegionAssignment {
  bool not_applicable = true;
  std::vector<std::string> regions;          // descending overlap, ties alphabetical
  std::vector<std::size_t> overlap_counts;   // aligned with regions
};

inline constexpr std::size_t kDefaultMinOverlapVoxels = 10;

/// Empty mask -> N/A. Otherwise every region whose summed overlap reaches
/// min_overlap_voxels. Throws GeometryError when the grids differ.
RegionAssignment region_overlap(const Volume3D& mask, const Atlas& atlas,
                                std::size_t min_overlap_voxels = kDefaultMinOverlapVoxels);

/// Parses "<int> = <name>" (also ':' or whitespace separated) lines; '#'
/// starts a comment. Names may contain spaces. Throws ConfigError.
std::map<int, std::string> parse_label_map(std::string_view text);

/// Nine axis-aligned blocks (3 along x, 3 along y, full z) labeled 1..9 and
/// mapped to kRegionNames in order. Meant for tests and fixtures.
Atlas make_block_atlas(const VolumeHeader& grid);

}  // namespace mpvqa
