// SPDX-License-Identifier: Apache-2.0
//
// Synthetic inputs: digitized solids, the bundled three-study data set with a
// block atlas, and metadata-only descriptor stubs.
#pragma once

#include "mpvqa/qagen.hpp"
#include "mpvqa/volume.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

namespace mpvqa {

/// uint8 mask of voxel centers with sum(((x - c) / a)^2) <= 1, in index units.
Volume3D ellipsoid_mask(const Dims& dims, const std::array<double, 3>& center,
                        const std::array<double, 3>& semi_axes, const Spacing& spacing = {1, 1, 1});
Volume3D sphere_mask(const Dims& dims, const std::array<double, 3>& center, double radius,
                     const Spacing& spacing = {1, 1, 1});

/// Clinical label names of the glioma set: 1 NETC, 2 SNFH, 3 ET, 4 RC.
std::map<int, std::string> glioma_labels();

struct FixtureLayout {
  std::filesystem::path studies;     // one subdirectory per study
  std::filesystem::path atlas;       // atlas.nii.gz
  std::filesystem::path region_map;  // region_map.txt
  std::filesystem::path labels;      // labels.txt
};

/// Writes three small studies (one stored in LPS orientation), a 9-block
/// atlas on the conformed grid, its region map, and the label config.
FixtureLayout make_fixture(const std::filesystem::path& dir);

/// Random categorical descriptors for `n_studies` x labels. Roughly one label
/// in eight is absent (all N/A).
std::vector<TaskDescriptors> synthetic_descriptors(std::size_t n_studies,
                                                   const std::vector<std::string>& labels,
                                                   std::uint64_t seed);

}  // namespace mpvqa
