// SPDX-License-Identifier: Apache-2.0
#pragma once

#include "mpvqa/volume.hpp"

namespace mpvqa {

enum class Interpolation { nearest, trilinear };

/// Reorients and resamples onto an axis-aligned RAS grid with the given
/// spacing. The output grid tiles the world-space bounding box of the input's
/// voxel extents (edges, not centers), so a volume already in RAS at the
/// target spacing maps to itself and a 2 mm voxel becomes a 2x2x2 block at
/// 1 mm. Samples outside the input read as zero.
///
/// Label masks must use nearest; it keeps the integer datatype. Trilinear
/// output is float64. Throws GeometryError for a singular affine or a
/// non-positive spacing.
Volume3D conform_to_ras(const Volume3D& vol, const Spacing& target_spacing,
                        Interpolation interpolation = Interpolation::nearest);

}  // namespace mpvqa
