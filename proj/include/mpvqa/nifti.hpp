// SPDX-License-Identifier: Apache-2.0
//
// Single-file NIfTI-1 (.nii / .nii.gz) reader and writer.
#pragma once

#include "mpvqa/volume.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

namespace mpvqa {

using Bytes = std::vector<std::uint8_t>;

/// Decodes a NIfTI-1 image, transparently inflating gzip input. Intensity
/// scaling (scl_slope/scl_inter) is applied when the slope is nonzero; a
/// non-identity scaling promotes the datatype to float64.
///
/// Throws FormatError (bad magic, NIfTI-2, header/image pair, more than three
/// non-singleton dims), UnsupportedDatatypeError, LengthMismatchError.
Volume3D parse_nifti(std::span<const std::uint8_t> bytes);

/// Encodes as little-endian "n+1" with vox_offset 352 and the affine in the
/// sform rows. Throws CapacityError when a dim exceeds 32767.
Bytes write_nifti(const Volume3D& vol);

Volume3D read_nifti(const std::filesystem::path& path);
/// Gzip-compresses when the path ends in ".gz".
void write_nifti_file(const Volume3D& vol, const std::filesystem::path& path);

bool is_gzip(std::span<const std::uint8_t> bytes);
Bytes gzip_compress(std::span<const std::uint8_t> bytes);
Bytes gzip_decompress(std::span<const std::uint8_t> bytes);

}  // namespace mpvqa
