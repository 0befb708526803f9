// SPDX-License-Identifier: Apache-2.0
//
// Parameter checkpoints: "MOECKPT1", a little-endian u64 manifest length, a
// JSON manifest (config, granularity tags, seed, tensor table), then every
// tensor as little-endian float64 in manifest order.
#pragma once

#include "mpvqa/train.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace mpvqa {

std::vector<std::uint8_t> encode_checkpoint(const Model& model, std::uint64_t seed);
/// Throws FormatError on a bad magic, truncated payload or a tensor table that
/// does not match the manifest's config.
Model decode_checkpoint(const std::vector<std::uint8_t>& bytes, std::uint64_t* seed = nullptr);

void save_checkpoint(const std::filesystem::path& path, const Model& model, std::uint64_t seed);
Model load_checkpoint(const std::filesystem::path& path, std::uint64_t* seed = nullptr);

}  // namespace mpvqa
