// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/regions.hpp"

#include "mpvqa/error.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <sstream>

namespace mpvqa {

int region_index(std::string_view name) {
  for (std::size_t r = 0; r < kRegionNames.size(); ++r) {
    if (kRegionNames[r] == name) return static_cast<int>(r);
  }
  return -1;
}

std::string_view to_string(VolumeBinCategory category) {
  return kVolumeBinNames[static_cast<std::size_t>(category)];
}

VolumeBinCategory parse_volume_bin(std::string_view text) {
  for (std::size_t b = 0; b < kVolumeBinNames.size(); ++b) {
    if (kVolumeBinNames[b] == text) return static_cast<VolumeBinCategory>(b);
  }
  throw ConfigError("unknown volume bin '" + std::string(text) + "'");
}

double relative_volume(const Volume3D& mask, const Volume3D& brain) {
  if (!mask.same_grid(brain)) throw GeometryError("relative_volume: mask and brain grids differ");
  const std::size_t brain_voxels = brain.count_nonzero();
  if (brain_voxels == 0) throw UndefinedMetricError("relative_volume: brain has no nonzero voxels");
  return static_cast<double>(mask.count_nonzero()) / static_cast<double>(brain_voxels);
}

VolumeBin volume_bin(double fraction) {
  if (!(fraction >= 0.0)) throw ConfigError("volume_bin: fraction must be a number >= 0");
  VolumeBin bin;
  bin.raw_fraction = fraction;
  static constexpr double kUpper[] = {0.01, 0.05, 0.10, 0.25, 0.50};
  std::size_t b = 0;
  while (b < 5 && fraction >= kUpper[b]) ++b;
  bin.category = static_cast<VolumeBinCategory>(b);
  if (fraction > 0.75) {
    bin.clamped = true;
    bin.raw_fraction = std::min(fraction, 1.0);
  }
  return bin;
}

void Atlas::validate() const {
  for (const auto& [label, name] : region_map) {
    if (region_index(name) < 0) {
      throw ConfigError("atlas region map: '" + name + "' is not a known region name");
    }
    (void)label;
  }
  for (int label : labels.label_set()) {
    if (label == 0) continue;
    if (!region_map.count(label)) {
      throw ConfigError("atlas label " + std::to_string(label) + " has no region name");
    }
  }
}

RegionAssignment region_overlap(const Volume3D& mask, const Atlas& atlas,
                                std::size_t min_overlap_voxels) {
  const Volume3D& labels = atlas.labels.volume();
  if (!mask.same_grid(labels)) throw GeometryError("region_overlap: mask and atlas grids differ");

  std::array<std::size_t, kRegionNames.size()> counts{};
  std::map<int, int> label_region;
  for (const auto& [label, name] : atlas.region_map) label_region[label] = region_index(name);

  bool any = false;
  const auto& m = mask.data();
  const auto& a = labels.data();
  for (std::size_t v = 0; v < m.size(); ++v) {
    if (m[v] == 0.0) continue;
    any = true;
    const int label = static_cast<int>(a[v]);
    if (label == 0) continue;
    auto it = label_region.find(label);
    if (it == label_region.end() || it->second < 0) {
      throw ConfigError("atlas label " + std::to_string(label) + " has no region name");
    }
    ++counts[static_cast<std::size_t>(it->second)];
  }

  RegionAssignment out;
  if (!any) return out;
  out.not_applicable = false;
  std::vector<std::size_t> order;
  for (std::size_t r = 0; r < counts.size(); ++r) {
    if (counts[r] > 0 && counts[r] >= min_overlap_voxels) order.push_back(r);
  }
  std::sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) {
    if (counts[x] != counts[y]) return counts[x] > counts[y];
    return kRegionNames[x] < kRegionNames[y];
  });
  for (std::size_t r : order) {
    out.regions.emplace_back(kRegionNames[r]);
    out.overlap_counts.push_back(counts[r]);
  }
  return out;
}

namespace {

std::string trim(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
  while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
  return std::string(s.substr(b, e - b));
}

}  // namespace

std::map<int, std::string> parse_label_map(std::string_view text) {
  std::map<int, std::string> out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::string t = trim(line);
    if (t.empty()) continue;
    std::size_t pos = 0;
    if (t[0] == '-' || t[0] == '+') ++pos;
    while (pos < t.size() && std::isdigit(static_cast<unsigned char>(t[pos]))) ++pos;
    if (pos == 0 || (pos == 1 && !std::isdigit(static_cast<unsigned char>(t[0])))) {
      throw ConfigError("label map line " + std::to_string(line_no) + ": expected an integer key");
    }
    const int key = std::stoi(t.substr(0, pos));
    std::string rest = trim(std::string_view(t).substr(pos));
    if (!rest.empty() && (rest[0] == '=' || rest[0] == ':')) rest = trim(std::string_view(rest).substr(1));
    if (rest.empty()) {
      throw ConfigError("label map line " + std::to_string(line_no) + ": missing name");
    }
    if (!out.emplace(key, rest).second) {
      throw ConfigError("label map line " + std::to_string(line_no) + ": duplicate key " +
                        std::to_string(key));
    }
  }
  return out;
}

Atlas make_block_atlas(const VolumeHeader& grid) {
  VolumeHeader h = grid;
  h.datatype_code = dt::uint8;
  Volume3D vol(h);
  const auto& d = h.dims;
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) {
        const std::int64_t bx = std::min<std::int64_t>(2, i * 3 / d[0]);
        const std::int64_t by = std::min<std::int64_t>(2, j * 3 / d[1]);
        vol.at(i, j, k) = static_cast<double>(1 + bx + 3 * by);
      }
    }
  }
  Atlas atlas;
  atlas.labels = LabelMask(std::move(vol));
  for (std::size_t r = 0; r < kRegionNames.size(); ++r) {
    atlas.region_map[static_cast<int>(r + 1)] = std::string(kRegionNames[r]);
  }
  atlas.provenance = "synthetic 9-block atlas";
  return atlas;
}

}  // namespace mpvqa
