// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/morphology.hpp"

#include "mpvqa/error.hpp"

#include <algorithm>
#include <numeric>

namespace mpvqa {

namespace {

class DisjointSets {
 public:
  std::uint32_t make() {
    parent_.push_back(static_cast<std::uint32_t>(parent_.size()));
    return parent_.back();
  }
  std::uint32_t find(std::uint32_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (a < b) std::swap(a, b);
    parent_[a] = b;
  }
  std::size_t size() const { return parent_.size(); }

 private:
  std::vector<std::uint32_t> parent_;
};

}  // namespace

std::size_t ComponentLabeling::total_voxels() const {
  return std::accumulate(component_voxels.begin(), component_voxels.end(), std::size_t{0});
}

double ComponentLabeling::total_volume() const {
  return static_cast<double>(total_voxels()) * spacing[0] * spacing[1] * spacing[2];
}

double ComponentLabeling::core_fraction() const {
  const std::size_t total = total_voxels();
  if (total == 0) return 0.0;
  // Voxel counts, so the ratio is exact for equal spacing.
  return static_cast<double>(component_voxels[core_index]) / static_cast<double>(total);
}

std::vector<std::size_t> ComponentLabeling::voxels_of(std::size_t component) const {
  std::vector<std::size_t> out;
  out.reserve(component_voxels.at(component));
  const auto id = static_cast<std::int32_t>(component + 1);
  for (std::size_t i = first_voxel[component]; i < component_id.size(); ++i)
    if (component_id[i] == id) out.push_back(i);
  return out;
}

ComponentLabeling connected_components(const Volume3D& mask) {
  const auto& d = mask.dims();
  const std::int64_t nx = d[0], ny = d[1], nz = d[2];
  const auto& data = mask.data();

  std::vector<std::uint32_t> provisional(data.size(), 0);  // 0 = background
  DisjointSets sets;
  sets.make();  // slot 0 reserved for background

  // The 13 neighbours that precede (i, j, k) in raster order.
  struct Offset {
    int dx, dy, dz;
  };
  std::vector<Offset> back;
  for (int dz = -1; dz <= 0; ++dz)
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx) {
        if (dz == 0 && (dy > 0 || (dy == 0 && dx >= 0))) continue;
        back.push_back({dx, dy, dz});
      }

  for (std::int64_t k = 0; k < nz; ++k)
    for (std::int64_t j = 0; j < ny; ++j)
      for (std::int64_t i = 0; i < nx; ++i) {
        const std::size_t idx = mask.index(i, j, k);
        if (data[idx] == 0) continue;
        std::uint32_t label = 0;
        for (const auto& o : back) {
          const std::int64_t x = i + o.dx, y = j + o.dy, z = k + o.dz;
          if (x < 0 || y < 0 || z < 0 || x >= nx || y >= ny) continue;
          const std::uint32_t n = provisional[mask.index(x, y, z)];
          if (n == 0) continue;
          if (label == 0)
            label = n;
          else
            sets.unite(label, n);
        }
        provisional[idx] = label ? label : sets.make();
      }

  // Resolve roots, measure, and order components.
  std::vector<std::size_t> root_count(sets.size(), 0);
  std::vector<std::size_t> root_first(sets.size(), data.size());
  for (std::size_t idx = 0; idx < data.size(); ++idx) {
    if (!provisional[idx]) continue;
    const std::uint32_t r = sets.find(provisional[idx]);
    provisional[idx] = r;
    if (root_count[r]++ == 0) root_first[r] = idx;
  }
  std::vector<std::uint32_t> roots;
  for (std::uint32_t r = 1; r < sets.size(); ++r)
    if (root_count[r]) roots.push_back(r);
  std::sort(roots.begin(), roots.end(), [&](std::uint32_t a, std::uint32_t b) {
    if (root_count[a] != root_count[b]) return root_count[a] > root_count[b];
    return root_first[a] < root_first[b];
  });
  std::vector<std::int32_t> final_id(sets.size(), 0);
  for (std::size_t c = 0; c < roots.size(); ++c) final_id[roots[c]] = static_cast<std::int32_t>(c + 1);

  ComponentLabeling out;
  out.dims = d;
  out.spacing = mask.spacing();
  out.component_id.resize(data.size());
  for (std::size_t idx = 0; idx < data.size(); ++idx) out.component_id[idx] = final_id[provisional[idx]];
  const double dv = voxel_volume(mask.header());
  for (auto r : roots) {
    out.component_voxels.push_back(root_count[r]);
    out.component_volumes.push_back(static_cast<double>(root_count[r]) * dv);
    out.first_voxel.push_back(root_first[r]);
  }
  return out;
}

std::string_view to_string(SpreadCategory category) {
  switch (category) {
    case SpreadCategory::single_lesion: return "single lesion";
    case SpreadCategory::core_with_satellites: return "core with satellite lesions";
    case SpreadCategory::scattered: return "scattered lesions";
    case SpreadCategory::not_applicable: return "N/A";
  }
  return "N/A";
}

SpreadCategory parse_spread(std::string_view text) {
  for (auto c : {SpreadCategory::single_lesion, SpreadCategory::core_with_satellites,
                 SpreadCategory::scattered, SpreadCategory::not_applicable})
    if (to_string(c) == text) return c;
  throw ConfigError("unknown spread category '" + std::string(text) + "'");
}

SpreadCategory classify_spread(std::size_t n_components, double core_fraction) {
  if (n_components == 0) return SpreadCategory::not_applicable;
  if (n_components == 1) return SpreadCategory::single_lesion;
  if (core_fraction >= kCoreFractionThreshold) return SpreadCategory::core_with_satellites;
  return SpreadCategory::scattered;
}

SpreadDescriptor spread_classify(const ComponentLabeling& labeling) {
  SpreadDescriptor out;
  out.n_components = labeling.n_components();
  out.core_fraction = labeling.core_fraction();
  out.category = classify_spread(out.n_components, out.core_fraction);
  return out;
}

}  // namespace mpvqa
