// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/fixture.hpp"

#include "mpvqa/file_util.hpp"
#include "mpvqa/nifti.hpp"
#include "mpvqa/random.hpp"
#include "mpvqa/regions.hpp"

#include <cstdio>

namespace mpvqa {

namespace fs = std::filesystem;

Volume3D ellipsoid_mask(const Dims& dims, const std::array<double, 3>& center,
                        const std::array<double, 3>& semi_axes, const Spacing& spacing) {
  Volume3D v(VolumeHeader::make(dims, spacing, dt::uint8));
  for (std::int64_t k = 0; k < dims[2]; ++k) {
    for (std::int64_t j = 0; j < dims[1]; ++j) {
      for (std::int64_t i = 0; i < dims[0]; ++i) {
        const double x = (i - center[0]) / semi_axes[0];
        const double y = (j - center[1]) / semi_axes[1];
        const double z = (k - center[2]) / semi_axes[2];
        if (x * x + y * y + z * z <= 1.0) v.at(i, j, k) = 1.0;
      }
    }
  }
  return v;
}

Volume3D sphere_mask(const Dims& dims, const std::array<double, 3>& center, double radius,
                     const Spacing& spacing) {
  return ellipsoid_mask(dims, center, {radius, radius, radius}, spacing);
}

std::map<int, std::string> glioma_labels() {
  return {{1, "Non-Enhancing Tumor Core"},
          {2, "Surrounding Non-enhancing FLAIR Hyperintensity"},
          {3, "Enhancing Tissue"},
          {4, "Resection Cavity"}};
}

namespace {

constexpr Dims kDims{60, 60, 40};

VolumeHeader ras_header(int datatype) {
  VolumeHeader h = VolumeHeader::make(kDims, {1, 1, 1}, datatype);
  h.affine(0, 3) = -30.0;
  h.affine(1, 3) = -30.0;
  h.affine(2, 3) = -20.0;
  return h;
}

void paint(Volume3D& seg, const Volume3D& mask, int label) {
  for (std::size_t v = 0; v < mask.size(); ++v) {
    if (mask.data()[v] != 0.0) seg.data()[v] = label;
  }
}

void paint_box(Volume3D& seg, std::array<int, 3> lo, std::array<int, 3> hi, int label) {
  for (int k = lo[2]; k < hi[2]; ++k) {
    for (int j = lo[1]; j < hi[1]; ++j) {
      for (int i = lo[0]; i < hi[0]; ++i) seg.at(i, j, k) = label;
    }
  }
}

Volume3D brain_t1() {
  Volume3D t1(ras_header(dt::int16));
  const Volume3D brain = ellipsoid_mask(kDims, {29.5, 29.5, 19.5}, {27, 27, 18});
  for (std::int64_t k = 0; k < kDims[2]; ++k) {
    for (std::int64_t j = 0; j < kDims[1]; ++j) {
      for (std::int64_t i = 0; i < kDims[0]; ++i) {
        if (brain.at(i, j, k) != 0.0) t1.at(i, j, k) = static_cast<double>(200 + (i + 2 * j + 3 * k) % 50);
      }
    }
  }
  return t1;
}

// Same voxels and world coordinates, stored with the x and y axes reversed.
Volume3D to_lps(const Volume3D& ras) {
  VolumeHeader h = ras.header();
  const auto& d = h.dims;
  h.affine(0, 0) = -1.0;
  h.affine(1, 1) = -1.0;
  h.affine(0, 3) = ras.header().affine(0, 3) + static_cast<double>(d[0] - 1);
  h.affine(1, 3) = ras.header().affine(1, 3) + static_cast<double>(d[1] - 1);
  Volume3D out(h);
  for (std::int64_t k = 0; k < d[2]; ++k) {
    for (std::int64_t j = 0; j < d[1]; ++j) {
      for (std::int64_t i = 0; i < d[0]; ++i) out.at(d[0] - 1 - i, d[1] - 1 - j, k) = ras.at(i, j, k);
    }
  }
  return out;
}

void write_study(const fs::path& root, const std::string& id, const Volume3D& seg, const Volume3D& t1) {
  const fs::path dir = root / id;
  fs::create_directories(dir);
  write_nifti_file(seg, dir / (id + "-seg.nii.gz"));
  write_nifti_file(t1, dir / (id + "-t1n.nii.gz"));
}

}  // namespace

FixtureLayout make_fixture(const fs::path& dir) {
  FixtureLayout layout{dir / "studies", dir / "atlas.nii.gz", dir / "region_map.txt", dir / "labels.txt"};
  fs::create_directories(layout.studies);
  const Volume3D t1 = brain_t1();

  // fix-001: enhancing sphere in the frontal block, an elongated FLAIR
  // ellipsoid across the midline blocks, a necrotic core with two satellites,
  // no resection cavity.
  {
    Volume3D seg(ras_header(dt::uint8));
    paint(seg, sphere_mask(kDims, {10, 10, 20}, 6), 3);
    paint(seg, ellipsoid_mask(kDims, {30, 30, 20}, {15, 4, 4}), 2);
    paint(seg, sphere_mask(kDims, {45, 12, 20}, 5), 1);
    paint_box(seg, {52, 22, 18}, {54, 24, 20}, 1);
    paint_box(seg, {38, 4, 10}, {40, 6, 12}, 1);
    write_study(layout.studies, "fix-001", seg, t1);
  }
  // fix-002: a tiny focus, two equal scattered blobs, a large cavity; no
  // enhancing tissue.
  {
    Volume3D seg(ras_header(dt::uint8));
    paint_box(seg, {8, 45, 20}, {10, 50, 21}, 1);
    paint(seg, sphere_mask(kDims, {42, 42, 12}, 3), 2);
    paint(seg, sphere_mask(kDims, {50, 50, 28}, 3), 2);
    paint(seg, sphere_mask(kDims, {22, 30, 20}, 12), 4);
    write_study(layout.studies, "fix-002", seg, t1);
  }
  // fix-003, stored LPS: an oval enhancing lesion and an L-shaped cavity.
  {
    Volume3D seg(ras_header(dt::uint8));
    paint(seg, ellipsoid_mask(kDims, {40, 40, 20}, {9, 6, 6}), 3);
    paint_box(seg, {10, 10, 14}, {30, 16, 26}, 4);
    paint_box(seg, {10, 16, 14}, {16, 36, 26}, 4);
    write_study(layout.studies, "fix-003", to_lps(seg), to_lps(t1));
  }

  const Atlas atlas = make_block_atlas(ras_header(dt::uint8));
  write_nifti_file(atlas.labels.volume(), layout.atlas);
  std::string region_map = "# atlas label = region name\n";
  for (const auto& [label, name] : atlas.region_map) region_map += std::to_string(label) + " = " + name + "\n";
  write_file_atomic(layout.region_map, region_map);
  std::string labels = "# segmentation label = clinical name\n";
  for (const auto& [label, name] : glioma_labels()) labels += std::to_string(label) + " = " + name + "\n";
  write_file_atomic(layout.labels, labels);
  return layout;
}

std::vector<TaskDescriptors> synthetic_descriptors(std::size_t n_studies,
                                                   const std::vector<std::string>& labels,
                                                   std::uint64_t seed) {
  std::vector<TaskDescriptors> out;
  out.reserve(n_studies * labels.size());
  for (std::size_t s = 0; s < n_studies; ++s) {
    char id[32];
    std::snprintf(id, sizeof id, "S%05zu", s + 1);
    for (const auto& label : labels) {
      CounterRng rng(seed, {"stub", id, label});
      if (rng.uniform() < 0.125) {
        out.push_back(absent_descriptor(id, label));
        continue;
      }
      TaskDescriptors d;
      d.study_id = id;
      d.label_name = label;
      static constexpr double kFractions[] = {0.004, 0.02, 0.07, 0.15};
      d.volume = volume_bin(kFractions[rng.uniform_int(4)]);
      d.regions.not_applicable = false;
      std::vector<std::size_t> names{0, 1, 2, 3, 4, 5, 6, 7, 8};
      shuffle(names, rng);
      const std::size_t n_regions = 1 + static_cast<std::size_t>(rng.uniform_int(3));
      for (std::size_t r = 0; r < n_regions; ++r) {
        d.regions.regions.emplace_back(kRegionNames[names[r]]);
        d.regions.overlap_counts.push_back(100 - 10 * r);
      }
      d.shape = static_cast<ShapeCategory>(rng.uniform_int(5));
      d.spread.category = static_cast<SpreadCategory>(rng.uniform_int(3));
      d.spread.n_components = d.spread.category == SpreadCategory::single_lesion ? 1 : 3;
      out.push_back(std::move(d));
    }
  }
  return out;
}

}  // namespace mpvqa
