// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/error.hpp"
#include "mpvqa/morphology.hpp"

#include "oracles.hpp"

#include <catch2/catch_amalgamated.hpp>

#include <numeric>

using namespace mpvqa;

namespace {

Volume3D grid(Dims d) { return oracle::empty_mask(d); }

}  // namespace

TEST_CASE("single voxel is one component with core fraction 1") {
  Volume3D m = grid({8, 8, 8});
  m.at(2, 2, 2) = 1;
  const auto cc = connected_components(m);
  CHECK(cc.n_components() == 1);
  CHECK(cc.core_fraction() == 1.0);
  CHECK(spread_classify(cc).category == SpreadCategory::single_lesion);
}

TEST_CASE("diagonal neighbours are connected") {
  Volume3D m = grid({4, 4, 4});
  m.at(0, 0, 0) = 1;
  m.at(1, 1, 1) = 1;
  CHECK(connected_components(m).n_components() == 1);
}

TEST_CASE("voxels two apart are separate and split the volume evenly") {
  Volume3D m = grid({4, 4, 4});
  m.at(0, 0, 0) = 1;
  m.at(2, 2, 2) = 1;
  const auto cc = connected_components(m);
  CHECK(cc.n_components() == 2);
  CHECK(cc.core_fraction() == 0.5);
  CHECK(oracle::same_partition(oracle::bfs_components(m), cc.component_id));
  // Equal sizes: the earlier voxel owns the core.
  CHECK(cc.first_voxel[0] == 0);
}

TEST_CASE("empty mask has no components and N/A spread") {
  const auto cc = connected_components(grid({3, 3, 3}));
  CHECK(cc.n_components() == 0);
  CHECK(cc.core_fraction() == 0.0);
  CHECK(spread_classify(cc).category == SpreadCategory::not_applicable);
}

TEST_CASE("spread follows component count and core fraction") {
  CHECK(classify_spread(1, 1.0) == SpreadCategory::single_lesion);
  CHECK(classify_spread(3, 80.0 / 100.0) == SpreadCategory::core_with_satellites);
  CHECK(classify_spread(2, 60.0 / 100.0) == SpreadCategory::scattered);
  CHECK(classify_spread(2, 0.7) == SpreadCategory::core_with_satellites);
  CHECK(classify_spread(0, 0.0) == SpreadCategory::not_applicable);
}

TEST_CASE("spread from constructed component volumes") {
  // Rods of 80, 15 and 5 voxels on separate rows.
  Volume3D m = grid({100, 7, 1});
  for (int i = 0; i < 80; ++i) m.at(i, 0, 0) = 1;
  for (int i = 0; i < 15; ++i) m.at(i, 3, 0) = 1;
  for (int i = 0; i < 5; ++i) m.at(i, 6, 0) = 1;
  auto cc = connected_components(m);
  CHECK(cc.component_voxels == std::vector<std::size_t>{80, 15, 5});
  CHECK(cc.core_fraction() == Catch::Approx(0.8));
  CHECK(spread_classify(cc).category == SpreadCategory::core_with_satellites);

  Volume3D n = grid({100, 4, 1});
  for (int i = 0; i < 60; ++i) n.at(i, 0, 0) = 1;
  for (int i = 0; i < 40; ++i) n.at(i, 3, 0) = 1;
  cc = connected_components(n);
  CHECK(cc.core_fraction() == Catch::Approx(0.6));
  CHECK(spread_classify(cc).category == SpreadCategory::scattered);
}

TEST_CASE("spread names parse back") {
  for (auto c : {SpreadCategory::single_lesion, SpreadCategory::core_with_satellites, SpreadCategory::scattered,
                 SpreadCategory::not_applicable})
    CHECK(parse_spread(to_string(c)) == c);
  CHECK(to_string(SpreadCategory::core_with_satellites) == "core with satellite lesions");
  CHECK_THROWS_AS(parse_spread("many"), ConfigError);
}

TEST_CASE("property: union-find equals flood fill on random masks") {
  std::mt19937_64 g(2024);
  std::uniform_real_distribution<double> dens(0.02, 0.35);
  for (int trial = 0; trial < 60; ++trial) {
    const Volume3D m = oracle::random_mask(g, {12, 10, 9}, dens(g));
    const auto cc = connected_components(m);
    const auto ref = oracle::bfs_components(m);
    REQUIRE(oracle::same_partition(ref, cc.component_id));
    // Counts: sum to the foreground, sorted descending, core first.
    CHECK(std::accumulate(cc.component_voxels.begin(), cc.component_voxels.end(), std::size_t{0}) ==
          m.count_nonzero());
    CHECK(std::is_sorted(cc.component_voxels.rbegin(), cc.component_voxels.rend()));
    if (cc.n_components() > 0) {
      CHECK(cc.core_fraction() > 0.0);
      CHECK(cc.core_fraction() <= 1.0);
      CHECK(cc.voxels_of(0).size() == cc.component_voxels[0]);
    }
  }
}

TEST_CASE("property: anisotropic spacing scales component volumes") {
  std::mt19937_64 g(7);
  Volume3D m(VolumeHeader::make({6, 6, 6}, {0.5, 1.0, 2.0}, dt::uint8));
  std::bernoulli_distribution on(0.3);
  for (auto& x : m.data()) x = on(g);
  const auto cc = connected_components(m);
  for (std::size_t c = 0; c < cc.n_components(); ++c)
    CHECK(cc.component_volumes[c] == Catch::Approx(static_cast<double>(cc.component_voxels[c])));
  CHECK(cc.total_volume() == Catch::Approx(static_cast<double>(m.count_nonzero())));
}
