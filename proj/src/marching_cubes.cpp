// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/mesh.hpp"

#include "mpvqa/error.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <map>
#include <unordered_map>

namespace mpvqa {

namespace {

// Unit-cube corners in the usual marching-cubes numbering.
constexpr int kCorner[8][3] = {{0, 0, 0}, {1, 0, 0}, {1, 1, 0}, {0, 1, 0},
                               {0, 0, 1}, {1, 0, 1}, {1, 1, 1}, {0, 1, 1}};
constexpr int kEdge[12][2] = {{0, 1}, {1, 2}, {2, 3}, {3, 0}, {4, 5}, {5, 6},
                              {6, 7}, {7, 4}, {0, 4}, {1, 5}, {2, 6}, {3, 7}};
// Face corners counter-clockwise seen from outside the cube.
constexpr int kFace[6][4] = {{0, 3, 2, 1}, {4, 5, 6, 7}, {0, 1, 5, 4},
                             {3, 7, 6, 2}, {0, 4, 7, 3}, {1, 2, 6, 5}};

int edge_between(int a, int b) {
  for (int e = 0; e < 12; ++e)
    if ((kEdge[e][0] == a && kEdge[e][1] == b) || (kEdge[e][0] == b && kEdge[e][1] == a)) return e;
  return -1;
}

struct CaseTable {
  std::array<std::vector<std::vector<int>>, 256> loops;
  // True when a loop crosses some face twice; fan chords could then lie in
  // that face, so such loops are triangulated around their centroid.
  std::array<std::vector<bool>, 256> needs_center;
};

CaseTable build_table() {
  CaseTable table;
  for (int config = 0; config < 256; ++config) {
    auto inside = [config](int corner) { return (config >> corner) & 1; };
    int next[12];
    int face_of[12];
    std::fill(next, next + 12, -1);
    for (int f = 0; f < 6; ++f) {
      const int* q = kFace[f];
      for (int k = 0; k < 4; ++k) {
        const int prev = (k + 3) % 4;
        if (!inside(q[k]) || inside(q[prev])) continue;
        // Run of inside corners starts at k; walk to its last corner.
        int m = k;
        while (inside(q[(m + 1) % 4])) m = (m + 1) % 4;
        const int entry = edge_between(q[prev], q[k]);
        const int exit = edge_between(q[m], q[(m + 1) % 4]);
        next[exit] = entry;  // foreground on the left, seen from outside
        face_of[exit] = f;
      }
    }
    bool used[12] = {};
    for (int start = 0; start < 12; ++start) {
      if (next[start] < 0 || used[start]) continue;
      std::vector<int> loop;
      std::vector<int> faces;
      for (int e = start; !used[e]; e = next[e]) {
        used[e] = true;
        loop.push_back(e);
        faces.push_back(face_of[e]);
      }
      // Traversal winds toward the foreground; reverse for outward normals.
      std::reverse(loop.begin(), loop.end());
      std::sort(faces.begin(), faces.end());
      const bool repeated = std::adjacent_find(faces.begin(), faces.end()) != faces.end();
      table.loops[config].push_back(std::move(loop));
      table.needs_center[config].push_back(repeated);
    }
  }
  return table;
}

const CaseTable& table() {
  static const CaseTable t = build_table();
  return t;
}

SurfaceMesh single_voxel_mesh(const Eigen::Vector3d& center, const Spacing& s) {
  SurfaceMesh mesh;
  for (int a = 0; a < 3; ++a)
    for (int sign : {1, -1}) {
      Eigen::Vector3d v = center;
      v[a] += 0.5 * sign * s[a];
      mesh.vertices.push_back(v);
    }
  // Vertices: 0 +x, 1 -x, 2 +y, 3 -y, 4 +z, 5 -z.
  for (std::uint32_t x : {0u, 1u})
    for (std::uint32_t y : {2u, 3u})
      for (std::uint32_t z : {4u, 5u}) {
        const int parity = (x == 0) + (y == 2) + (z == 4);
        if (parity % 2 == 1)
          mesh.triangles.push_back({x, y, z});
        else
          mesh.triangles.push_back({x, z, y});
      }
  return mesh;
}

}  // namespace

const std::vector<std::vector<int>>& marching_cubes_case(int config) {
  return table().loops.at(static_cast<std::size_t>(config));
}

SurfaceMesh marching_cubes(const Dims& dims, const Spacing& spacing,
                           const std::vector<std::size_t>& voxels) {
  if (voxels.empty()) throw EmptyMeshError("marching cubes on an empty component");
  auto coords = [&](std::size_t idx) {
    const auto i = static_cast<std::int64_t>(idx % static_cast<std::size_t>(dims[0]));
    const auto rest = static_cast<std::int64_t>(idx / static_cast<std::size_t>(dims[0]));
    return std::array<std::int64_t, 3>{i, rest % dims[1], rest / dims[1]};
  };

  if (voxels.size() == 1) {
    const auto c = coords(voxels[0]);
    return single_voxel_mesh(Eigen::Vector3d(c[0] * spacing[0], c[1] * spacing[1], c[2] * spacing[2]),
                             spacing);
  }

  std::array<std::int64_t, 3> lo{dims[0], dims[1], dims[2]}, hi{-1, -1, -1};
  for (auto idx : voxels) {
    const auto c = coords(idx);
    for (int a = 0; a < 3; ++a) {
      lo[a] = std::min(lo[a], c[a]);
      hi[a] = std::max(hi[a], c[a]);
    }
  }
  // Cropped grid with a one-voxel background margin.
  std::array<std::int64_t, 3> n{};
  for (int a = 0; a < 3; ++a) n[a] = hi[a] - lo[a] + 3;
  std::vector<std::uint8_t> grid(static_cast<std::size_t>(n[0] * n[1] * n[2]), 0);
  auto gidx = [&](std::int64_t i, std::int64_t j, std::int64_t k) {
    return static_cast<std::size_t>(i + n[0] * (j + n[1] * k));
  };
  for (auto idx : voxels) {
    const auto c = coords(idx);
    grid[gidx(c[0] - lo[0] + 1, c[1] - lo[1] + 1, c[2] - lo[2] + 1)] = 1;
  }

  const CaseTable& t = table();
  const double iso = 0.5;
  SurfaceMesh mesh;
  std::unordered_map<std::uint64_t, std::uint32_t> vertex_of_edge;

  for (std::int64_t k = 0; k + 1 < n[2]; ++k)
    for (std::int64_t j = 0; j + 1 < n[1]; ++j)
      for (std::int64_t i = 0; i + 1 < n[0]; ++i) {
        int config = 0;
        double value[8];
        for (int c = 0; c < 8; ++c) {
          value[c] = grid[gidx(i + kCorner[c][0], j + kCorner[c][1], k + kCorner[c][2])];
          if (value[c] > iso) config |= 1 << c;
        }
        if (config == 0 || config == 255) continue;

        auto vertex = [&](int edge) -> std::uint32_t {
          const int* a = kCorner[kEdge[edge][0]];
          const int* b = kCorner[kEdge[edge][1]];
          // Key on the lower grid point and the edge axis.
          std::int64_t p[3] = {i + std::min(a[0], b[0]), j + std::min(a[1], b[1]),
                               k + std::min(a[2], b[2])};
          const int axis = a[0] != b[0] ? 0 : (a[1] != b[1] ? 1 : 2);
          const std::uint64_t key = 3 * static_cast<std::uint64_t>(gidx(p[0], p[1], p[2])) +
                                    static_cast<std::uint64_t>(axis);
          auto [it, inserted] = vertex_of_edge.try_emplace(key, static_cast<std::uint32_t>(mesh.vertices.size()));
          if (inserted) {
            const double va = value[kEdge[edge][0]], vb = value[kEdge[edge][1]];
            const double tpar = (iso - va) / (vb - va);
            Eigen::Vector3d pos;
            for (int d = 0; d < 3; ++d) {
              const double ga = static_cast<double>((d == 0 ? i : d == 1 ? j : k) + a[d]);
              const double gb = static_cast<double>((d == 0 ? i : d == 1 ? j : k) + b[d]);
              const double g = ga + tpar * (gb - ga);
              pos[d] = (g - 1.0 + static_cast<double>(lo[d])) * spacing[d];
            }
            mesh.vertices.push_back(pos);
          }
          return it->second;
        };

        const auto& loops = t.loops[config];
        for (std::size_t l = 0; l < loops.size(); ++l) {
          const auto& loop = loops[l];
          std::vector<std::uint32_t> ids;
          ids.reserve(loop.size());
          for (int e : loop) ids.push_back(vertex(e));
          if (!t.needs_center[config][l]) {
            for (std::size_t m = 1; m + 1 < ids.size(); ++m) mesh.triangles.push_back({ids[0], ids[m], ids[m + 1]});
          } else {
            Eigen::Vector3d centroid = Eigen::Vector3d::Zero();
            for (auto id : ids) centroid += mesh.vertices[id];
            centroid /= static_cast<double>(ids.size());
            const auto c = static_cast<std::uint32_t>(mesh.vertices.size());
            mesh.vertices.push_back(centroid);
            for (std::size_t m = 0; m < ids.size(); ++m)
              mesh.triangles.push_back({c, ids[m], ids[(m + 1) % ids.size()]});
          }
        }
      }
  return mesh;
}

SurfaceMesh marching_cubes(const Volume3D& mask) {
  std::vector<std::size_t> voxels;
  const auto& data = mask.data();
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data[i] != 0) voxels.push_back(i);
  return marching_cubes(mask.dims(), mask.spacing(), voxels);
}

double mesh_area(const SurfaceMesh& mesh) {
  double area = 0.0;
  for (const auto& t : mesh.triangles) {
    const Eigen::Vector3d& p = mesh.vertices[t[0]];
    const Eigen::Vector3d& q = mesh.vertices[t[1]];
    const Eigen::Vector3d& r = mesh.vertices[t[2]];
    area += 0.5 * (q - p).cross(r - p).norm();
  }
  return area;
}

double mesh_signed_volume(const SurfaceMesh& mesh) {
  double vol = 0.0;
  for (const auto& t : mesh.triangles)
    vol += mesh.vertices[t[0]].dot(mesh.vertices[t[1]].cross(mesh.vertices[t[2]]));
  return vol / 6.0;
}

bool mesh_is_closed(const SurfaceMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) {
      auto a = t[e], b = t[(e + 1) % 3];
      if (a > b) std::swap(a, b);
      ++count[{a, b}];
    }
  return std::all_of(count.begin(), count.end(), [](const auto& kv) { return kv.second == 2; });
}

bool mesh_is_oriented(const SurfaceMesh& mesh) {
  std::map<std::pair<std::uint32_t, std::uint32_t>, int> count;
  for (const auto& t : mesh.triangles)
    for (int e = 0; e < 3; ++e) ++count[{t[e], t[(e + 1) % 3]}];
  for (const auto& [edge, c] : count) {
    if (c != 1) return false;
    auto rev = count.find({edge.second, edge.first});
    if (rev == count.end() || rev->second != 1) return false;
  }
  return true;
}

void write_off(std::ostream& out, const SurfaceMesh& mesh) {
  out << "OFF\n" << mesh.vertices.size() << ' ' << mesh.triangles.size() << " 0\n";
  out << std::setprecision(17);
  for (const auto& v : mesh.vertices) out << v.x() << ' ' << v.y() << ' ' << v.z() << '\n';
  for (const auto& t : mesh.triangles) out << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
}

}  // namespace mpvqa
