// SPDX-License-Identifier: Apache-2.0
#include "mpvqa/hull.hpp"

#include "mpvqa/error.hpp"

#include <Eigen/Geometry>

#include <algorithm>
#include <cmath>
#include <map>

namespace mpvqa {

namespace {

struct Face {
  std::array<int, 3> v;
  Eigen::Vector3d normal;  // unit, outward
  double offset = 0;       // normal . x = offset on the plane
  std::vector<int> outside;
  bool alive = true;
};

class QuickHull {
 public:
  QuickHull(const std::vector<Eigen::Vector3d>& pts) : pts_(pts) {}

  void run() {
    initial_simplex();
    // New faces are appended and only they receive orphaned points, so one
    // forward pass visits every face that can still have outside points.
    for (std::size_t f = 0; f < faces_.size(); ++f) {
      if (!faces_[f].alive || faces_[f].outside.empty()) continue;
      add_point(static_cast<int>(f));
    }
  }

  ConvexHull result() const {
    ConvexHull hull;
    hull.points = pts_;
    std::vector<char> on_hull(pts_.size(), 0);
    for (const auto& f : faces_)
      if (f.alive)
        for (int v : f.v) on_hull[v] = 1;
    Eigen::Vector3d c = Eigen::Vector3d::Zero();
    int count = 0;
    for (std::size_t i = 0; i < pts_.size(); ++i)
      if (on_hull[i]) {
        c += pts_[i];
        ++count;
      }
    c /= count;
    for (const auto& f : faces_) {
      if (!f.alive) continue;
      hull.faces.push_back(f.v);
      const Eigen::Vector3d a = pts_[f.v[0]] - c, b = pts_[f.v[1]] - c, d = pts_[f.v[2]] - c;
      hull.volume += a.dot(b.cross(d)) / 6.0;
    }
    return hull;
  }

 private:
  double distance(const Face& f, int p) const { return f.normal.dot(pts_[p]) - f.offset; }

  int make_face(int a, int b, int c) {
    Face f;
    f.v = {a, b, c};
    Eigen::Vector3d n = (pts_[b] - pts_[a]).cross(pts_[c] - pts_[a]);
    n.normalize();
    if (n.dot(pts_[a] - interior_) < 0) {
      std::swap(f.v[1], f.v[2]);
      n = -n;
    }
    f.normal = n;
    f.offset = n.dot(pts_[f.v[0]]);
    faces_.push_back(std::move(f));
    const int id = static_cast<int>(faces_.size() - 1);
    for (int e = 0; e < 3; ++e) edge_face_[{faces_[id].v[e], faces_[id].v[(e + 1) % 3]}] = id;
    return id;
  }

  void initial_simplex() {
    const int n = static_cast<int>(pts_.size());
    if (n < 4) throw DegenerateHullError("convex hull needs at least 4 points");
    Eigen::Vector3d lo = pts_[0], hi = pts_[0];
    for (const auto& p : pts_) {
      lo = lo.cwiseMin(p);
      hi = hi.cwiseMax(p);
    }
    const double scale = std::max((hi - lo).maxCoeff(), hi.cwiseAbs().maxCoeff());
    eps_ = 1e-10 * std::max(scale, 1e-300);

    // Two extreme points along the widest axis.
    int axis;
    (hi - lo).maxCoeff(&axis);
    int i0 = 0, i1 = 0;
    for (int i = 0; i < n; ++i) {
      if (pts_[i][axis] < pts_[i0][axis]) i0 = i;
      if (pts_[i][axis] > pts_[i1][axis]) i1 = i;
    }
    if ((pts_[i1] - pts_[i0]).norm() <= eps_) throw DegenerateHullError("all points coincide");
    const Eigen::Vector3d dir = (pts_[i1] - pts_[i0]).normalized();
    int i2 = -1;
    double best = eps_;
    for (int i = 0; i < n; ++i) {
      const double d = (pts_[i] - pts_[i0]).cross(dir).norm();
      if (d > best) {
        best = d;
        i2 = i;
      }
    }
    if (i2 < 0) throw DegenerateHullError("all points are collinear");
    const Eigen::Vector3d pn = (pts_[i1] - pts_[i0]).cross(pts_[i2] - pts_[i0]).normalized();
    int i3 = -1;
    best = eps_;
    for (int i = 0; i < n; ++i) {
      const double d = std::abs(pn.dot(pts_[i] - pts_[i0]));
      if (d > best) {
        best = d;
        i3 = i;
      }
    }
    if (i3 < 0) throw DegenerateHullError("all points are coplanar");

    interior_ = (pts_[i0] + pts_[i1] + pts_[i2] + pts_[i3]) / 4.0;
    const int f0 = make_face(i0, i1, i2);
    const int f1 = make_face(i0, i1, i3);
    const int f2 = make_face(i0, i2, i3);
    const int f3 = make_face(i1, i2, i3);
    assign_outside({f0, f1, f2, f3}, all_indices(n, {i0, i1, i2, i3}));
  }

  static std::vector<int> all_indices(int n, std::initializer_list<int> skip) {
    std::vector<int> out;
    out.reserve(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i)
      if (std::find(skip.begin(), skip.end(), i) == skip.end()) out.push_back(i);
    return out;
  }

  void assign_outside(const std::vector<int>& faces, const std::vector<int>& candidates) {
    for (int p : candidates) {
      for (int f : faces) {
        if (distance(faces_[f], p) > eps_) {
          faces_[f].outside.push_back(p);
          break;
        }
      }
    }
  }

  void add_point(int seed_face) {
    const Face& seed = faces_[seed_face];
    int apex = seed.outside.front();
    double far = distance(seed, apex);
    for (int p : seed.outside) {
      const double d = distance(seed, p);
      if (d > far) {
        far = d;
        apex = p;
      }
    }

    // Visible region by flood fill across shared edges.
    std::vector<int> visible{seed_face};
    std::vector<char> is_visible(faces_.size(), 0);
    is_visible[seed_face] = 1;
    std::vector<std::pair<int, int>> horizon;
    for (std::size_t q = 0; q < visible.size(); ++q) {
      const Face& f = faces_[visible[q]];
      for (int e = 0; e < 3; ++e) {
        const int a = f.v[e], b = f.v[(e + 1) % 3];
        const int nb = edge_face_.at({b, a});
        if (is_visible[nb]) continue;
        if (distance(faces_[nb], apex) > eps_) {
          is_visible[nb] = 1;
          visible.push_back(nb);
        }
      }
    }
    for (int fid : visible) {
      const Face& f = faces_[fid];
      for (int e = 0; e < 3; ++e) {
        const int a = f.v[e], b = f.v[(e + 1) % 3];
        if (!is_visible[edge_face_.at({b, a})]) horizon.emplace_back(a, b);
      }
    }

    std::vector<int> orphans;
    for (int fid : visible) {
      Face& f = faces_[fid];
      f.alive = false;
      for (int p : f.outside)
        if (p != apex) orphans.push_back(p);
      f.outside.clear();
      for (int e = 0; e < 3; ++e) edge_face_.erase({f.v[e], f.v[(e + 1) % 3]});
    }
    std::vector<int> created;
    for (const auto& [a, b] : horizon) {
      // Keep the horizon edge's direction so the new face winds outward.
      Face f;
      f.v = {a, b, apex};
      Eigen::Vector3d nrm = (pts_[b] - pts_[a]).cross(pts_[apex] - pts_[a]);
      nrm.normalize();
      f.normal = nrm;
      f.offset = nrm.dot(pts_[a]);
      faces_.push_back(std::move(f));
      const int id = static_cast<int>(faces_.size() - 1);
      for (int e = 0; e < 3; ++e) edge_face_[{faces_[id].v[e], faces_[id].v[(e + 1) % 3]}] = id;
      created.push_back(id);
    }
    assign_outside(created, orphans);
  }

  const std::vector<Eigen::Vector3d>& pts_;
  std::vector<Face> faces_;
  std::map<std::pair<int, int>, int> edge_face_;
  Eigen::Vector3d interior_ = Eigen::Vector3d::Zero();
  double eps_ = 0;
};

}  // namespace

ConvexHull convex_hull(const std::vector<Eigen::Vector3d>& points) {
  QuickHull qh(points);
  qh.run();
  return qh.result();
}

double convex_hull_volume(const std::vector<Eigen::Vector3d>& points) {
  return convex_hull(points).volume;
}

}  // namespace mpvqa
