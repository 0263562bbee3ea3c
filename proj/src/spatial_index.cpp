#include "ksdf/spatial_index.hpp"

#include "ksdf/error.hpp"

#include <algorithm>
#include <numeric>

namespace ksdf {

SpatialIndex::SpatialIndex(Mesh mesh, int max_leaf_size) : mesh_(std::move(mesh)), max_leaf_(std::max(1, max_leaf_size)) {
  if (mesh_.empty()) throw Error(ErrorCode::EmptyMesh, "cannot index a mesh without triangles");
  mesh_.check_indices();
  const int n = static_cast<int>(mesh_.triangles.size());
  std::vector<Vec3> centroids(n);
  std::vector<Aabb> boxes(n);
  area_cdf_.resize(n);
  double acc = 0.0;
  for (int t = 0; t < n; ++t) {
    const auto& tri = mesh_.triangles[t];
    const Vec3& a = mesh_.vertices[tri[0]];
    const Vec3& b = mesh_.vertices[tri[1]];
    const Vec3& c = mesh_.vertices[tri[2]];
    centroids[t] = (a + b + c) / 3.0;
    boxes[t] = triangle_box(t);
    acc += triangle_area(a, b, c);
    area_cdf_[t] = acc;
  }
  order_.resize(n);
  std::iota(order_.begin(), order_.end(), 0);
  nodes_.reserve(2 * (n / max_leaf_ + 1));
  build(0, n, centroids, boxes);
}

Aabb SpatialIndex::triangle_box(int tri) const {
  Aabb box;
  for (int k : mesh_.triangles[tri]) box.expand(mesh_.vertices[k]);
  return box;
}

int SpatialIndex::build(int first, int count, std::vector<Vec3>& centroids, std::vector<Aabb>& boxes) {
  const int id = static_cast<int>(nodes_.size());
  nodes_.emplace_back();
  Aabb box;
  Aabb centroid_box;
  for (int i = first; i < first + count; ++i) {
    box.expand(boxes[order_[i]]);
    centroid_box.expand(centroids[order_[i]]);
  }
  nodes_[id].box = box;
  const Vec3 spread = centroid_box.extent();
  int axis = 0;
  spread.maxCoeff(&axis);
  if (count <= max_leaf_ || !(spread[axis] > 0.0)) {
    // Coincident centroids cannot be split further; keep them in one leaf.
    nodes_[id].first = first;
    nodes_[id].count = count;
    return id;
  }
  const int mid = first + count / 2;
  std::nth_element(order_.begin() + first, order_.begin() + mid, order_.begin() + first + count, [&](int a, int b) {
    if (centroids[a][axis] != centroids[b][axis]) return centroids[a][axis] < centroids[b][axis];
    return a < b;
  });
  const int left = build(first, mid - first, centroids, boxes);
  const int right = build(mid, first + count - mid, centroids, boxes);
  nodes_[id].left = left;
  nodes_[id].right = right;
  return id;
}

ClosestHit SpatialIndex::closest(const Vec3& p) const {
  ClosestHit best;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (node.box.squared_distance(p) > best.squared_distance) continue;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const int t = order_[i];
        const auto& tri = mesh_.triangles[t];
        const Vec3 q = closest_point_on_triangle(p, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]]);
        const double d2 = (q - p).squaredNorm();
        if (d2 < best.squared_distance || (d2 == best.squared_distance && t < best.triangle)) {
          best.squared_distance = d2;
          best.point = q;
          best.triangle = t;
        }
      }
      continue;
    }
    const double dl = nodes_[node.left].box.squared_distance(p);
    const double dr = nodes_[node.right].box.squared_distance(p);
    // push the farther child first so the nearer one is visited next
    if (dl <= dr) {
      stack[top++] = node.right;
      stack[top++] = node.left;
    } else {
      stack[top++] = node.left;
      stack[top++] = node.right;
    }
  }
  return best;
}

int SpatialIndex::count_crossings(const Vec3& origin, const Vec3& dir) const {
  const Vec3 inv_dir = dir.cwiseInverse();
  int hits = 0;
  int stack[128];
  int top = 0;
  stack[top++] = 0;
  while (top > 0) {
    const Node& node = nodes_[stack[--top]];
    if (!ray_hits_box(origin, inv_dir, node.box)) continue;
    if (node.is_leaf()) {
      for (int i = node.first; i < node.first + node.count; ++i) {
        const auto& tri = mesh_.triangles[order_[i]];
        double t = 0.0;
        if (ray_triangle(origin, dir, mesh_.vertices[tri[0]], mesh_.vertices[tri[1]], mesh_.vertices[tri[2]], t)) ++hits;
      }
      continue;
    }
    stack[top++] = node.left;
    stack[top++] = node.right;
  }
  return hits;
}

ClosestHit brute_force_closest(const Mesh& mesh, const Vec3& p) {
  ClosestHit best;
  for (int t = 0; t < static_cast<int>(mesh.triangles.size()); ++t) {
    const auto& tri = mesh.triangles[t];
    const Vec3 q = closest_point_on_triangle(p, mesh.vertices[tri[0]], mesh.vertices[tri[1]], mesh.vertices[tri[2]]);
    const double d2 = (q - p).squaredNorm();
    if (d2 < best.squared_distance) {
      best.squared_distance = d2;
      best.point = q;
      best.triangle = t;
    }
  }
  return best;
}

std::shared_ptr<const SpatialIndex> build_index(const Mesh& mesh, int max_leaf_size) {
  return std::make_shared<const SpatialIndex>(mesh, max_leaf_size);
}

}  // namespace ksdf
