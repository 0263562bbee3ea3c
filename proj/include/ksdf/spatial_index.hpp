#pragma once

#include "ksdf/mesh.hpp"

#include <memory>
#include <span>
#include <vector>

namespace ksdf {

struct ClosestHit {
  Vec3 point = Vec3::Zero();
  int triangle = -1;
  double squared_distance = std::numeric_limits<double>::infinity();
  double distance() const { return std::sqrt(squared_distance); }
};

/// Bounding-volume hierarchy over the triangles of a mesh. Immutable after
/// construction; all queries are const and safe to run concurrently.
class SpatialIndex {
 public:
  struct Node {
    Aabb box;
    int left = -1;   // child node index, -1 for leaves
    int right = -1;
    int first = 0;   // leaf range into order()
    int count = 0;
    bool is_leaf() const { return left < 0; }
  };

  explicit SpatialIndex(Mesh mesh, int max_leaf_size = 8);

  const Mesh& mesh() const { return mesh_; }
  const std::vector<Node>& nodes() const { return nodes_; }
  /// Triangle ids referenced by leaf ranges.
  const std::vector<int>& order() const { return order_; }
  int max_leaf_size() const { return max_leaf_; }
  Aabb triangle_box(int tri) const;

  ClosestHit closest(const Vec3& p) const;
  double unsigned_distance(const Vec3& p) const { return closest(p).distance(); }

  /// Number of triangles crossed by the ray origin + t*dir, t > 0.
  int count_crossings(const Vec3& origin, const Vec3& dir) const;

  /// Area-weighted cumulative distribution over triangles (last entry = total area).
  const std::vector<double>& area_cdf() const { return area_cdf_; }

 private:
  int build(int first, int count, std::vector<Vec3>& centroids, std::vector<Aabb>& boxes);

  Mesh mesh_;
  int max_leaf_;
  std::vector<Node> nodes_;
  std::vector<int> order_;
  std::vector<double> area_cdf_;
};

/// Reference closest-point query over every triangle.
ClosestHit brute_force_closest(const Mesh& mesh, const Vec3& p);

std::shared_ptr<const SpatialIndex> build_index(const Mesh& mesh, int max_leaf_size = 8);

}  // namespace ksdf
