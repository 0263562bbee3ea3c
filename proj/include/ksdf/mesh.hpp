#pragma once

#include "ksdf/geometry.hpp"

#include <filesystem>
#include <string_view>
#include <vector>

namespace ksdf {

enum class MeshFormat { obj, stl, ply };

/// Maps source coordinates into the canonical cube:
///   canonical = scale * (source + translation)
struct NormalizationTransform {
  double scale = 1.0;
  Vec3 translation = Vec3::Zero();

  Vec3 to_canonical(const Vec3& source) const { return scale * (source + translation); }
  Vec3 to_source(const Vec3& canonical) const { return canonical / scale - translation; }
};

struct Mesh {
  std::vector<Vec3> vertices;
  std::vector<Tri> triangles;
  NormalizationTransform source_transform;

  bool empty() const { return triangles.empty(); }
  Aabb bounds() const;
  double area() const;
  /// Throws InvalidArgument if a triangle references a missing vertex.
  void check_indices() const;
};

/// Half the longest extent after normalization.
inline constexpr double kCanonicalHalfExtent = 0.9;

MeshFormat format_from_path(const std::filesystem::path& path);

/// Loads a mesh and drops degenerate triangles (area <= 1e-12 after normalizing
/// to canonical scale). Throws ParseError or EmptyMesh.
Mesh load_mesh(const std::filesystem::path& path, MeshFormat format);
Mesh load_mesh(const std::filesystem::path& path);

/// Parses OBJ text directly (the same rules as load_mesh).
Mesh parse_obj(std::string_view text);

/// Writes `v`/`f` lines with 9 significant digits. Throws EmptyMesh or IoError.
void save_mesh(const Mesh& mesh, const std::filesystem::path& path, MeshFormat format = MeshFormat::obj);

/// Centers at the bounding-box center and scales the longest extent to 1.8.
/// The returned mesh's source_transform composes with the input's, so
/// denormalize() always returns to the original source units.
Mesh normalize_mesh(const Mesh& mesh);

/// Applies the inverse of source_transform (identity transform afterwards).
Mesh denormalize_mesh(const Mesh& mesh);

/// Applies a given transform to vertices (source -> canonical) and records it.
Mesh apply_transform(const Mesh& mesh, const NormalizationTransform& transform);

/// Drops triangles with area <= min_area.
void remove_degenerate_triangles(Mesh& mesh, double min_area);

/// Concatenates meshes (transforms of the inputs are ignored).
Mesh merge_meshes(const std::vector<Mesh>& parts);

/// Signed enclosed volume (positive for outward-facing counter-clockwise triangles).
double signed_volume(const Mesh& mesh);

/// Edges used by exactly one triangle; 0 for a closed surface.
std::size_t boundary_edge_count(const Mesh& mesh);

}  // namespace ksdf
