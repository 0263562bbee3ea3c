#pragma once

#include "ksdf/mesh.hpp"

#include <filesystem>
#include <vector>

namespace ksdf {

/// Samples on a uniform R^3 lattice spanning [-1,1]^3, x fastest.
struct ScalarField {
  int resolution = 0;
  std::vector<double> values;

  ScalarField() = default;
  explicit ScalarField(int r);

  double spacing() const { return 2.0 / (resolution - 1); }
  Vec3 point(int i, int j, int k) const {
    const double h = spacing();
    return {-1.0 + h * i, -1.0 + h * j, -1.0 + h * k};
  }
  std::size_t index(int i, int j, int k) const {
    return static_cast<std::size_t>(i) +
           static_cast<std::size_t>(resolution) * (static_cast<std::size_t>(j) + static_cast<std::size_t>(resolution) * k);
  }
  double at(int i, int j, int k) const { return values[index(i, j, k)]; }
};

/// All lattice points in field order.
std::vector<Vec3> grid_points(int resolution);

/// Classic 256-case table, linear edge interpolation, shared edge vertices.
/// The level set {f = iso} is triangulated with normals pointing toward
/// decreasing f (outward for a positive-inside signed distance field). When
/// the field never crosses iso, the result is an empty mesh.
Mesh marching_cubes(const ScalarField& field, double iso = 0.0);

/// Raw field dump: "KFLD", R u32, R^3 f32, little-endian.
void save_field(const ScalarField& field, const std::filesystem::path& path);
ScalarField load_field(const std::filesystem::path& path);

}  // namespace ksdf
