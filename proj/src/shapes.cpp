#include "ksdf/shapes.hpp"

#include "ksdf/error.hpp"
#include "ksdf/marching_cubes.hpp"
#include "ksdf/parallel.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace ksdf::shapes {

Mesh icosphere(double radius, int subdivisions, const Vec3& center) {
  const double phi = (1.0 + std::sqrt(5.0)) / 2.0;
  std::vector<Vec3> v = {{-1, phi, 0}, {1, phi, 0}, {-1, -phi, 0}, {1, -phi, 0},
                         {0, -1, phi}, {0, 1, phi}, {0, -1, -phi}, {0, 1, -phi},
                         {phi, 0, -1}, {phi, 0, 1}, {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& p : v) p.normalize();
  std::vector<Tri> f = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
                        {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
                        {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
                        {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (int s = 0; s < subdivisions; ++s) {
    std::map<std::pair<int, int>, int> mid;
    auto midpoint = [&](int a, int b) {
      const auto key = std::minmax(a, b);
      auto it = mid.find(key);
      if (it != mid.end()) return it->second;
      v.push_back((v[a] + v[b]).normalized());
      const int id = static_cast<int>(v.size()) - 1;
      mid.emplace(key, id);
      return id;
    };
    std::vector<Tri> next;
    next.reserve(f.size() * 4);
    for (const auto& t : f) {
      const int a = midpoint(t[0], t[1]);
      const int b = midpoint(t[1], t[2]);
      const int c = midpoint(t[2], t[0]);
      next.push_back({t[0], a, c});
      next.push_back({t[1], b, a});
      next.push_back({t[2], c, b});
      next.push_back({a, b, c});
    }
    f = std::move(next);
  }
  Mesh mesh;
  mesh.vertices.reserve(v.size());
  for (const auto& p : v) mesh.vertices.push_back(center + radius * p);
  mesh.triangles = std::move(f);
  return mesh;
}

namespace {

Mesh box_faces(const Vec3& lo, const Vec3& hi, bool with_top) {
  Mesh mesh;
  for (int c = 0; c < 8; ++c) {
    mesh.vertices.emplace_back((c & 1) ? hi.x() : lo.x(), (c & 2) ? hi.y() : lo.y(), (c & 4) ? hi.z() : lo.z());
  }
  // quads listed counter-clockwise seen from outside
  const int quads[6][4] = {{0, 4, 6, 2}, {1, 3, 7, 5}, {0, 1, 5, 4},
                           {2, 6, 7, 3}, {0, 2, 3, 1}, {4, 5, 7, 6}};
  for (int q = 0; q < 6; ++q) {
    if (!with_top && q == 5) continue;
    mesh.triangles.push_back({quads[q][0], quads[q][1], quads[q][2]});
    mesh.triangles.push_back({quads[q][0], quads[q][2], quads[q][3]});
  }
  return mesh;
}

}  // namespace

Mesh box(const Vec3& lo, const Vec3& hi) { return box_faces(lo, hi, true); }
Mesh open_box(const Vec3& lo, const Vec3& hi) { return box_faces(lo, hi, false); }

Mesh uv_sphere(double radius, int segments, int rings) {
  if (segments < 3 || rings < 2) throw Error(ErrorCode::InvalidArgument, "uv_sphere needs segments >= 3, rings >= 2");
  Mesh mesh;
  mesh.vertices.emplace_back(0, 0, radius);
  for (int r = 1; r < rings; ++r) {
    const double theta = std::numbers::pi * r / rings;
    for (int s = 0; s < segments; ++s) {
      const double az = 2.0 * std::numbers::pi * s / segments;
      mesh.vertices.emplace_back(radius * std::sin(theta) * std::cos(az), radius * std::sin(theta) * std::sin(az),
                                 radius * std::cos(theta));
    }
  }
  mesh.vertices.emplace_back(0, 0, -radius);
  const int south = static_cast<int>(mesh.vertices.size()) - 1;
  auto ring = [&](int r, int s) { return 1 + (r - 1) * segments + (s % segments); };
  for (int s = 0; s < segments; ++s) mesh.triangles.push_back({0, ring(1, s), ring(1, s + 1)});
  for (int r = 1; r + 1 < rings; ++r) {
    for (int s = 0; s < segments; ++s) {
      mesh.triangles.push_back({ring(r, s), ring(r + 1, s), ring(r + 1, s + 1)});
      mesh.triangles.push_back({ring(r, s), ring(r + 1, s + 1), ring(r, s + 1)});
    }
  }
  for (int s = 0; s < segments; ++s) mesh.triangles.push_back({south, ring(rings - 1, s + 1), ring(rings - 1, s)});
  return mesh;
}

Mesh torus(double major_radius, double minor_radius, int major_segments, int minor_segments) {
  Mesh mesh;
  for (int i = 0; i < major_segments; ++i) {
    const double u = 2.0 * std::numbers::pi * i / major_segments;
    for (int j = 0; j < minor_segments; ++j) {
      const double w = 2.0 * std::numbers::pi * j / minor_segments;
      const double rr = major_radius + minor_radius * std::cos(w);
      mesh.vertices.emplace_back(rr * std::cos(u), rr * std::sin(u), minor_radius * std::sin(w));
    }
  }
  auto id = [&](int i, int j) { return (i % major_segments) * minor_segments + (j % minor_segments); };
  for (int i = 0; i < major_segments; ++i) {
    for (int j = 0; j < minor_segments; ++j) {
      mesh.triangles.push_back({id(i, j), id(i + 1, j), id(i + 1, j + 1)});
      mesh.triangles.push_back({id(i, j), id(i + 1, j + 1), id(i, j + 1)});
    }
  }
  return mesh;
}

Mesh from_implicit(const std::function<double(const Vec3&)>& inside_positive, int resolution) {
  ScalarField field(resolution);
  const std::size_t slab = static_cast<std::size_t>(resolution) * resolution;
  parallel_for_chunks(static_cast<std::size_t>(resolution), [&](std::size_t k) {
    for (int j = 0; j < resolution; ++j)
      for (int i = 0; i < resolution; ++i)
        field.values[k * slab + static_cast<std::size_t>(j) * resolution + i] =
            inside_positive(field.point(i, j, static_cast<int>(k)));
  });
  Mesh mesh = marching_cubes(field, 0.0);
  if (mesh.empty()) throw Error(ErrorCode::EmptyMesh, "implicit function has no zero crossing on the grid");
  return mesh;
}

double sphere_sdf(const Vec3& p, const Vec3& center, double radius) { return radius - (p - center).norm(); }

double box_sdf(const Vec3& p, const Vec3& lo, const Vec3& hi) {
  const Vec3 c = 0.5 * (lo + hi);
  const Vec3 h = 0.5 * (hi - lo);
  const Vec3 q = (p - c).cwiseAbs() - h;
  const double outside = q.cwiseMax(0.0).norm();
  const double inside = std::min(q.maxCoeff(), 0.0);
  return -(outside + inside);
}

double multi_hole_plate_sdf(const Vec3& p, int holes) {
  // rounded slab: box shrunk by the rounding radius, then inflated
  const double rounding = 0.1;
  const Vec3 half(0.85, 0.32, 0.16);
  const Vec3 q = p.cwiseAbs() - (half - Vec3::Constant(rounding));
  const double slab = q.cwiseMax(0.0).norm() + std::min(q.maxCoeff(), 0.0) - rounding;  // positive outside
  double d = -slab;
  const double hole_radius = 0.15;
  for (int h = 0; h < holes; ++h) {
    const double x = holes == 1 ? 0.0 : -0.55 + 1.1 * h / (holes - 1);
    const double cyl = std::hypot(p.x() - x, p.y()) - hole_radius;  // positive outside the hole
    d = std::min(d, cyl);
  }
  return d;
}

Mesh multi_hole_plate(int holes, int resolution) {
  return from_implicit([holes](const Vec3& p) { return multi_hole_plate_sdf(p, holes); }, resolution);
}

std::vector<Vec3> hilbert_curve(int order, double half_extent) {
  // Skilling's transpose-to-axes for 3 dimensions
  const int bits = order;
  const std::uint32_t n_points = 1u << (3 * bits);
  const double cells = static_cast<double>((1u << bits) - 1);
  std::vector<Vec3> path;
  path.reserve(n_points);
  for (std::uint32_t index = 0; index < n_points; ++index) {
    std::uint32_t x[3] = {0, 0, 0};
    for (int b = 0; b < bits; ++b) {
      for (int d = 0; d < 3; ++d) {
        const int src = 3 * (bits - 1 - b) + (2 - d);
        x[d] |= ((index >> src) & 1u) << (bits - 1 - b);
      }
    }
    const std::uint32_t top = 2u << (bits - 1);
    std::uint32_t t = x[2] >> 1;
    for (int d = 2; d > 0; --d) x[d] ^= x[d - 1];
    x[0] ^= t;
    for (std::uint32_t q = 2; q != top; q <<= 1) {
      const std::uint32_t p = q - 1;
      for (int d = 2; d >= 0; --d) {
        if (x[d] & q) {
          x[0] ^= p;
        } else {
          t = (x[0] ^ x[d]) & p;
          x[0] ^= t;
          x[d] ^= t;
        }
      }
    }
    Vec3 v;
    for (int d = 0; d < 3; ++d) v[d] = -half_extent + 2.0 * half_extent * x[d] / cells;
    path.push_back(v);
  }
  return path;
}

double hilbert_tube_sdf(const Vec3& p, const std::vector<Vec3>& path, double radius) {
  double best = std::numeric_limits<double>::infinity();
  for (std::size_t s = 0; s + 1 < path.size(); ++s) {
    const Vec3 ab = path[s + 1] - path[s];
    const double t = std::clamp((p - path[s]).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
    best = std::min(best, (p - (path[s] + t * ab)).norm());
  }
  return radius - best;
}

Mesh hilbert_tube(int order, double radius, int resolution) {
  const auto path = hilbert_curve(order, 0.75);
  return from_implicit([&](const Vec3& p) { return hilbert_tube_sdf(p, path, radius); }, resolution);
}

}  // namespace ksdf::shapes
