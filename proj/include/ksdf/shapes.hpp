#pragma once

#include "ksdf/mesh.hpp"

#include <functional>

namespace ksdf::shapes {

/// Subdivided icosahedron projected onto a sphere; 10*4^s+2 vertices.
Mesh icosphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero());

/// Axis-aligned box with 12 outward-facing triangles (two per face, faces in
/// order -x,+x,-y,+y,-z,+z).
Mesh box(const Vec3& lo, const Vec3& hi);

/// Same as box() without the +z face: an open shell.
Mesh open_box(const Vec3& lo, const Vec3& hi);

/// Latitude/longitude sphere: segments*(rings-1)+2 vertices, 2*segments*(rings-1) triangles.
Mesh uv_sphere(double radius, int segments, int rings);

/// Ring torus around the z axis.
Mesh torus(double major_radius, double minor_radius, int major_segments, int minor_segments);

/// Zero level set of a positive-inside implicit function, meshed with
/// marching cubes at the given lattice resolution over [-1,1]^3.
Mesh from_implicit(const std::function<double(const Vec3&)>& inside_positive, int resolution);

/// Rounded slab pierced by `holes` vertical holes (genus = holes).
double multi_hole_plate_sdf(const Vec3& p, int holes);
Mesh multi_hole_plate(int holes, int resolution);

/// Capsule tube following a 3D Hilbert curve of the given order.
std::vector<Vec3> hilbert_curve(int order, double half_extent);
double hilbert_tube_sdf(const Vec3& p, const std::vector<Vec3>& path, double radius);
Mesh hilbert_tube(int order, double radius, int resolution);

/// Exact positive-inside signed distances of the analytic primitives.
double sphere_sdf(const Vec3& p, const Vec3& center, double radius);
double box_sdf(const Vec3& p, const Vec3& lo, const Vec3& hi);

}  // namespace ksdf::shapes
