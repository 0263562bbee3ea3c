#pragma once

#include "ksdf/sdf.hpp"

#include <cstdint>
#include <filesystem>
#include <vector>

namespace ksdf {

/// An inscribed sphere: center inside the shape, radius = SDF(center).
struct KeySphere {
  Vec3 center = Vec3::Zero();
  double radius = 0.0;
};

struct KeySphereSet {
  std::vector<KeySphere> spheres;  // selection order
  std::size_t candidate_count = 0;
  double lambda = 1.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return spheres.size(); }
  bool empty() const { return spheres.empty(); }
};

struct SphereExtractionOptions {
  std::size_t uniform_candidates = 100000;
  std::size_t surface_candidates = 100000;
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

/// Interior candidate centers with their radii. Uniform points in [-1,1]^3
/// that every sign ray agrees are inside, plus shrinking-ball medial points
/// grown inward from surface samples. Centers and radii are rounded to f32.
struct SphereCandidates {
  std::vector<Vec3> centers;
  std::vector<double> radii;
};
SphereCandidates generate_sphere_candidates(const SpatialIndex& index, const SphereExtractionOptions& options);

/// Greedy selection: the first pick has the largest radius, every later
/// pick maximizes radius + lambda * (distance to the nearest selected center).
/// Ties go to the lower candidate index.
std::vector<std::size_t> select_key_spheres(const SphereCandidates& candidates, std::size_t count, double lambda);

/// Throws InsufficientInterior when fewer than `count` candidates are interior.
KeySphereSet extract_key_spheres(const SpatialIndex& index, std::size_t count, const SphereExtractionOptions& options = {});

/// Worst violation of SDF(x) >= r - |x - c| over probes drawn uniformly in the ball.
double validate_sphere_bound(const SpatialIndex& index, const KeySphere& sphere, std::size_t n_probe, std::uint64_t seed);

/// Worst violation of the (non-invariant) upper bound r >= SDF(x) inside the ball.
double sphere_upper_bound_excess(const SpatialIndex& index, const KeySphere& sphere, std::size_t n_probe, std::uint64_t seed);

/// Union of icospheres for visual inspection. Throws EmptyMesh for an empty set.
Mesh spheres_to_mesh(const KeySphereSet& set, int subdivisions = 2);

/// JSON array of {"c": [x,y,z], "r": r}.
void save_spheres_json(const KeySphereSet& set, const std::filesystem::path& path);
KeySphereSet load_spheres_json(const std::filesystem::path& path);

}  // namespace ksdf
