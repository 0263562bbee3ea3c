#pragma once

#include "ksdf/spatial_index.hpp"

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

namespace ksdf {

/// Fixed ray directions for parity voting. Both signs of every axis occur
/// among the first five entries.
inline constexpr int kMaxSignRays = 7;
const std::array<Vec3, kMaxSignRays>& sign_ray_directions();

/// Number of the first `rays` directions whose crossing count is odd.
int inside_votes(const SpatialIndex& index, const Vec3& x, int rays);

/// +1 inside, -1 outside by majority parity vote. Ties count as outside.
int sign_of(const SpatialIndex& index, const Vec3& x, int rays = 3);

/// Positive inside, negative outside.
double signed_distance(const SpatialIndex& index, const Vec3& x, int rays = 3);

/// Batched signed_distance, parallel over fixed chunks.
void signed_distances(const SpatialIndex& index, std::span<const Vec3> points, std::span<double> out, int rays = 3);

/// Generalized winding number (sum of solid angles / 4pi). Slow reference.
double winding_number(const Mesh& mesh, const Vec3& x);

struct SampleMix {
  double surface = 0.3;
  double near = 0.4;
  double uniform = 0.3;
};

struct SampleSet {
  struct Sample {
    std::array<float, 3> position;
    float value;
  };

  std::vector<Sample> samples;
  std::size_t surface_count = 0;
  std::size_t near_count = 0;
  std::size_t uniform_count = 0;
  double noise_sigma = 0.0;
  std::uint64_t seed = 0;

  std::size_t size() const { return samples.size(); }
  Vec3 position(std::size_t i) const {
    const auto& p = samples[i].position;
    return {p[0], p[1], p[2]};
  }
};

/// Area-weighted uniform points on the surface; deterministic in seed.
std::vector<Vec3> sample_surface_points(const SpatialIndex& index, std::size_t n, std::uint64_t seed);

/// Same, also reporting the source triangle of every point.
std::vector<Vec3> sample_surface_points(const SpatialIndex& index, std::size_t n, std::uint64_t seed,
                                        std::vector<int>* triangles);

/// Uniform points in [-1,1]^3.
std::vector<Vec3> sample_uniform_points(std::size_t n, std::uint64_t seed);

/// Surface points displaced by isotropic Gaussian noise, clamped to [-1,1]^3.
std::vector<Vec3> sample_near_surface_points(const SpatialIndex& index, std::size_t n, double sigma, std::uint64_t seed);

/// Stratified training/evaluation set with exact signed distances.
/// Throws InvalidMix when the fractions do not sum to 1 (1e-9).
SampleSet sample_training_set(const SpatialIndex& index, std::size_t n_total, const SampleMix& mix = {},
                              double noise_sigma = 0.05, std::uint64_t seed = 0);

/// KSMP cache file.
void save_sample_set(const SampleSet& set, const std::filesystem::path& path);
SampleSet load_sample_set(const std::filesystem::path& path);

}  // namespace ksdf
