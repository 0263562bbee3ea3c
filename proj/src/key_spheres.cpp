#include "ksdf/key_spheres.hpp"

#include "ksdf/error.hpp"
#include "ksdf/log.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/rng.hpp"
#include "ksdf/shapes.hpp"

#include <json.hpp>

#include <algorithm>
#include <fstream>
#include <limits>

namespace ksdf {
namespace {

constexpr std::size_t kChunk = 2048;
constexpr std::uint64_t kCandidateStream = 11;
constexpr std::uint64_t kPushStream = 12;
constexpr std::uint64_t kProbeStream = 13;
constexpr int kInteriorRays = 5;

Vec3 round_f32(const Vec3& v) {
  return {static_cast<float>(v.x()), static_cast<float>(v.y()), static_cast<float>(v.z())};
}

Vec3 inward_normal(const Mesh& mesh, int t) {
  const auto& tri = mesh.triangles[t];
  const Vec3& a = mesh.vertices[tri[0]];
  const Vec3& b = mesh.vertices[tri[1]];
  const Vec3& c = mesh.vertices[tri[2]];
  return -(b - a).cross(c - a).normalized();
}

/// Largest ball through p, centered on p + t*n, that contains no surface point.
double shrinking_ball_radius(const SpatialIndex& index, const Vec3& p, const Vec3& n) {
  double lo = 0.0;
  double hi = 2.0;
  for (int it = 0; it < 14; ++it) {
    const double t = 0.5 * (lo + hi);
    const double d = index.unsigned_distance(p + t * n);
    if (d >= t * (1.0 - 1e-6)) lo = t;
    else hi = t;
  }
  return lo;
}

Vec3 point_in_ball(Rng& rng, const KeySphere& sphere) {
  Vec3 dir;
  do {
    dir = {rng.normal(), rng.normal(), rng.normal()};
  } while (dir.squaredNorm() < 1e-24);
  dir.normalize();
  return sphere.center + sphere.radius * std::cbrt(rng.uniform()) * dir;
}

}  // namespace

SphereCandidates generate_sphere_candidates(const SpatialIndex& index, const SphereExtractionOptions& options) {
  const std::size_t n_uniform = options.uniform_candidates;
  const std::size_t n_surface = options.surface_candidates;
  const std::size_t total = n_uniform + n_surface;

  std::vector<Vec3> centers(total);
  std::vector<double> radii(total, 0.0);
  std::vector<char> keep(total, 0);

  const std::vector<Vec3> uniform = sample_uniform_points(n_uniform, stream_seed(options.seed, kCandidateStream));
  std::vector<int> tri_of;
  const std::vector<Vec3> surface = sample_surface_points(index, n_surface, stream_seed(options.seed, kPushStream), &tri_of);

  parallel_for_chunks(chunk_count(total, kChunk), [&](std::size_t c) {
    const std::size_t end = std::min(total, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      Vec3 x;
      if (i < n_uniform) {
        x = round_f32(uniform[i]);
      } else {
        const std::size_t s = i - n_uniform;
        const Vec3 n = inward_normal(index.mesh(), tri_of[s]);
        const double t = shrinking_ball_radius(index, surface[s], n);
        if (!(t > 0.0)) continue;
        x = round_f32(surface[s] + t * n);
      }
      if (inside_votes(index, x, kInteriorRays) != kInteriorRays) continue;
      const double r = static_cast<float>(index.unsigned_distance(x));
      if (!(r > 0.0)) continue;
      centers[i] = x;
      radii[i] = r;
      keep[i] = 1;
    }
  });

  SphereCandidates out;
  for (std::size_t i = 0; i < total; ++i) {
    if (!keep[i]) continue;
    out.centers.push_back(centers[i]);
    out.radii.push_back(radii[i]);
  }
  return out;
}

std::vector<std::size_t> select_key_spheres(const SphereCandidates& candidates, std::size_t count, double lambda) {
  const std::size_t n = candidates.centers.size();
  std::vector<std::size_t> picked;
  if (n == 0 || count == 0) return picked;
  std::vector<double> nearest(n, std::numeric_limits<double>::infinity());
  std::vector<char> taken(n, 0);
  picked.reserve(count);
  for (std::size_t round = 0; round < count && round < n; ++round) {
    std::size_t best = n;
    double best_score = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      const double score = round == 0 ? candidates.radii[i] : candidates.radii[i] + lambda * nearest[i];
      if (score > best_score) {
        best_score = score;
        best = i;
      }
    }
    if (best == n) break;
    taken[best] = 1;
    picked.push_back(best);
    const Vec3& c = candidates.centers[best];
    for (std::size_t i = 0; i < n; ++i) {
      nearest[i] = std::min(nearest[i], (candidates.centers[i] - c).norm());
    }
  }
  return picked;
}

KeySphereSet extract_key_spheres(const SpatialIndex& index, std::size_t count, const SphereExtractionOptions& options) {
  if (count < 1) throw Error(ErrorCode::InvalidArgument, "sphere count must be >= 1");
  if (options.uniform_candidates + options.surface_candidates < 10 * count) {
    throw Error(ErrorCode::InvalidArgument, "need at least 10 candidates per requested sphere");
  }
  if (const std::size_t open = boundary_edge_count(index.mesh()); open > 0) {
    throw Error(ErrorCode::InsufficientInterior,
                "mesh is an open shell (" + std::to_string(open) + " boundary edges), so it has no interior for key spheres");
  }
  const SphereCandidates candidates = generate_sphere_candidates(index, options);
  if (candidates.centers.size() < count) {
    throw Error(ErrorCode::InsufficientInterior,
                "found " + std::to_string(candidates.centers.size()) + " interior candidates for " +
                    std::to_string(count) + " spheres; the mesh may be open or too thin");
  }
  log::debug("key spheres: ", candidates.centers.size(), " interior candidates");
  KeySphereSet set;
  set.candidate_count = candidates.centers.size();
  set.lambda = options.lambda;
  set.seed = options.seed;
  for (std::size_t i : select_key_spheres(candidates, count, options.lambda)) {
    set.spheres.push_back({candidates.centers[i], candidates.radii[i]});
  }
  if (set.spheres.size() < count) {
    throw Error(ErrorCode::InsufficientInterior, "not enough distinct interior candidates");
  }
  return set;
}

double validate_sphere_bound(const SpatialIndex& index, const KeySphere& sphere, std::size_t n_probe, std::uint64_t seed) {
  const std::size_t chunks = chunk_count(n_probe, kChunk);
  std::vector<double> worst(chunks, -std::numeric_limits<double>::infinity());
  parallel_for_chunks(chunks, [&](std::size_t c) {
    Rng rng(stream_seed(seed, kProbeStream, c));
    const std::size_t end = std::min(n_probe, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      // the first probe is the center itself
      const Vec3 x = i == 0 ? sphere.center : point_in_ball(rng, sphere);
      const double bound = sphere.radius - (x - sphere.center).norm();
      worst[c] = std::max(worst[c], bound - signed_distance(index, x));
    }
  });
  return *std::max_element(worst.begin(), worst.end());
}

double sphere_upper_bound_excess(const SpatialIndex& index, const KeySphere& sphere, std::size_t n_probe,
                                 std::uint64_t seed) {
  Rng rng(stream_seed(seed, kProbeStream + 1));
  double worst = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n_probe; ++i) {
    const Vec3 x = point_in_ball(rng, sphere);
    worst = std::max(worst, signed_distance(index, x) - sphere.radius);
  }
  return worst;
}

Mesh spheres_to_mesh(const KeySphereSet& set, int subdivisions) {
  if (set.empty()) throw Error(ErrorCode::EmptyMesh, "no spheres to visualize");
  std::vector<Mesh> parts;
  parts.reserve(set.size());
  for (const auto& s : set.spheres) parts.push_back(shapes::icosphere(s.radius, subdivisions, s.center));
  Mesh mesh = merge_meshes(parts);
  return mesh;
}

void save_spheres_json(const KeySphereSet& set, const std::filesystem::path& path) {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : set.spheres) {
    arr.push_back({{"c", {static_cast<float>(s.center.x()), static_cast<float>(s.center.y()), static_cast<float>(s.center.z())}},
                   {"r", static_cast<float>(s.radius)}});
  }
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  out << arr.dump(1) << "\n";
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

KeySphereSet load_spheres_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  KeySphereSet set;
  try {
    const auto arr = nlohmann::json::parse(in);
    for (const auto& e : arr) {
      const auto& c = e.at("c");
      set.spheres.push_back({Vec3(c.at(0).get<double>(), c.at(1).get<double>(), c.at(2).get<double>()), e.at("r").get<double>()});
    }
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("sphere JSON: ") + e.what());
  }
  return set;
}

}  // namespace ksdf
