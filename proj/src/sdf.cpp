#include "ksdf/sdf.hpp"

#include "ksdf/error.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/rng.hpp"

#include <json.hpp>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

namespace ksdf {
namespace {

constexpr std::size_t kChunk = 4096;

enum Stream : std::uint64_t { kSurfaceStream = 1, kNearStream = 2, kUniformStream = 3 };

Vec3 point_on_triangle(const Mesh& mesh, int t, double u1, double u2) {
  const auto& tri = mesh.triangles[t];
  const double s = std::sqrt(u1);
  const double a = 1.0 - s;
  const double b = s * (1.0 - u2);
  const double c = s * u2;
  return a * mesh.vertices[tri[0]] + b * mesh.vertices[tri[1]] + c * mesh.vertices[tri[2]];
}

/// Surface sampling with a stream tag so the strata never share random numbers.
std::vector<Vec3> surface_points(const SpatialIndex& index, std::size_t n, std::uint64_t seed, std::uint64_t stream,
                                 std::vector<int>* triangles) {
  std::vector<Vec3> out(n);
  if (triangles) triangles->assign(n, -1);
  const auto& cdf = index.area_cdf();
  const double total = cdf.back();
  parallel_for_chunks(chunk_count(n, kChunk), [&](std::size_t c) {
    Rng rng(stream_seed(seed, stream, c));
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double target = rng.uniform() * total;
      auto it = std::upper_bound(cdf.begin(), cdf.end(), target);
      if (it == cdf.end()) --it;
      const int t = static_cast<int>(it - cdf.begin());
      const double u1 = rng.uniform();
      const double u2 = rng.uniform();
      out[i] = point_on_triangle(index.mesh(), t, u1, u2);
      if (triangles) (*triangles)[i] = t;
    }
  });
  return out;
}

std::vector<Vec3> uniform_points(std::size_t n, std::uint64_t seed, std::uint64_t stream) {
  std::vector<Vec3> out(n);
  parallel_for_chunks(chunk_count(n, kChunk), [&](std::size_t c) {
    Rng rng(stream_seed(seed, stream, c));
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double x = rng.uniform(-1.0, 1.0);
      const double y = rng.uniform(-1.0, 1.0);
      const double z = rng.uniform(-1.0, 1.0);
      out[i] = {x, y, z};
    }
  });
  return out;
}

std::vector<Vec3> near_points(const SpatialIndex& index, std::size_t n, double sigma, std::uint64_t seed,
                              std::uint64_t stream) {
  std::vector<Vec3> out = surface_points(index, n, seed, stream, nullptr);
  parallel_for_chunks(chunk_count(n, kChunk), [&](std::size_t c) {
    Rng rng(stream_seed(seed, stream + 100, c));
    const std::size_t end = std::min(n, (c + 1) * kChunk);
    for (std::size_t i = c * kChunk; i < end; ++i) {
      const double dx = rng.normal();
      const double dy = rng.normal();
      const double dz = rng.normal();
      out[i] = (out[i] + sigma * Vec3(dx, dy, dz)).cwiseMax(-1.0).cwiseMin(1.0);
    }
  });
  return out;
}

}  // namespace

const std::array<Vec3, kMaxSignRays>& sign_ray_directions() {
  static const std::array<Vec3, kMaxSignRays> dirs = [] {
    std::array<Vec3, kMaxSignRays> d = {
        Vec3(0.5377, 0.8338, 0.1256),  Vec3(-0.6213, -0.1357, 0.7718), Vec3(0.2471, -0.7029, -0.6671),
        Vec3(-0.4289, 0.5561, -0.7119), Vec3(0.8147, -0.3181, 0.4845),  Vec3(-0.9057, 0.2318, -0.3547),
        Vec3(0.1323, 0.3387, 0.9316)};
    for (auto& v : d) v.normalize();
    return d;
  }();
  return dirs;
}

int inside_votes(const SpatialIndex& index, const Vec3& x, int rays) {
  rays = std::clamp(rays, 1, kMaxSignRays);
  const auto& dirs = sign_ray_directions();
  int votes = 0;
  for (int r = 0; r < rays; ++r) votes += index.count_crossings(x, dirs[r]) & 1;
  return votes;
}

int sign_of(const SpatialIndex& index, const Vec3& x, int rays) {
  rays = std::clamp(rays, 1, kMaxSignRays);
  // a point outside the bounding box is outside
  const Aabb& root = index.nodes().front().box;
  if (root.squared_distance(x) > 0.0) return -1;
  return 2 * inside_votes(index, x, rays) > rays ? 1 : -1;
}

double signed_distance(const SpatialIndex& index, const Vec3& x, int rays) {
  const double d = index.unsigned_distance(x);
  return sign_of(index, x, rays) * d;
}

void signed_distances(const SpatialIndex& index, std::span<const Vec3> points, std::span<double> out, int rays) {
  if (points.size() != out.size()) throw Error(ErrorCode::DimensionMismatch, "points/output size mismatch");
  constexpr std::size_t chunk = 1024;
  parallel_for_chunks(chunk_count(points.size(), chunk), [&](std::size_t c) {
    const std::size_t end = std::min(points.size(), (c + 1) * chunk);
    for (std::size_t i = c * chunk; i < end; ++i) out[i] = signed_distance(index, points[i], rays);
  });
}

double winding_number(const Mesh& mesh, const Vec3& x) {
  double total = 0.0;
  for (const auto& t : mesh.triangles) {
    const Vec3 a = mesh.vertices[t[0]] - x;
    const Vec3 b = mesh.vertices[t[1]] - x;
    const Vec3 c = mesh.vertices[t[2]] - x;
    const double la = a.norm(), lb = b.norm(), lc = c.norm();
    const double num = a.dot(b.cross(c));
    const double den = la * lb * lc + a.dot(b) * lc + b.dot(c) * la + c.dot(a) * lb;
    total += 2.0 * std::atan2(num, den);
  }
  return total / (4.0 * std::numbers::pi);
}

std::vector<Vec3> sample_surface_points(const SpatialIndex& index, std::size_t n, std::uint64_t seed) {
  return surface_points(index, n, seed, kSurfaceStream, nullptr);
}

std::vector<Vec3> sample_surface_points(const SpatialIndex& index, std::size_t n, std::uint64_t seed,
                                        std::vector<int>* triangles) {
  return surface_points(index, n, seed, kSurfaceStream, triangles);
}

std::vector<Vec3> sample_uniform_points(std::size_t n, std::uint64_t seed) { return uniform_points(n, seed, kUniformStream); }

std::vector<Vec3> sample_near_surface_points(const SpatialIndex& index, std::size_t n, double sigma, std::uint64_t seed) {
  return near_points(index, n, sigma, seed, kNearStream);
}

SampleSet sample_training_set(const SpatialIndex& index, std::size_t n_total, const SampleMix& mix, double noise_sigma,
                              std::uint64_t seed) {
  if (n_total < 1) throw Error(ErrorCode::InvalidArgument, "n_total must be >= 1");
  if (mix.surface < 0 || mix.near < 0 || mix.uniform < 0 || std::abs(mix.surface + mix.near + mix.uniform - 1.0) > 1e-9) {
    throw Error(ErrorCode::InvalidMix, "sample fractions must be non-negative and sum to 1");
  }
  if (!(noise_sigma > 0.0) && mix.near > 0.0) throw Error(ErrorCode::InvalidArgument, "noise sigma must be positive");
  SampleSet set;
  set.surface_count = static_cast<std::size_t>(std::llround(mix.surface * static_cast<double>(n_total)));
  set.near_count = std::min(n_total - set.surface_count,
                            static_cast<std::size_t>(std::llround(mix.near * static_cast<double>(n_total))));
  set.uniform_count = n_total - set.surface_count - set.near_count;
  set.noise_sigma = noise_sigma;
  set.seed = seed;

  std::vector<Vec3> points;
  points.reserve(n_total);
  auto append = [&](std::vector<Vec3>&& v) { points.insert(points.end(), v.begin(), v.end()); };
  append(surface_points(index, set.surface_count, seed, kSurfaceStream, nullptr));
  append(near_points(index, set.near_count, noise_sigma, seed, kNearStream));
  append(uniform_points(set.uniform_count, seed, kUniformStream));

  std::vector<double> values(n_total);
  signed_distances(index, points, values);
  set.samples.resize(n_total);
  for (std::size_t i = 0; i < n_total; ++i) {
    set.samples[i].position = {static_cast<float>(points[i].x()), static_cast<float>(points[i].y()),
                               static_cast<float>(points[i].z())};
    set.samples[i].value = static_cast<float>(values[i]);
  }
  return set;
}

void save_sample_set(const SampleSet& set, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  const std::uint32_t version = 1;
  const std::uint64_t count = set.samples.size();
  out.write("KSMP", 4);
  out.write(reinterpret_cast<const char*>(&version), 4);
  out.write(reinterpret_cast<const char*>(&count), 8);
  static_assert(sizeof(SampleSet::Sample) == 16);
  out.write(reinterpret_cast<const char*>(set.samples.data()), static_cast<std::streamsize>(count * 16));
  const nlohmann::json meta = {{"surface_count", set.surface_count}, {"near_count", set.near_count},
                               {"uniform_count", set.uniform_count}, {"noise_sigma", set.noise_sigma},
                               {"seed", set.seed}};
  const std::string blob = meta.dump();
  const std::uint32_t len = static_cast<std::uint32_t>(blob.size());
  out.write(reinterpret_cast<const char*>(&len), 4);
  out.write(blob.data(), len);
  if (!out) throw Error(ErrorCode::IoError, "write failed for " + path.string());
}

SampleSet load_sample_set(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open " + path.string());
  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t count = 0;
  if (!in.read(magic, 4) || std::memcmp(magic, "KSMP", 4) != 0) throw Error(ErrorCode::BadMagic, "not a KSMP file");
  if (!in.read(reinterpret_cast<char*>(&version), 4)) throw Error(ErrorCode::TruncatedFile, "KSMP header truncated");
  if (version != 1) throw Error(ErrorCode::VersionUnsupported, "KSMP version " + std::to_string(version));
  if (!in.read(reinterpret_cast<char*>(&count), 8) || count > (1ull << 34)) throw Error(ErrorCode::TruncatedFile, "KSMP header truncated");
  SampleSet set;
  set.samples.resize(count);
  if (!in.read(reinterpret_cast<char*>(set.samples.data()), static_cast<std::streamsize>(count * 16))) {
    throw Error(ErrorCode::TruncatedFile, "KSMP payload truncated");
  }
  std::uint32_t len = 0;
  if (!in.read(reinterpret_cast<char*>(&len), 4)) throw Error(ErrorCode::TruncatedFile, "KSMP metadata truncated");
  std::string blob(len, '\0');
  if (!in.read(blob.data(), len)) throw Error(ErrorCode::TruncatedFile, "KSMP metadata truncated");
  try {
    const auto meta = nlohmann::json::parse(blob);
    set.surface_count = meta.at("surface_count");
    set.near_count = meta.at("near_count");
    set.uniform_count = meta.at("uniform_count");
    set.noise_sigma = meta.at("noise_sigma");
    set.seed = meta.at("seed");
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::ParseError, std::string("KSMP metadata: ") + e.what());
  }
  return set;
}

}  // namespace ksdf
