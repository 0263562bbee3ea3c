#include "ksdf/metrics.hpp"

#include "ksdf/error.hpp"
#include "ksdf/log.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/reconstruct.hpp"
#include "ksdf/rng.hpp"
#include "ksdf/sdf.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <sstream>

namespace ksdf {
namespace {

constexpr std::size_t kChunk = 4096;
constexpr std::uint64_t kImportanceStream = 0x494d50;
constexpr std::uint64_t kChamferStreamA = 0x434841;
constexpr std::uint64_t kChamferStreamB = 0x434842;
constexpr std::uint64_t kGiouStream = 0x47494f55;

/// Sum of per-chunk partial sums, added in chunk order.
double ordered_sum(std::size_t n, const std::function<double(std::size_t, std::size_t)>& partial) {
  const std::size_t chunks = chunk_count(n, kChunk);
  std::vector<double> sums(chunks, 0.0);
  parallel_for_chunks(chunks, [&](std::size_t c) {
    const std::size_t lo = c * kChunk;
    sums[c] = partial(lo, std::min(n, lo + kChunk));
  });
  double total = 0.0;
  for (double s : sums) total += s;
  return total;
}

void require(std::size_t n, std::size_t floor, const char* what) {
  if (n < floor) {
    throw Error(ErrorCode::InvalidArgument,
                std::string(what) + " needs at least " + std::to_string(floor) + " samples, got " + std::to_string(n));
  }
}

std::vector<double> evaluate_all(const FieldFn& field, const std::vector<Vec3>& points) {
  std::vector<double> out(points.size());
  field(points, out);
  return out;
}

double one_sided(const SpatialIndex& from, const SpatialIndex& to, std::size_t n, std::uint64_t seed) {
  const auto points = sample_surface_points(from, n, seed);
  const double sum = ordered_sum(points.size(), [&](std::size_t lo, std::size_t hi) {
    double s = 0.0;
    for (std::size_t i = lo; i < hi; ++i) s += to.unsigned_distance(points[i]);
    return s;
  });
  return sum / static_cast<double>(points.size());
}

}  // namespace

FieldFn artifact_field(const NeuralArtifact& artifact) {
  return [&artifact](std::span<const Vec3> p, std::span<double> out) { artifact.evaluate(p, out); };
}

FieldFn oracle_field(const SpatialIndex& index, int rays) {
  return [&index, rays](std::span<const Vec3> p, std::span<double> out) { signed_distances(index, p, out, rays); };
}

double surface_error(const FieldFn& field, const SpatialIndex& gt, std::size_t n, std::uint64_t seed) {
  require(n, kMinSurfaceSamples, "surface error");
  const auto points = sample_surface_points(gt, n, seed);
  const auto values = evaluate_all(field, points);
  double sum = 0.0;
  for (double v : values) sum += std::abs(v);
  return sum / static_cast<double>(n);
}

std::vector<Vec3> importance_points(const SpatialIndex& gt, std::size_t n, double sigma, std::uint64_t seed) {
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  auto points = sample_surface_points(gt, n, seed);
  parallel_for_chunks(chunk_count(n, kChunk), [&](std::size_t c) {
    Rng rng(stream_seed(seed, kImportanceStream, c));
    const std::size_t lo = c * kChunk;
    for (std::size_t i = lo; i < std::min(n, lo + kChunk); ++i) {
      // The box is a product set and the isotropic Gaussian factorizes, so
      // per-axis rejection draws from the same conditional distribution.
      for (int axis = 0; axis < 3; ++axis) {
        const double base = points[i][axis];
        double v = base;
        for (int attempt = 0; attempt < 100000; ++attempt) {
          v = base + sigma * rng.normal();
          if (std::abs(v) <= 1.0) break;
        }
        points[i][axis] = std::clamp(v, -1.0, 1.0);
      }
    }
  });
  return points;
}

double importance_error(const FieldFn& field, const SpatialIndex& gt, std::size_t n, double sigma, std::uint64_t seed) {
  require(n, kMinSurfaceSamples, "importance error");
  const auto points = importance_points(gt, n, sigma, seed);
  const auto pred = evaluate_all(field, points);
  std::vector<double> truth(n);
  signed_distances(gt, points, truth);
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) sum += std::abs(pred[i] - truth[i]);
  return sum / static_cast<double>(n);
}

double chamfer_distance(const SpatialIndex& a, const SpatialIndex& b, std::size_t n, std::uint64_t seed) {
  if (a.mesh().empty() || b.mesh().empty()) throw Error(ErrorCode::EmptyMesh, "chamfer distance needs two non-empty meshes");
  if (n < 1) throw Error(ErrorCode::InvalidArgument, "chamfer distance needs samples");
  return 0.5 * (one_sided(a, b, n, stream_seed(seed, kChamferStreamA)) + one_sided(b, a, n, stream_seed(seed, kChamferStreamB)));
}

double chamfer_distance(const Mesh& a, const Mesh& b, std::size_t n, std::uint64_t seed) {
  if (a.empty() || b.empty()) throw Error(ErrorCode::EmptyMesh, "chamfer distance needs two non-empty meshes");
  return chamfer_distance(SpatialIndex(a), SpatialIndex(b), n, seed);
}

double giou(const FieldFn& pred, const FieldFn& gt, std::size_t n, std::uint64_t seed) {
  require(n, kMinGiouSamples, "gIoU");
  const auto points = sample_uniform_points(n, stream_seed(seed, kGiouStream));
  const auto p = evaluate_all(pred, points);
  const auto g = evaluate_all(gt, points);
  std::size_t both = 0;
  std::size_t either = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const bool a = p[i] > 0.0;
    const bool b = g[i] > 0.0;
    both += a && b;
    either += a || b;
  }
  if (either == 0) throw Error(ErrorCode::DegenerateUnion, "no sample is inside either shape");
  return 100.0 * static_cast<double>(both) / static_cast<double>(either);
}

double giou(const FieldFn& pred, const SpatialIndex& gt, std::size_t n, std::uint64_t seed) {
  return giou(pred, oracle_field(gt), n, seed);
}

void EvalOptions::validate() const {
  require(surface_samples, kMinSurfaceSamples, "surface error");
  require(importance_samples, kMinSurfaceSamples, "importance error");
  require(chamfer_samples, kMinSurfaceSamples, "chamfer distance");
  require(giou_samples, kMinGiouSamples, "gIoU");
  if (!(sigma > 0.0)) throw Error(ErrorCode::InvalidArgument, "sigma must be positive");
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "grid resolution must be >= 2");
}

EvalReport evaluate(const NeuralArtifact& artifact, const SpatialIndex& gt, const EvalOptions& options) {
  options.validate();
  const auto t0 = std::chrono::steady_clock::now();
  EvalReport r;
  r.options = options;
  const FieldFn net = artifact_field(artifact);
  r.surface_error_e4 = 1e4 * surface_error(net, gt, options.surface_samples, stream_seed(options.seed, 1));
  r.importance_error_e4 =
      1e4 * importance_error(net, gt, options.importance_samples, options.sigma, stream_seed(options.seed, 2));
  r.giou_percent = giou(net, gt, options.giou_samples, stream_seed(options.seed, 3));
  const Mesh recon = reconstruct_canonical(artifact, options.resolution);
  r.reconstruction_triangles = recon.triangles.size();
  if (recon.empty()) {
    r.reconstruction_empty = true;
    r.chamfer_e3 = std::numeric_limits<double>::infinity();
    log::warn("reconstruction is empty; chamfer distance reported as infinity");
  } else {
    r.chamfer_e3 = 1e3 * chamfer_distance(SpatialIndex(recon), gt, options.chamfer_samples, stream_seed(options.seed, 4));
  }
  r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return r;
}

nlohmann::json to_json(const EvalReport& r) {
  auto number = [](double v) { return std::isfinite(v) ? nlohmann::json(v) : nlohmann::json(nullptr); };
  return {{"surface_error_e4", number(r.surface_error_e4)},
          {"importance_error_e4", number(r.importance_error_e4)},
          {"chamfer_e3", number(r.chamfer_e3)},
          {"giou_percent", number(r.giou_percent)},
          {"reconstruction_empty", r.reconstruction_empty},
          {"reconstruction_triangles", r.reconstruction_triangles},
          {"surface_samples", r.options.surface_samples},
          {"importance_samples", r.options.importance_samples},
          {"sigma", r.options.sigma},
          {"chamfer_samples", r.options.chamfer_samples},
          {"giou_samples", r.options.giou_samples},
          {"resolution", r.options.resolution},
          {"seed", r.options.seed},
          {"seconds", r.seconds},
          {"protocol", "CD: first-power symmetric mean; gIoU: uniform Monte-Carlo in [-1,1]^3"}};
}

std::string csv_header() {
  return "surface_error_e4,importance_error_e4,chamfer_e3,giou_percent,resolution,seed,seconds";
}

std::string csv_row(const EvalReport& r) {
  std::ostringstream s;
  s.precision(9);
  s << r.surface_error_e4 << ',' << r.importance_error_e4 << ',' << r.chamfer_e3 << ',' << r.giou_percent << ','
    << r.options.resolution << ',' << r.options.seed << ',' << r.seconds;
  return s.str();
}

std::vector<AblationRow> compare_ablation(const Mesh& source, const AblationGrid& grid, const CompressOptions& compress,
                                          const EvalOptions& eval, const AblationCallback& on_row) {
  eval.validate();
  const Mesh canonical = normalize_mesh(source);
  const SpatialIndex index(canonical);
  const std::string hash = mesh_hash(source);
  std::vector<AblationRow> rows;
  for (std::uint64_t seed : grid.seeds) {
    const SampleSet data =
        sample_training_set(index, compress.samples, compress.mix, compress.sigma, sampling_seed(seed));
    for (const auto& [layers, hidden] : grid.net_sizes) {
      for (int m : grid.sphere_counts) {
        CompressOptions opt = compress;
        opt.seed = seed;
        opt.net.branch = m == 0 ? Branch::none : grid.sphere_branch;
        opt.net.spheres = m;
        opt.net.layers = layers;
        opt.net.hidden = hidden;
        log::info("ablation cell: branch=", to_string(opt.net.branch), " M=", m, " K=", layers, " Q=", hidden,
                  " seed=", seed);
        const CompressResult c = compress_prepared(index, data, canonical.source_transform, hash, opt);
        AblationRow row;
        row.branch = opt.net.branch;
        row.spheres = m;
        row.layers = layers;
        row.hidden = hidden;
        row.parameters = count_parameters(opt.net);
        row.seed = seed;
        row.final_loss = c.history.empty() ? 0.0 : c.history.back();
        EvalOptions e = eval;
        e.seed = stream_seed(eval.seed, seed);
        row.report = evaluate(c.artifact, index, e);
        if (on_row) on_row(row, c.artifact);
        rows.push_back(row);
      }
    }
  }
  return rows;
}

std::string ablation_csv_header() { return "branch,spheres,layers,hidden,parameters,train_seed,final_loss," + csv_header(); }

std::string ablation_csv_row(const AblationRow& row) {
  std::ostringstream s;
  s.precision(9);
  s << to_string(row.branch) << ',' << row.spheres << ',' << row.layers << ',' << row.hidden << ',' << row.parameters
    << ',' << row.seed << ',' << row.final_loss << ',' << csv_row(row.report);
  return s.str();
}

}  // namespace ksdf
