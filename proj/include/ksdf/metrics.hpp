#pragma once

#include "ksdf/codec.hpp"
#include "ksdf/pipeline.hpp"
#include "ksdf/spatial_index.hpp"

#include <json.hpp>

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ksdf {

/// A batched scalar field over canonical space. Metrics accept any field so
/// the ground-truth oracle can stand in for a network.
using FieldFn = std::function<void(std::span<const Vec3>, std::span<double>)>;

FieldFn artifact_field(const NeuralArtifact& artifact);
FieldFn oracle_field(const SpatialIndex& index, int rays = 3);

inline constexpr std::size_t kMinSurfaceSamples = 1000;
inline constexpr std::size_t kMinGiouSamples = 100000;

/// Mean |f| over area-weighted points on the true surface (raw units; the
/// usual report multiplies by 1e4). Requires n >= 1000.
double surface_error(const FieldFn& field, const SpatialIndex& gt, std::size_t n, std::uint64_t seed);

/// Mean |f - SDF| over surface points displaced by N(0, sigma^2) offsets,
/// with offsets redrawn until the point lies in [-1,1]^3. Requires n >= 1000.
double importance_error(const FieldFn& field, const SpatialIndex& gt, std::size_t n, double sigma, std::uint64_t seed);

/// Points used by importance_error, exposed for testing.
std::vector<Vec3> importance_points(const SpatialIndex& gt, std::size_t n, double sigma, std::uint64_t seed);

/// Symmetric mean point-to-surface distance (first power), each side with
/// its own derived seed. Raw units; reports multiply by 1000.
double chamfer_distance(const Mesh& a, const Mesh& b, std::size_t n, std::uint64_t seed);
double chamfer_distance(const SpatialIndex& a, const SpatialIndex& b, std::size_t n, std::uint64_t seed);

/// Monte-Carlo occupancy IoU in percent over uniform points in [-1,1]^3.
/// Inside means strictly positive. Requires n >= 100000; throws
/// DegenerateUnion when no point is inside either shape.
double giou(const FieldFn& pred, const FieldFn& gt, std::size_t n, std::uint64_t seed);
double giou(const FieldFn& pred, const SpatialIndex& gt, std::size_t n, std::uint64_t seed);

struct EvalOptions {
  std::size_t surface_samples = 100000;
  std::size_t importance_samples = 100000;
  double sigma = 0.05;
  std::size_t chamfer_samples = 30000;
  std::size_t giou_samples = 1000000;
  int resolution = 128;
  std::uint64_t seed = 0;

  void validate() const;
};

struct EvalReport {
  double surface_error_e4 = 0.0;
  double importance_error_e4 = 0.0;
  double chamfer_e3 = 0.0;
  double giou_percent = 0.0;
  bool reconstruction_empty = false;
  std::size_t reconstruction_triangles = 0;
  EvalOptions options;
  double seconds = 0.0;
};

/// All four metrics. The ground truth is given in canonical coordinates.
EvalReport evaluate(const NeuralArtifact& artifact, const SpatialIndex& gt_canonical, const EvalOptions& options);

nlohmann::json to_json(const EvalReport& report);
std::string csv_header();
std::string csv_row(const EvalReport& report);

struct AblationRow {
  Branch branch = Branch::dpfe;
  int spheres = 0;
  int layers = 0;
  int hidden = 0;
  std::size_t parameters = 0;
  std::uint64_t seed = 0;
  double final_loss = 0.0;
  EvalReport report;
};

struct AblationGrid {
  /// 0 selects the NONE branch; other counts use `sphere_branch`.
  std::vector<int> sphere_counts{0, 32, 128};
  std::vector<std::pair<int, int>> net_sizes{{6, 32}};
  std::vector<std::uint64_t> seeds{0};
  Branch sphere_branch = Branch::dpfe;
};

using AblationCallback = std::function<void(const AblationRow&, const NeuralArtifact&)>;

/// Trains every (sphere count, net size, seed) cell on one shared sample set
/// per seed and evaluates it. Rows are reported as they finish.
std::vector<AblationRow> compare_ablation(const Mesh& source, const AblationGrid& grid, const CompressOptions& compress,
                                          const EvalOptions& eval, const AblationCallback& on_row = {});

std::string ablation_csv_header();
std::string ablation_csv_row(const AblationRow& row);

}  // namespace ksdf
