#include "ksdf/metrics.hpp"
#include "ksdf/shapes.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

namespace ksdf {
namespace {

FieldFn constant(double c) {
  return [c](std::span<const Vec3>, std::span<double> out) { std::fill(out.begin(), out.end(), c); };
}

FieldFn ball(double r) {
  return [r](std::span<const Vec3> p, std::span<double> out) {
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = r - p[i].norm();
  };
}

const SpatialIndex& sphere_index() {
  static const SpatialIndex index(shapes::icosphere(0.5, 5));
  return index;
}

// E and E^2 of |x| - R + c for x = R n + N(0, sigma^2 I), by quadrature over
// the normal offset a and the tangential radius rho (Rayleigh distributed).
std::pair<double, double> constant_importance_moments(double radius, double sigma, double c) {
  const int steps = 2000;
  const double a_lo = -8 * sigma;
  const double da = 16 * sigma / steps;
  const double drho = 8 * sigma / steps;
  double m1 = 0.0, m2 = 0.0, mass = 0.0;
  for (int i = 0; i < steps; ++i) {
    const double a = a_lo + (i + 0.5) * da;
    const double pa = std::exp(-a * a / (2 * sigma * sigma)) / (sigma * std::sqrt(2 * std::numbers::pi)) * da;
    for (int j = 0; j < steps; ++j) {
      const double rho = (j + 0.5) * drho;
      const double pr = rho / (sigma * sigma) * std::exp(-rho * rho / (2 * sigma * sigma)) * drho;
      const double v = std::abs(std::hypot(radius + a, rho) - radius + c);
      m1 += pa * pr * v;
      m2 += pa * pr * v * v;
      mass += pa * pr;
    }
  }
  return {m1 / mass, m2 / mass};
}

TEST(SurfaceError, OracleAndConstantField) {
  const SpatialIndex& gt = sphere_index();
  EXPECT_LE(1e4 * surface_error(oracle_field(gt), gt, 5000, 1), 1e-5);
  EXPECT_NEAR(1e4 * surface_error(constant(0.01), gt, 5000, 1), 100.0, 1e-9);
  EXPECT_NEAR(1e4 * surface_error(constant(-0.01), gt, 5000, 1), 100.0, 1e-9);
}

TEST(SurfaceError, DeterministicAndConvergent) {
  const SpatialIndex& gt = sphere_index();
  const FieldFn x_coord = [](std::span<const Vec3> p, std::span<double> out) {
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i].x();
  };
  const double a = surface_error(x_coord, gt, 20000, 4);
  EXPECT_EQ(a, surface_error(x_coord, gt, 20000, 4));
  const double b = surface_error(x_coord, gt, 40000, 4);
  // |x| on a uniform sphere of radius R has mean R/2 and variance R^2/12
  const double se = 0.5 / std::sqrt(12.0) / std::sqrt(20000.0);
  EXPECT_NEAR(a, 0.25, 3 * se);
  EXPECT_NEAR(b, 0.25, 3 * se);
}

TEST(ImportanceError, OracleIsZero) {
  const SpatialIndex& gt = sphere_index();
  EXPECT_LE(importance_error(oracle_field(gt), gt, 5000, 0.05, 2), 1e-12);
}

TEST(ImportanceError, ConstantFieldMatchesQuadrature) {
  const SpatialIndex& gt = sphere_index();
  const std::size_t n = 40000;
  const auto [mean, second] = constant_importance_moments(0.5, 0.05, 0.01);
  const double se = std::sqrt((second - mean * mean) / static_cast<double>(n));
  // the facets sit inside the true sphere by at most about 1e-4
  EXPECT_NEAR(importance_error(constant(0.01), gt, n, 0.05, 3), mean, 3 * se + 1e-4);
}

TEST(ImportanceError, WideSigmaApproachesUniformError) {
  const SpatialIndex& gt = sphere_index();
  const std::size_t n = 40000;
  const auto uniform = sample_uniform_points(n, 8);
  std::vector<double> truth(n);
  signed_distances(gt, uniform, truth);
  double sum = 0.0;
  for (double t : truth) sum += std::abs(0.01 - t);
  const double expected = sum / static_cast<double>(n);
  EXPECT_NEAR(importance_error(constant(0.01), gt, n, 10.0, 9), expected, 0.03 * expected);
}

TEST(ImportanceError, PointsStayInsideTheDomain) {
  const SpatialIndex box(shapes::box(Vec3(-0.9, -0.9, -0.9), Vec3(0.9, 0.9, 0.9)));
  const auto p = importance_points(box, 5000, 0.2, 5);
  ASSERT_EQ(p.size(), 5000u);
  for (const Vec3& x : p) EXPECT_LE(x.cwiseAbs().maxCoeff(), 1.0);
  EXPECT_EQ(p, importance_points(box, 5000, 0.2, 5));
  EXPECT_KSDF_ERROR(importance_points(box, 10, 0.0, 5), ErrorCode::InvalidArgument);
}

TEST(Chamfer, IdenticalMeshesAreZero) {
  const Mesh m = shapes::torus(0.6, 0.25, 48, 24);
  EXPECT_LT(1e3 * chamfer_distance(m, m, 20000, 1), 1e-6);
}

TEST(Chamfer, ConcentricSpheres) {
  const Mesh a = shapes::icosphere(0.5, 5);
  const Mesh b = shapes::icosphere(0.52, 5);
  const double ab = 1e3 * chamfer_distance(a, b, 30000, 2);
  EXPECT_NEAR(ab, 20.0, 1.0);
  EXPECT_NEAR(1e3 * chamfer_distance(b, a, 30000, 2), ab, 0.2);
  EXPECT_EQ(chamfer_distance(a, b, 30000, 2), chamfer_distance(a, b, 30000, 2));
}

TEST(Chamfer, EmptyMeshIsAnError) {
  EXPECT_KSDF_ERROR(chamfer_distance(Mesh{}, shapes::icosphere(0.5, 1), 100, 0), ErrorCode::EmptyMesh);
}

TEST(Giou, OracleContainmentAndSignFlip) {
  const SpatialIndex& gt = sphere_index();
  EXPECT_DOUBLE_EQ(giou(oracle_field(gt), gt, kMinGiouSamples, 1), 100.0);
  EXPECT_NEAR(giou(ball(0.4), ball(0.5), 400000, 2), 51.2, 1.0);
  const FieldFn flipped = [](std::span<const Vec3> p, std::span<double> out) {
    for (std::size_t i = 0; i < p.size(); ++i) out[i] = p[i].norm() - 0.5;
  };
  EXPECT_NEAR(giou(flipped, ball(0.5), kMinGiouSamples, 3), 0.0, 1e-12);
}

TEST(Giou, DegenerateUnionAndFloors) {
  EXPECT_KSDF_ERROR(giou(constant(-1.0), constant(-1.0), kMinGiouSamples, 0), ErrorCode::DegenerateUnion);
  // exact zero counts as outside
  EXPECT_KSDF_ERROR(giou(constant(0.0), constant(0.0), kMinGiouSamples, 0), ErrorCode::DegenerateUnion);
  EXPECT_KSDF_ERROR(giou(ball(0.5), ball(0.5), kMinGiouSamples - 1, 0), ErrorCode::InvalidArgument);
  const SpatialIndex& gt = sphere_index();
  EXPECT_KSDF_ERROR(surface_error(constant(0.0), gt, kMinSurfaceSamples - 1, 0), ErrorCode::InvalidArgument);
  EXPECT_KSDF_ERROR(importance_error(constant(0.0), gt, kMinSurfaceSamples - 1, 0.05, 0), ErrorCode::InvalidArgument);
}

TEST(EvalOptions, Validation) {
  EvalOptions o;
  EXPECT_NO_THROW(o.validate());
  o.giou_samples = 10;
  EXPECT_KSDF_ERROR(o.validate(), ErrorCode::InvalidArgument);
  o = EvalOptions{};
  o.resolution = 1;
  EXPECT_KSDF_ERROR(o.validate(), ErrorCode::InvalidArgument);
}

// NONE net with one always-active ReLU unit: the field is offset - x.
NeuralArtifact plane_artifact(double offset) {
  NetConfig c;
  c.branch = Branch::none;
  c.spheres = 0;
  c.layers = 1;
  c.hidden = 1;
  Weights w;
  w.values = {-1.0, 0.0, 0.0, 2.0, 1.0, -2.0 + offset};
  return make_artifact(c, {}, w, {});
}

EvalOptions small_eval() {
  EvalOptions o;
  o.surface_samples = 2000;
  o.importance_samples = 2000;
  o.chamfer_samples = 2000;
  o.giou_samples = kMinGiouSamples;
  o.resolution = 24;
  o.seed = 5;
  return o;
}

TEST(Evaluate, ReportIsPopulatedAndDeterministic) {
  const SpatialIndex gt(shapes::box(Vec3(-0.9, -0.9, -0.9), Vec3(0.5, 0.9, 0.9)));
  // offset 0.5 puts the plane on the box's +x face, so the predicted solid
  // is the slab x < 0.5 of the domain
  const NeuralArtifact a = plane_artifact(0.5);
  const EvalReport r = evaluate(a, gt, small_eval());
  EXPECT_FALSE(r.reconstruction_empty);
  EXPECT_GT(r.reconstruction_triangles, 0u);
  EXPECT_GE(r.giou_percent, 0.0);
  EXPECT_LE(r.giou_percent, 100.0);
  EXPECT_NEAR(r.giou_percent, 100.0 * (1.4 * 1.8 * 1.8) / (1.5 * 2 * 2), 1.0);
  EXPECT_GT(r.chamfer_e3, 0.0);
  const EvalReport again = evaluate(a, gt, small_eval());
  EXPECT_EQ(r.surface_error_e4, again.surface_error_e4);
  EXPECT_EQ(r.importance_error_e4, again.importance_error_e4);
  EXPECT_EQ(r.chamfer_e3, again.chamfer_e3);
  EXPECT_EQ(r.giou_percent, again.giou_percent);
  const auto json = to_json(r);
  for (const char* key : {"surface_error_e4", "importance_error_e4", "chamfer_e3", "giou_percent", "seed", "giou_samples",
                          "resolution", "seconds"}) {
    EXPECT_TRUE(json.contains(key)) << key;
  }
  const std::string header = csv_header();
  const std::string row = csv_row(r);
  EXPECT_EQ(std::count(header.begin(), header.end(), ','), std::count(row.begin(), row.end(), ','));
}

TEST(Evaluate, EmptyReconstructionIsReportedNotThrown) {
  const SpatialIndex gt(shapes::icosphere(0.5, 2));
  const NeuralArtifact a = plane_artifact(5.0);
  const EvalReport r = evaluate(a, gt, small_eval());
  EXPECT_TRUE(r.reconstruction_empty);
  EXPECT_TRUE(std::isinf(r.chamfer_e3));
  EXPECT_TRUE(to_json(r)["chamfer_e3"].is_null());
}

TEST(Ablation, GridShapeAndRows) {
  const Mesh source = shapes::icosphere(0.8, 3);
  AblationGrid grid;
  grid.sphere_counts = {0, 4};
  grid.net_sizes = {{2, 8}, {3, 8}};
  grid.seeds = {1};
  CompressOptions c;
  c.samples = 3000;
  c.sphere_candidates = 4000;
  c.train.epochs = 2;
  c.train.batch_size = 512;
  EvalOptions e = small_eval();
  int callbacks = 0;
  const auto rows = compare_ablation(source, grid, c, e, [&](const AblationRow& row, const NeuralArtifact& a) {
    ++callbacks;
    EXPECT_EQ(count_parameters(a.config), row.parameters);
  });
  ASSERT_EQ(rows.size(), 4u);
  EXPECT_EQ(callbacks, 4);
  for (const auto& row : rows) {
    EXPECT_EQ(row.branch, row.spheres == 0 ? Branch::none : Branch::dpfe);
    EXPECT_TRUE(std::isfinite(row.report.surface_error_e4));
    EXPECT_TRUE(std::isfinite(row.report.importance_error_e4));
    EXPECT_GE(row.report.giou_percent, 0.0);
    const std::string line = ablation_csv_row(row);
    const std::string header = ablation_csv_header();
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), std::count(header.begin(), header.end(), ','));
  }
}

}  // namespace
}  // namespace ksdf
