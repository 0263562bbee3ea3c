#include "gradient_check.hpp"
#include "ksdf/codec.hpp"
#include "ksdf/log.hpp"
#include "ksdf/marching_cubes.hpp"
#include "ksdf/metrics.hpp"
#include "ksdf/pipeline.hpp"
#include "ksdf/shapes.hpp"

#include <sys/wait.h>

#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace ksdf {
namespace {

struct Verdict {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

std::string read_bytes(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

class ScratchDir {
 public:
  ScratchDir() {
    std::random_device rd;
    path_ = std::filesystem::temp_directory_path() / ("ksdf_accept_" + std::to_string(rd()) + std::to_string(rd()));
    std::filesystem::create_directories(path_);
  }
  ~ScratchDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

NetConfig make_config(Branch b, int m, int k, int q, Activation a = Activation::relu,
                      Weighting w = Weighting::direct) {
  NetConfig c;
  c.branch = b;
  c.spheres = b == Branch::none ? 0 : m;
  c.layers = k;
  c.hidden = q;
  c.activation = a;
  c.weighting = w;
  return c;
}

// Serialized scalars: payload bytes between the header and the checksum, 4 each.
std::size_t serialized_scalars(const NeuralArtifact& a) {
  const std::size_t bytes = encode_artifact(a).size();
  return (bytes - kArtifactHeaderBytes - 8 - a.provenance.dump().size()) / 4;
}

Verdict parameter_accounting() {
  const NetConfig dpfe = make_config(Branch::dpfe, 128, 6, 32);
  const NetConfig none = make_config(Branch::none, 0, 8, 32);
  const std::size_t n_dpfe = count_parameters(dpfe);
  const std::size_t n_none = count_parameters(none);
  const std::size_t s_dpfe = serialized_scalars(make_artifact(dpfe, test::random_spheres(128, 1), init_weights(dpfe, 1), {}));
  const std::size_t s_none = serialized_scalars(make_artifact(none, {}, init_weights(none, 1), {}));
  Verdict v;
  v.pass = n_dpfe == 7026 && n_none == 7553 && s_dpfe == n_dpfe && s_none == n_none;
  v.detail = "dpfe " + std::to_string(n_dpfe) + " (serialized " + std::to_string(s_dpfe) + "), none " +
             std::to_string(n_none) + " (serialized " + std::to_string(s_none) + ")";
  return v;
}

Verdict gradient_correctness() {
  double worst = 0.0;
  bool all_clean = true;
  std::size_t checked = 0;
  for (Branch b : {Branch::dpfe, Branch::lpfe, Branch::none}) {
    for (Activation a : {Activation::relu, Activation::sine}) {
      const NetConfig c = make_config(b, 16, 4, 16, a);
      for (std::uint64_t seed : {1, 2, 3}) {
        const auto spheres = test::random_spheres(c.spheres, seed + 40);
        const auto r = test::check_gradients(c, spheres, seed, 10, 1e-4);
        all_clean = all_clean && r.clean;
        worst = std::max(worst, r.max_relative_error);
        checked += r.parameters;
      }
    }
  }
  Verdict v;
  v.pass = all_clean && worst < 1e-4;
  v.detail = "max relative error " + fmt("%.3g", worst) + " over " + std::to_string(checked) + " parameters" +
             (all_clean ? "" : " (kink-free batch not found)");
  return v;
}

Verdict weight_normalization() {
  Rng rng(11);
  double worst = 0.0;
  std::vector<double> w;
  for (int i = 0; i < 100000; ++i) {
    const int m = 1 + static_cast<int>(rng.uniform() * 256);
    const auto spheres = test::random_spheres(m, stream_seed(11, i));
    const Vec3 x(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    w.assign(m, 0.0);
    point_feature_weights(x, spheres, i % 2 ? Weighting::inverse : Weighting::direct, w);
    double s = 0.0;
    for (double v : w) s += v;
    worst = std::max(worst, std::abs(s - 1.0));
  }
  Verdict v;
  v.pass = worst <= 1e-12;
  v.detail = "max |sum - 1| " + fmt("%.3g", worst) + " over 1e5 pairs";
  return v;
}

Mesh bunny() { return load_mesh(std::filesystem::path(KSDF_DATA_DIR) / "bunny.obj"); }

Verdict sphere_bound() {
  const std::vector<std::pair<std::string, Mesh>> meshes = {
      {"icosphere", shapes::icosphere(0.9, 4)},
      {"box", shapes::box(Vec3(-0.9, -0.5, -0.3), Vec3(0.9, 0.5, 0.3))},
      {"torus", shapes::torus(0.6, 0.25, 64, 32)},
      {"plate", shapes::multi_hole_plate(3, 64)},
      {"bunny", bunny()}};
  double worst = 0.0;
  std::size_t total = 0;
  for (const auto& [name, mesh] : meshes) {
    const SpatialIndex index(normalize_mesh(mesh));
    SphereExtractionOptions o;
    o.uniform_candidates = 20000;
    o.surface_candidates = 20000;
    const KeySphereSet set = extract_key_spheres(index, 32, o);
    for (std::size_t j = 0; j < set.size(); ++j) {
      worst = std::max(worst, validate_sphere_bound(index, set.spheres[j], 10000, stream_seed(7, j)));
    }
    total += set.size();
  }
  Verdict v;
  v.pass = worst <= 1e-3;
  v.detail = "max violation " + fmt("%.3g", worst) + " over " + std::to_string(total) + " spheres from 5 meshes";
  return v;
}

Verdict oracle_fidelity() {
  const Mesh ico = shapes::icosphere(0.9, 4);
  const Vec3 lo(-0.9, -0.6, -0.4), hi(0.9, 0.6, 0.4);
  const Mesh box = shapes::box(lo, hi);
  const SpatialIndex ico_index(ico), box_index(box);
  // the flat faces lie inside the sphere, deepest at the face nearest the center
  const double deviation = 0.9 - ico_index.unsigned_distance(Vec3::Zero());
  const auto points = sample_uniform_points(100000, 21);
  std::vector<double> d(points.size());
  double ico_err = 0.0, box_err = 0.0;
  signed_distances(ico_index, points, d);
  for (std::size_t i = 0; i < points.size(); ++i) ico_err = std::max(ico_err, std::abs(d[i] - shapes::sphere_sdf(points[i], Vec3::Zero(), 0.9)));
  signed_distances(box_index, points, d);
  for (std::size_t i = 0; i < points.size(); ++i) box_err = std::max(box_err, std::abs(d[i] - shapes::box_sdf(points[i], lo, hi)));

  double bvh_err = 0.0;
  Rng rng(5);
  for (const Mesh& m : {box, shapes::icosphere(0.9, 2), shapes::torus(0.6, 0.25, 20, 10)}) {
    if (m.triangles.size() > 500) continue;
    const SpatialIndex index(m);
    for (int q = 0; q < 2000; ++q) {
      const Vec3 p(rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5), rng.uniform(-1.5, 1.5));
      bvh_err = std::max(bvh_err, std::abs(index.closest(p).distance() - brute_force_closest(m, p).distance()));
    }
  }
  Verdict v;
  // the box is tessellated exactly, so its bound is rounding only
  v.pass = ico_err <= 2 * deviation && box_err <= 1e-9 && bvh_err <= 1e-9;
  v.detail = "icosphere max error " + fmt("%.3g", ico_err) + " (deviation " + fmt("%.3g", deviation) + "), box " +
             fmt("%.3g", box_err) + ", bvh vs brute force " + fmt("%.3g", bvh_err);
  return v;
}

// Sine features and a cosine-decayed rate fit smooth shapes to the targets below.
CompressOptions trained_options(std::uint64_t seed) {
  CompressOptions o;
  o.seed = seed;
  o.net.activation = Activation::sine;
  o.train.batch_size = 256;
  o.train.learning_rate = 1e-3;
  return o;
}

Verdict analytic_shape() {
  const Mesh ico = shapes::icosphere(0.9, 4);
  CompressOptions o = trained_options(0);
  o.net.spheres = 8;
  o.samples = 50000;
  o.train.epochs = 200;
  o.train.final_lr_fraction = 0.01;
  const CompressResult r = compress_mesh(ico, o);
  const SpatialIndex gt(normalize_mesh(ico));
  EvalOptions e;
  e.resolution = 128;
  const EvalReport rep = evaluate(r.artifact, gt, e);
  Verdict v;
  v.pass = rep.giou_percent > 99.0 && rep.chamfer_e3 < 0.5 && rep.surface_error_e4 < 50.0;
  v.detail = "gIoU " + fmt("%.3f", rep.giou_percent) + ", CDx1000 " + fmt("%.4f", rep.chamfer_e3) + ", surface x1e4 " +
             fmt("%.3f", rep.surface_error_e4) + ", training " + fmt("%.0f s", r.seconds_training);
  return v;
}

struct Means {
  double surface = 0.0;
  double chamfer = 0.0;
};

Verdict ablation_direction() {
  const Mesh source = bunny();
  const Mesh canonical = normalize_mesh(source);
  const SpatialIndex gt(canonical);
  const std::string hash = mesh_hash(source);
  Means dpfe, none;
  std::ostringstream runs;
  for (std::uint64_t seed : {0, 1, 2}) {
    const SampleSet data = sample_training_set(gt, 200000, {}, 0.05, sampling_seed(seed));
    for (Branch b : {Branch::dpfe, Branch::none}) {
      CompressOptions o = trained_options(seed);
      o.samples = data.size();
      o.train.epochs = 100;
      o.net = make_config(b, 128, b == Branch::none ? 8 : 6, 32, Activation::sine);
      const CompressResult r = compress_prepared(gt, data, canonical.source_transform, hash, o);
      EvalOptions e;
      e.seed = seed;
      const EvalReport rep = evaluate(r.artifact, gt, e);
      Means& m = b == Branch::dpfe ? dpfe : none;
      m.surface += rep.surface_error_e4 / 3;
      m.chamfer += rep.chamfer_e3 / 3;
      runs << " " << to_string(b) << seed << "=" << fmt("%.2f", rep.surface_error_e4) << "/" << fmt("%.3f", rep.chamfer_e3);
      log::info("bunny ", to_string(b), " seed ", seed, ": surface ", rep.surface_error_e4, " CD ", rep.chamfer_e3);
    }
  }
  Verdict v;
  v.pass = dpfe.surface < none.surface && dpfe.chamfer < none.chamfer;
  v.detail = "mean surface x1e4 dpfe " + fmt("%.3f", dpfe.surface) + " vs none " + fmt("%.3f", none.surface) +
             ", mean CDx1000 dpfe " + fmt("%.4f", dpfe.chamfer) + " vs none " + fmt("%.4f", none.chamfer) + ";" + runs.str();
  return v;
}

Verdict sphere_count_monotonicity() {
  const Mesh source = shapes::multi_hole_plate(4, 96);
  const Mesh canonical = normalize_mesh(source);
  const SpatialIndex gt(canonical);
  const std::string hash = mesh_hash(source);
  const std::vector<int> counts = {32, 128, 512};
  std::vector<double> cd(counts.size(), 0.0);
  std::ostringstream runs;
  for (std::uint64_t seed : {0, 1, 2}) {
    const SampleSet data = sample_training_set(gt, 200000, {}, 0.05, sampling_seed(seed));
    for (std::size_t i = 0; i < counts.size(); ++i) {
      CompressOptions o = trained_options(seed);
      o.samples = data.size();
      o.train.epochs = 100;
      o.net = make_config(Branch::lpfe, counts[i], 6, 32, Activation::sine);
      const CompressResult r = compress_prepared(gt, data, canonical.source_transform, hash, o);
      EvalOptions e;
      e.seed = seed;
      const EvalReport rep = evaluate(r.artifact, gt, e);
      cd[i] += rep.chamfer_e3 / 3;
      runs << " M" << counts[i] << "s" << seed << "=" << fmt("%.3f", rep.chamfer_e3);
      log::info("plate M=", counts[i], " seed ", seed, ": CD ", rep.chamfer_e3);
    }
  }
  Verdict v;
  v.pass = cd[2] <= 1.1 * cd[1] && cd[1] <= 1.1 * cd[0];
  v.detail = "mean CDx1000 M=32 " + fmt("%.4f", cd[0]) + ", M=128 " + fmt("%.4f", cd[1]) + ", M=512 " + fmt("%.4f", cd[2]) + ";" + runs.str();
  return v;
}

Verdict codec_round_trip() {
  ScratchDir dir;
  const auto probes = sample_uniform_points(500, 17);
  int identical = 0, configs = 0;
  std::uint64_t seed = 0;
  for (Branch b : {Branch::dpfe, Branch::lpfe, Branch::none}) {
    for (int m : {1, 32}) {
      for (Activation act : {Activation::relu, Activation::sine}) {
        ++seed;
        const NetConfig c = make_config(b, m, 1 + static_cast<int>(seed % 4), 8 + 4 * static_cast<int>(seed % 3), act,
                                        seed % 3 == 0 ? Weighting::inverse : Weighting::direct);
        NormalizationTransform t;
        t.scale = 0.37;
        t.translation = Vec3(1.5, -2.25, 0.125);
        const NeuralArtifact a = make_artifact(c, test::random_spheres(c.spheres, seed), init_weights(c, seed), t, {{"seed", seed}});
        const auto path = dir / ("a" + std::to_string(seed) + ".ksdf");
        serialize(a, path);
        const NeuralArtifact back = deserialize(path);
        std::vector<double> fa(probes.size()), fb(probes.size());
        a.evaluate(probes, fa);
        back.evaluate(probes, fb);
        bool same = back.config == a.config;
        for (std::size_t p = 0; p < probes.size(); ++p) {
          const float x = static_cast<float>(fa[p]), y = static_cast<float>(fb[p]);
          same = same && std::memcmp(&x, &y, sizeof x) == 0;
        }
        identical += same;
        ++configs;
      }
    }
  }
  const NetConfig c = make_config(Branch::dpfe, 4, 2, 8);
  const auto good = encode_artifact(make_artifact(c, test::random_spheres(4, 3), init_weights(c, 3), {}, {{"seed", 3}}));
  std::size_t corrupted = 0, detected = 0;
  for (std::uint8_t mask : {std::uint8_t{0x01}, std::uint8_t{0x80}, std::uint8_t{0xff}}) {
    for (std::size_t i = 0; i < good.size(); ++i) {
      auto bad = good;
      bad[i] ^= mask;
      ++corrupted;
      try {
        decode_artifact(bad);
      } catch (const Error&) {
        ++detected;
      }
    }
  }
  Verdict v;
  v.pass = configs == 12 && identical == 12 && detected == corrupted;
  v.detail = std::to_string(identical) + "/" + std::to_string(configs) + " configs bit-identical, " +
             std::to_string(detected) + "/" + std::to_string(corrupted) + " corrupted files rejected";
  return v;
}

ScalarField sample_field(int r, const std::function<double(const Vec3&)>& f) {
  ScalarField field(r);
  const auto pts = grid_points(r);
  for (std::size_t i = 0; i < pts.size(); ++i) field.values[i] = f(pts[i]);
  return field;
}

Verdict marching_cubes_exactness() {
  Rng rng(2);
  double linear = 0.0;
  std::size_t vertices = 0;
  for (int trial = 0; trial < 10; ++trial) {
    const Vec3 n(rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(-1, 1));
    const double b = rng.uniform(-0.3, 0.3);
    const auto f = [&](const Vec3& p) { return n.dot(p) + b; };
    const Mesh m = marching_cubes(sample_field(17 + 4 * trial, f));
    for (const Vec3& v : m.vertices) linear = std::max(linear, std::abs(f(v)));
    vertices += m.vertices.size();
  }
  const ScalarField sphere = sample_field(64, [](const Vec3& p) { return shapes::sphere_sdf(p, Vec3::Zero(), 0.6); });
  const Mesh m = marching_cubes(sphere);
  double radial = 0.0;
  for (const Vec3& v : m.vertices) radial = std::max(radial, std::abs(v.norm() - 0.6));
  Verdict v;
  v.pass = vertices > 0 && !m.empty() && linear <= 1e-9 && radial <= sphere.spacing();
  v.detail = "linear max |f(v)| " + fmt("%.3g", linear) + ", sphere max radial error " + fmt("%.4f", radial) +
             " (spacing " + fmt("%.4f", sphere.spacing()) + ")";
  return v;
}

int run_cli(const std::string& args) {
  const std::string cmd = "KSDF_LOG=warn " + std::string(KSDF_CLI_PATH) + " " + args + " >/dev/null";
  const int status = std::system(cmd.c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

Verdict determinism() {
  ScratchDir dir;
  const std::string mesh = (std::filesystem::path(KSDF_DATA_DIR) / "bunny.obj").string();
  const std::string common = " compress " + mesh + " --seed 5 --samples 20000 --epochs 3 --batch 512 --candidates 20000";
  std::vector<std::string> outputs;
  bool ok = true;
  for (int threads : {1, 1, 4, 4}) {
    const auto out = dir / ("run" + std::to_string(outputs.size()) + ".ksdf");
    ok = ok && run_cli("--threads " + std::to_string(threads) + common + " -o " + out.string()) == 0;
    outputs.push_back(read_bytes(out));
  }
  bool same = ok && !outputs[0].empty();
  for (const auto& o : outputs) same = same && o == outputs[0];
  Verdict v;
  v.pass = same;
  v.detail = ok ? std::to_string(outputs.size()) + " runs (threads 1,1,4,4), " + std::to_string(outputs[0].size()) +
                      " bytes, " + (same ? "byte-identical" : "outputs differ")
                : "compress failed";
  return v;
}

Verdict compression_reporting() {
  const Mesh mesh = shapes::uv_sphere(0.9, 204, 123);
  double ratio_inv[2] = {0.0, 0.0};
  std::size_t source = 0;
  int i = 0;
  for (Branch b : {Branch::dpfe, Branch::lpfe}) {
    CompressOptions o = trained_options(0);
    o.net = make_config(b, 128, 6, 32, Activation::sine);
    o.samples = 20000;
    o.train.epochs = 1;
    o.sphere_candidates = 20000;
    const CompressResult r = compress_mesh(mesh, o);
    const CompressionReport rep = compression_report(r.artifact, mesh);
    source = rep.source_params;
    ratio_inv[i++] = 1.0 / rep.ratio;
  }
  Verdict v;
  v.pass = std::abs(ratio_inv[0] / 31.9 - 1.0) <= 0.15 && std::abs(ratio_inv[1] / 21.0 - 1.0) <= 0.15;
  v.detail = "mesh " + std::to_string(source) + " parameters, dpfe 1:" + fmt("%.2f", ratio_inv[0]) + ", lpfe 1:" +
             fmt("%.2f", ratio_inv[1]);
  return v;
}

struct Criterion {
  const char* name;
  std::function<Verdict()> run;
};

const std::vector<Criterion>& criteria() {
  static const std::vector<Criterion> all = {
      {"parameter accounting", parameter_accounting},
      {"gradient correctness", gradient_correctness},
      {"feature weight normalization", weight_normalization},
      {"key sphere bound", sphere_bound},
      {"oracle fidelity", oracle_fidelity},
      {"end-to-end analytic shape", analytic_shape},
      {"ablation direction on bunny", ablation_direction},
      {"sphere-count monotonicity", sphere_count_monotonicity},
      {"codec round trip", codec_round_trip},
      {"marching cubes exactness", marching_cubes_exactness},
      {"determinism", determinism},
      {"compression reporting", compression_reporting},
  };
  return all;
}

}  // namespace
}  // namespace ksdf

int main(int argc, char** argv) {
  using namespace ksdf;
  log::set_level(log::Level::warn);
  std::vector<int> selected;
  for (int i = 1; i < argc; ++i) selected.push_back(std::atoi(argv[i]));
  if (selected.empty()) {
    for (int i = 1; i <= static_cast<int>(criteria().size()); ++i) selected.push_back(i);
  }
  bool all_pass = true;
  for (int id : selected) {
    if (id < 1 || id > static_cast<int>(criteria().size())) {
      std::cerr << "unknown criterion " << id << "\n";
      return 2;
    }
    const Criterion& c = criteria()[id - 1];
    const auto t0 = std::chrono::steady_clock::now();
    Verdict v;
    try {
      v = c.run();
    } catch (const std::exception& e) {
      v.detail = std::string("error: ") + e.what();
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cout << (v.pass ? "PASS" : "FAIL") << "  criterion " << id << "  " << c.name << ": " << v.detail << " ["
              << fmt("%.1f s", secs) << "]" << std::endl;
    all_pass = all_pass && v.pass;
  }
  return all_pass ? 0 : 1;
}
