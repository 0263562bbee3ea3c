#include "ksdf/codec.hpp"
#include "ksdf/error.hpp"
#include "ksdf/key_spheres.hpp"
#include "ksdf/log.hpp"
#include "ksdf/marching_cubes.hpp"
#include "ksdf/metrics.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/pipeline.hpp"
#include "ksdf/reconstruct.hpp"

#include <CLI11.hpp>
#include <json.hpp>

#include <chrono>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kToolVersion = "ksdf 0.1.0";
constexpr std::size_t kMinTrainSamples = 1000;

// Reads either a run manifest (JSON, flags under "flags") or key=value lines.
// CLI11 only reads config files on the root app, so unscoped keys are
// assigned to the subcommand given on the command line.
class ManifestConfig : public CLI::ConfigBase {
 public:
  explicit ManifestConfig(const CLI::App* root) : root_(root) {}

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    std::string text((std::istreambuf_iterator<char>(input)), std::istreambuf_iterator<char>());
    const auto first = text.find_first_not_of(" \t\r\n");
    if (first == std::string::npos || text[first] != '{') {
      std::istringstream lines(text);
      return scoped(CLI::ConfigBase::from_config(lines));
    }
    json doc;
    try {
      doc = json::parse(text);
    } catch (const json::exception& e) {
      throw CLI::ConversionError("config", std::string("invalid JSON: ") + e.what());
    }
    const json& flags = doc.contains("flags") ? doc.at("flags") : doc;
    std::vector<CLI::ConfigItem> items;
    for (const auto& [key, value] : flags.items()) {
      CLI::ConfigItem item;
      item.name = key;
      auto add = [&](const json& v) {
        if (v.is_string()) {
          item.inputs.push_back(v.get<std::string>());
        } else if (!v.is_null()) {
          item.inputs.push_back(v.dump());
        }
      };
      if (value.is_array()) {
        for (const auto& v : value) add(v);
      } else {
        add(value);
      }
      if (!item.inputs.empty()) items.push_back(std::move(item));
    }
    return scoped(std::move(items));
  }

 private:
  std::vector<CLI::ConfigItem> scoped(std::vector<CLI::ConfigItem> items) const {
    const auto subs = root_->get_subcommands();
    if (subs.empty()) return items;
    const std::string name = subs.front()->get_name();
    for (auto& item : items) {
      if (item.parents.empty() && root_->get_option_no_throw("--" + item.name) == nullptr) item.parents = {name};
    }
    return items;
  }

  const CLI::App* root_;
};

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

json resolved_flags(const CLI::App* sub) {
  json flags = json::object();
  for (const CLI::Option* opt : sub->get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help" || name == "config") continue;
    std::vector<std::string> values;
    if (opt->count() > 0) {
      values = opt->results();
    } else if (opt->get_type_size() != 0 && !opt->get_default_str().empty()) {
      values = {opt->get_default_str()};
    }
    if (values.empty()) continue;
    flags[name] = values.size() == 1 ? json(values.front()) : json(values);
  }
  return flags;
}

struct Manifest {
  std::string subcommand;
  json flags;
  json inputs = json::object();
  json outputs = json::object();
  json seeds = json::object();
  json results = json::object();
  std::string started = utc_now();

  void write(const fs::path& output) const {
    json doc = {{"tool", kToolVersion},
                {"subcommand", subcommand},
                {"flags", flags},
                {"inputs", inputs},
                {"outputs", outputs},
                {"seeds", seeds},
                {"results", results},
                {"threads", ksdf::thread_count()},
                {"started_at", started},
                {"finished_at", utc_now()}};
    const fs::path path = output.string() + ".manifest.json";
    std::ofstream out(path, std::ios::trunc);
    out << doc.dump(2) << '\n';
    if (!out) throw ksdf::Error(ksdf::ErrorCode::IoError, "cannot write " + path.string());
  }
};

void ensure_parent(const fs::path& path) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
}

ksdf::SampleMix parse_mix(const std::string& text) {
  std::vector<double> parts;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      parts.push_back(std::stod(item));
    } catch (const std::exception&) {
      throw ksdf::Error(ksdf::ErrorCode::InvalidMix, "cannot parse mix component '" + item + "'");
    }
  }
  if (parts.size() != 3) throw ksdf::Error(ksdf::ErrorCode::InvalidMix, "--mix needs surface,near,uniform fractions");
  return {parts[0], parts[1], parts[2]};
}

template <typename T>
std::vector<T> parse_list(const std::string& text, const char* what) {
  std::vector<T> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    try {
      out.push_back(static_cast<T>(std::stoll(item)));
    } catch (const std::exception&) {
      throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, std::string("cannot parse ") + what + " entry '" + item + "'");
    }
  }
  if (out.empty()) throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, std::string(what) + " is empty");
  return out;
}

std::vector<std::pair<int, int>> parse_sizes(const std::string& text) {
  std::vector<std::pair<int, int>> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto x = item.find('x');
    if (x == std::string::npos) {
      throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, "net size '" + item + "' is not of the form KxQ");
    }
    try {
      out.emplace_back(std::stoi(item.substr(0, x)), std::stoi(item.substr(x + 1)));
    } catch (const std::exception&) {
      throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, "net size '" + item + "' is not of the form KxQ");
    }
  }
  if (out.empty()) throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, "--sizes is empty");
  return out;
}

void require_floor(std::size_t n, std::size_t floor, const std::string& flag) {
  if (n < floor) {
    throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, flag + " " + std::to_string(n) +
                                                            " is below the minimum sample floor (" +
                                                            std::to_string(floor) + ")");
  }
}

// Flags shared by compress and sweep.
struct TrainFlags {
  std::optional<int> spheres;  // 128, or 0 for the NONE branch
  int layers = 6;
  int hidden = 32;
  std::string branch = "dpfe";
  std::string activation = "relu";
  bool inverse_weights = false;
  std::size_t samples = 1000000;
  int epochs = 100;
  std::size_t batch = 4096;
  double lr = 1e-3;
  std::string schedule = "cosine";
  double final_lr_fraction = 0.05;
  std::string mix = "0.3,0.4,0.3";
  double sigma = 0.05;
  std::size_t candidates = 200000;
  double lambda = 1.0;

  void add_to(CLI::App* app, bool with_net) {
    if (with_net) {
      app->add_option("--spheres,-M", spheres, "Key sphere count M (default 128; 0 with --branch none)");
      app->add_option("--layers,-K", layers, "Hidden layer count K");
      app->add_option("--hidden,-Q", hidden, "Hidden width Q");
    }
    app->add_option("--branch", branch, "Feature branch: dpfe, lpfe or none")->check(CLI::IsMember({"dpfe", "lpfe", "none"}));
    app->add_option("--activation", activation, "Trunk activation")->check(CLI::IsMember({"relu", "sine"}));
    app->add_flag("--inverse-weights", inverse_weights, "Weight spheres by 1/d instead of d (ablation)");
    app->add_option("--samples", samples, "Training samples");
    app->add_option("--epochs", epochs, "Training epochs");
    app->add_option("--batch", batch, "Batch size");
    app->add_option("--lr", lr, "Adam learning rate");
    app->add_option("--schedule", schedule, "Learning-rate schedule")->check(CLI::IsMember({"constant", "cosine", "step"}));
    app->add_option("--final-lr-fraction", final_lr_fraction, "Final learning rate as a fraction of --lr");
    app->add_option("--mix", mix, "Sample fractions surface,near,uniform");
    app->add_option("--sigma", sigma, "Near-surface Gaussian sigma");
    app->add_option("--candidates", candidates, "Sphere candidates (uniform + surface)");
    app->add_option("--lambda", lambda, "Sphere spread weight");
  }

  ksdf::CompressOptions resolve(std::uint64_t seed) const {
    require_floor(samples, kMinTrainSamples, "--samples");
    ksdf::CompressOptions o;
    o.net.branch = ksdf::parse_branch(branch);
    o.net.spheres = spheres.value_or(o.net.branch == ksdf::Branch::none ? 0 : 128);
    o.net.layers = layers;
    o.net.hidden = hidden;
    o.net.activation = ksdf::parse_activation(activation);
    o.net.weighting = inverse_weights ? ksdf::Weighting::inverse : ksdf::Weighting::direct;
    o.train.epochs = epochs;
    o.train.batch_size = batch;
    o.train.learning_rate = lr;
    o.train.schedule = ksdf::parse_schedule(schedule);
    o.train.final_lr_fraction = final_lr_fraction;
    o.samples = samples;
    o.mix = parse_mix(mix);
    o.sigma = sigma;
    o.sphere_candidates = candidates;
    o.lambda = lambda;
    o.seed = seed;
    o.net.validate();
    o.train.validate();
    return o;
  }
};

struct EvalFlags {
  std::size_t samples = 100000;
  std::size_t chamfer_samples = 30000;
  std::size_t giou_samples = 1000000;
  double sigma = 0.05;
  int resolution = 128;

  void add_to(CLI::App* app, bool with_sigma, const std::string& samples_flag = "--samples") {
    app->add_option(samples_flag, samples, "Surface and importance error samples");
    app->add_option("--chamfer-samples", chamfer_samples, "Chamfer samples per side");
    app->add_option("--giou-samples", giou_samples, "gIoU Monte-Carlo samples");
    if (with_sigma) app->add_option("--sigma", sigma, "Importance error sigma");
    app->add_option("--resolution,-R", resolution, "Reconstruction grid resolution");
  }

  ksdf::EvalOptions resolve(std::uint64_t seed, const std::string& samples_flag = "--samples") const {
    require_floor(samples, ksdf::kMinSurfaceSamples, samples_flag);
    require_floor(chamfer_samples, ksdf::kMinSurfaceSamples, "--chamfer-samples");
    require_floor(giou_samples, ksdf::kMinGiouSamples, "--giou-samples");
    ksdf::EvalOptions e;
    e.surface_samples = samples;
    e.importance_samples = samples;
    e.chamfer_samples = chamfer_samples;
    e.giou_samples = giou_samples;
    e.sigma = sigma;
    e.resolution = resolution;
    e.seed = seed;
    e.validate();
    return e;
  }
};

void write_atomically(const fs::path& path, const std::vector<std::uint8_t>& bytes) {
  ensure_parent(path);
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    if (!out) throw ksdf::Error(ksdf::ErrorCode::IoError, "cannot write " + tmp.string());
  }
  fs::rename(tmp, path);
}

json artifact_summary(const ksdf::NeuralArtifact& a) {
  return {{"branch", ksdf::to_string(a.config.branch)},
          {"spheres", a.config.spheres},
          {"layers", a.config.layers},
          {"hidden", a.config.hidden},
          {"parameters", ksdf::count_parameters(a.config)}};
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Key-sphere neural SDF mesh compression"};
  app.require_subcommand(1);
  app.fallthrough();
  app.option_defaults()->always_capture_default();
  int threads = -1;
  app.add_option("--threads", threads, "Worker cap (0 = auto; default from KSDF_THREADS)");
  app.set_version_flag("--version", kToolVersion);
  app.config_formatter(std::make_shared<ManifestConfig>(&app));
  app.set_config("--config", "", "key=value config file or a run manifest (flags override it)");

  // compress
  auto* compress = app.add_subcommand("compress", "Train a key-sphere neural SDF for a mesh");
  std::string c_mesh;
  std::string c_out;
  std::uint64_t c_seed = 0;
  TrainFlags c_train;
  compress->add_option("mesh", c_mesh, "Input mesh (OBJ, STL, PLY)")->required();
  compress->add_option("--output,-o", c_out, "Output artifact (.ksdf)")->required();
  compress->add_option("--seed", c_seed, "Seed for sampling, spheres and training");
  c_train.add_to(compress, true);

  // reconstruct
  auto* reconstruct = app.add_subcommand("reconstruct", "Extract the zero level set of an artifact");
  std::string r_in;
  std::string r_out;
  std::string r_field;
  int r_res = 128;
  reconstruct->add_option("artifact", r_in, "Input artifact")->required();
  reconstruct->add_option("--output,-o", r_out, "Output OBJ")->required();
  reconstruct->add_option("--resolution,-R", r_res, "Grid resolution per axis");
  reconstruct->add_option("--field", r_field, "Also dump the raw grid (KFLD)");

  // eval
  auto* eval = app.add_subcommand("eval", "Evaluate an artifact against a ground-truth mesh");
  std::string e_in;
  std::string e_mesh;
  std::string e_out;
  std::string e_csv;
  std::uint64_t e_seed = 0;
  EvalFlags e_flags;
  eval->add_option("artifact", e_in, "Input artifact")->required();
  eval->add_option("mesh", e_mesh, "Ground-truth mesh in source units")->required();
  eval->add_option("--output,-o", e_out, "Report JSON (default: stdout)");
  eval->add_option("--csv", e_csv, "Append a CSV row to this file");
  eval->add_option("--seed", e_seed, "Metric sampling seed");
  e_flags.add_to(eval, true);

  // spheres
  auto* spheres = app.add_subcommand("spheres", "Extract key spheres from a mesh");
  std::string s_mesh;
  std::string s_out;
  std::string s_viz;
  int s_count = 128;
  std::size_t s_candidates = 200000;
  double s_lambda = 1.0;
  std::uint64_t s_seed = 0;
  spheres->add_option("mesh", s_mesh, "Input mesh")->required();
  spheres->add_option("--output,-o", s_out, "Output JSON (canonical coordinates)")->required();
  spheres->add_option("--spheres,-M", s_count, "Sphere count");
  spheres->add_option("--candidates", s_candidates, "Sphere candidates (uniform + surface)");
  spheres->add_option("--lambda", s_lambda, "Spread weight");
  spheres->add_option("--seed", s_seed, "Seed (matches compress --seed)");
  spheres->add_option("--viz", s_viz, "Write the union of spheres as OBJ (source units)");

  // info
  auto* info = app.add_subcommand("info", "Describe an artifact");
  std::string i_in;
  std::string i_mesh;
  info->add_option("artifact", i_in, "Input artifact")->required();
  info->add_option("--mesh", i_mesh, "Source mesh for the compression report");

  // sweep
  auto* sweep = app.add_subcommand("sweep", "Train and evaluate a grid of configurations");
  std::string w_mesh;
  std::string w_dir;
  std::string w_counts = "0,32,128";
  std::string w_sizes = "6x32";
  std::string w_seeds = "0";
  std::uint64_t w_eval_seed = 0;
  TrainFlags w_train;
  EvalFlags w_eval;
  w_train.samples = 200000;
  sweep->add_option("mesh", w_mesh, "Input mesh")->required();
  sweep->add_option("--out-dir,-o", w_dir, "Output directory")->required();
  sweep->add_option("--sphere-counts", w_counts, "Comma list of M; 0 means the NONE branch");
  sweep->add_option("--sizes", w_sizes, "Comma list of KxQ trunk sizes");
  sweep->add_option("--seeds", w_seeds, "Comma list of seeds");
  sweep->add_option("--eval-seed", w_eval_seed, "Metric sampling seed");
  w_train.add_to(sweep, false);
  sweep->get_option("--branch")->description("Branch for M > 0 rows: dpfe or lpfe");
  w_eval.giou_samples = 200000;
  w_eval.add_to(sweep, false, "--eval-samples");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (threads >= 0) ksdf::set_thread_count(threads);

    if (compress->parsed()) {
      Manifest m{"compress", resolved_flags(compress)};
      const auto options = c_train.resolve(c_seed);
      const ksdf::Mesh mesh = ksdf::load_mesh(c_mesh);
      const int log_every = std::max(1, options.train.epochs / 20);
      const auto result = ksdf::compress_mesh(mesh, options, [&](int epoch, double loss) {
        if ((epoch + 1) % log_every == 0 || epoch + 1 == options.train.epochs) {
          ksdf::log::info("epoch ", epoch + 1, "/", options.train.epochs, " loss ", loss);
        }
      });
      const auto bytes = ksdf::encode_artifact(result.artifact);
      write_atomically(c_out, bytes);
      const auto report = ksdf::compression_report(result.artifact, mesh);
      const double final_loss = result.history.empty() ? 0.0 : result.history.back();
      m.inputs = {{"mesh", c_mesh}, {"mesh_hash", ksdf::mesh_hash(mesh)}};
      m.outputs = {{"artifact", c_out}, {"bytes", bytes.size()}};
      m.seeds = {{"seed", c_seed},
                 {"sampling", ksdf::sampling_seed(c_seed)},
                 {"spheres", ksdf::sphere_seed(c_seed)},
                 {"training", ksdf::training_seed(c_seed)}};
      m.results = {{"final_loss", final_loss},
                   {"compression", ksdf::to_json(report)},
                   {"seconds", {{"sampling", result.seconds_sampling},
                                {"spheres", result.seconds_spheres},
                                {"training", result.seconds_training}}}};
      m.write(c_out);
      std::cout << "wrote " << c_out << ": " << report.artifact_params << " parameters, " << bytes.size()
                << " bytes, ratio 1:" << (report.ratio > 0 ? 1.0 / report.ratio : 0.0) << ", final loss " << final_loss
                << '\n';
    } else if (reconstruct->parsed()) {
      Manifest m{"reconstruct", resolved_flags(reconstruct)};
      const auto artifact = ksdf::deserialize(r_in);
      ensure_parent(r_out);
      const ksdf::ScalarField field = ksdf::evaluate_grid(artifact, r_res);
      if (!r_field.empty()) ksdf::save_field(field, r_field);
      ksdf::Mesh mesh = ksdf::marching_cubes(field, 0.0);
      mesh.source_transform = artifact.transform;
      mesh = ksdf::denormalize_mesh(mesh);
      if (mesh.empty()) {
        std::ofstream out(r_out, std::ios::trunc);
        out << "# empty level set\n";
        if (!out) throw ksdf::Error(ksdf::ErrorCode::IoError, "cannot write " + r_out);
      } else {
        ksdf::save_mesh(mesh, r_out);
      }
      m.inputs = {{"artifact", r_in}};
      m.outputs = {{"mesh", r_out}};
      if (!r_field.empty()) m.outputs["field"] = r_field;
      m.results = {{"resolution", r_res},
                   {"vertices", mesh.vertices.size()},
                   {"triangles", mesh.triangles.size()},
                   {"empty", mesh.empty()}};
      m.write(r_out);
      if (mesh.empty()) {
        std::cout << "empty level set at R=" << r_res << "; wrote " << r_out << '\n';
      } else {
        std::cout << "wrote " << r_out << ": " << mesh.vertices.size() << " vertices, " << mesh.triangles.size()
                  << " triangles\n";
      }
    } else if (eval->parsed()) {
      Manifest m{"eval", resolved_flags(eval)};
      const auto options = e_flags.resolve(e_seed);
      const auto artifact = ksdf::deserialize(e_in);
      const ksdf::Mesh gt = ksdf::load_mesh(e_mesh);
      const ksdf::SpatialIndex index(ksdf::apply_transform(gt, artifact.transform));
      const auto report = ksdf::evaluate(artifact, index, options);
      json doc = ksdf::to_json(report);
      doc["compression"] = ksdf::to_json(ksdf::compression_report(artifact, gt));
      doc["artifact"] = artifact_summary(artifact);
      if (e_out.empty()) {
        std::cout << doc.dump(2) << '\n';
      } else {
        ensure_parent(e_out);
        std::ofstream out(e_out, std::ios::trunc);
        out << doc.dump(2) << '\n';
        if (!out) throw ksdf::Error(ksdf::ErrorCode::IoError, "cannot write " + e_out);
      }
      if (!e_csv.empty()) {
        const bool fresh = !fs::exists(e_csv);
        std::ofstream csv(e_csv, std::ios::app);
        if (fresh) csv << ksdf::csv_header() << '\n';
        csv << ksdf::csv_row(report) << '\n';
        if (!csv) throw ksdf::Error(ksdf::ErrorCode::IoError, "cannot write " + e_csv);
      }
      if (!e_out.empty()) {
        m.inputs = {{"artifact", e_in}, {"mesh", e_mesh}};
        m.outputs = {{"report", e_out}};
        m.seeds = {{"seed", e_seed}};
        m.results = doc;
        m.write(e_out);
      }
    } else if (spheres->parsed()) {
      Manifest m{"spheres", resolved_flags(spheres)};
      const ksdf::Mesh mesh = ksdf::load_mesh(s_mesh);
      const ksdf::Mesh canonical = ksdf::normalize_mesh(mesh);
      const ksdf::SpatialIndex index(canonical);
      ksdf::SphereExtractionOptions so;
      so.uniform_candidates = s_candidates / 2;
      so.surface_candidates = s_candidates - so.uniform_candidates;
      so.lambda = s_lambda;
      so.seed = ksdf::sphere_seed(s_seed);
      if (s_count < 1) throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, "--spheres must be >= 1");
      const auto set = ksdf::extract_key_spheres(index, static_cast<std::size_t>(s_count), so);
      ensure_parent(s_out);
      ksdf::save_spheres_json(set, s_out);
      m.inputs = {{"mesh", s_mesh}};
      m.outputs = {{"spheres", s_out}};
      if (!s_viz.empty()) {
        ksdf::Mesh viz = ksdf::spheres_to_mesh(set);
        viz.source_transform = canonical.source_transform;
        ensure_parent(s_viz);
        ksdf::save_mesh(ksdf::denormalize_mesh(viz), s_viz);
        m.outputs["viz"] = s_viz;
      }
      m.seeds = {{"seed", s_seed}, {"spheres", so.seed}};
      m.results = {{"count", set.size()}, {"candidates", set.candidate_count}};
      m.write(s_out);
      std::cout << "wrote " << s_out << ": " << set.size() << " spheres from " << set.candidate_count
                << " candidates\n";
    } else if (info->parsed()) {
      const auto artifact = ksdf::deserialize(i_in);
      json doc = ksdf::describe(artifact);
      if (!i_mesh.empty()) doc["compression"] = ksdf::to_json(ksdf::compression_report(artifact, ksdf::load_mesh(i_mesh)));
      std::cout << doc.dump(2) << '\n';
    } else if (sweep->parsed()) {
      Manifest m{"sweep", resolved_flags(sweep)};
      auto options = w_train.resolve(0);
      const auto eval_options = w_eval.resolve(w_eval_seed, "--eval-samples");
      ksdf::AblationGrid grid;
      grid.sphere_counts = parse_list<int>(w_counts, "--sphere-counts");
      grid.net_sizes = parse_sizes(w_sizes);
      grid.seeds = parse_list<std::uint64_t>(w_seeds, "--seeds");
      grid.sphere_branch = options.net.branch == ksdf::Branch::none ? ksdf::Branch::dpfe : options.net.branch;
      for (int count : grid.sphere_counts) {
        if (count < 0) throw ksdf::Error(ksdf::ErrorCode::InvalidArgument, "sphere counts must be >= 0");
      }
      const ksdf::Mesh mesh = ksdf::load_mesh(w_mesh);
      fs::create_directories(w_dir);
      const fs::path csv_path = fs::path(w_dir) / "ablation.csv";
      std::ofstream csv(csv_path, std::ios::trunc);
      csv << ksdf::ablation_csv_header() << '\n' << std::flush;
      if (!csv) throw ksdf::Error(ksdf::ErrorCode::IoError, "cannot write " + csv_path.string());
      m.inputs = {{"mesh", w_mesh}};
      m.outputs = {{"table", csv_path.string()}, {"artifacts", json::array()}};
      const auto rows = ksdf::compare_ablation(
          mesh, grid, options, eval_options, [&](const ksdf::AblationRow& row, const ksdf::NeuralArtifact& artifact) {
            const std::string name = "cell_" + ksdf::to_string(row.branch) + "_M" + std::to_string(row.spheres) + "_K" +
                                     std::to_string(row.layers) + "_Q" + std::to_string(row.hidden) + "_s" +
                                     std::to_string(row.seed) + ".ksdf";
            write_atomically(fs::path(w_dir) / name, ksdf::encode_artifact(artifact));
            m.outputs["artifacts"].push_back(name);
            csv << ksdf::ablation_csv_row(row) << '\n' << std::flush;
            ksdf::log::info("sweep row: ", ksdf::ablation_csv_row(row));
          });
      m.results = {{"rows", rows.size()}};
      m.write(csv_path);
      std::cout << "wrote " << csv_path.string() << ": " << rows.size() << " rows\n";
    }
  } catch (const ksdf::Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
