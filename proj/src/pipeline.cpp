#include "ksdf/pipeline.hpp"

#include "ksdf/log.hpp"
#include "ksdf/rng.hpp"

#include <chrono>

namespace ksdf {
namespace {

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

}  // namespace

std::uint64_t sampling_seed(std::uint64_t seed) { return stream_seed(seed, 0x53414d50); }
std::uint64_t sphere_seed(std::uint64_t seed) { return stream_seed(seed, 0x53504852); }
std::uint64_t training_seed(std::uint64_t seed) { return stream_seed(seed, 0x5452414e); }

CompressResult compress_prepared(const SpatialIndex& canonical, const SampleSet& data, const NormalizationTransform& transform,
                                 const std::string& source_hash, const CompressOptions& options,
                                 const EpochCallback& on_epoch) {
  options.net.validate();
  options.train.validate();
  CompressResult result;

  KeySphereSet spheres;
  if (options.net.branch != Branch::none) {
    const auto t0 = std::chrono::steady_clock::now();
    SphereExtractionOptions so;
    so.uniform_candidates = options.sphere_candidates / 2;
    so.surface_candidates = options.sphere_candidates - so.uniform_candidates;
    so.lambda = options.lambda;
    so.seed = sphere_seed(options.seed);
    spheres = extract_key_spheres(canonical, static_cast<std::size_t>(options.net.spheres), so);
    result.seconds_spheres = seconds_since(t0);
    log::info("extracted ", spheres.size(), " key spheres from ", spheres.candidate_count, " candidates");
  }

  TrainConfig tc = options.train;
  tc.seed = training_seed(options.seed);
  const auto t1 = std::chrono::steady_clock::now();
  TrainResult trained = train(options.net, spheres, data, tc, on_epoch);
  result.seconds_training = seconds_since(t1);
  result.history = std::move(trained.history);

  nlohmann::json provenance = {
      {"mesh_hash", source_hash},
      {"seed", options.seed},
      {"train_seed", tc.seed},
      {"samples", data.size()},
      {"epochs", options.train.epochs},
      {"final_loss", result.history.empty() ? 0.0 : result.history.back()},
  };
  result.artifact = make_artifact(options.net, std::move(spheres), std::move(trained.weights), transform, provenance);
  return result;
}

CompressResult compress_mesh(const Mesh& source, const CompressOptions& options, const EpochCallback& on_epoch) {
  options.net.validate();
  options.train.validate();
  const Mesh canonical = normalize_mesh(source);
  const SpatialIndex index(canonical);
  const auto t0 = std::chrono::steady_clock::now();
  const SampleSet data = sample_training_set(index, options.samples, options.mix, options.sigma, sampling_seed(options.seed));
  const double sampling = seconds_since(t0);
  log::info("sampled ", data.size(), " training points in ", sampling, " s");
  CompressResult r = compress_prepared(index, data, canonical.source_transform, mesh_hash(source), options, on_epoch);
  r.seconds_sampling = sampling;
  return r;
}

}  // namespace ksdf
