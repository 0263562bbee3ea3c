#pragma once

#include "ksdf/codec.hpp"
#include "ksdf/key_spheres.hpp"
#include "ksdf/sdf.hpp"
#include "ksdf/train.hpp"

#include <cstdint>

namespace ksdf {

/// Everything the compress step needs. One seed drives sampling, sphere
/// extraction and training through separate derived streams.
struct CompressOptions {
  NetConfig net;
  TrainConfig train;
  std::size_t samples = 1000000;
  SampleMix mix;
  double sigma = 0.05;
  std::size_t sphere_candidates = 200000;  // split evenly between uniform and surface candidates
  double lambda = 1.0;
  std::uint64_t seed = 0;
};

struct CompressResult {
  NeuralArtifact artifact;
  std::vector<double> history;
  double seconds_sampling = 0.0;
  double seconds_spheres = 0.0;
  double seconds_training = 0.0;
};

/// load-free pipeline: normalize, index, sample, extract spheres, train.
/// The mesh is in source units; the artifact records the transform.
CompressResult compress_mesh(const Mesh& source, const CompressOptions& options, const EpochCallback& on_epoch = {});

/// Same, reusing a prepared canonical index and training set.
CompressResult compress_prepared(const SpatialIndex& canonical, const SampleSet& data, const NormalizationTransform& transform,
                                 const std::string& source_hash, const CompressOptions& options,
                                 const EpochCallback& on_epoch = {});

std::uint64_t sampling_seed(std::uint64_t seed);
std::uint64_t sphere_seed(std::uint64_t seed);
std::uint64_t training_seed(std::uint64_t seed);

}  // namespace ksdf
