#pragma once

#include "ksdf/mesh.hpp"
#include "ksdf/network.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace ksdf {

inline constexpr std::uint32_t kArtifactVersion = 1;

/// The compressed representation of one shape.
struct NeuralArtifact {
  NetConfig config;
  KeySphereSet spheres;
  Weights weights;
  NormalizationTransform transform;
  /// Free-form provenance: "mesh_hash", "train_seed" and run details. Stored
  /// as JSON and not counted as parameters.
  nlohmann::json provenance = nlohmann::json::object();

  /// Evaluates the network; all spheres/weights are as stored on disk.
  double operator()(const Vec3& x) const { return forward(config, weights, spheres, x); }
  void evaluate(std::span<const Vec3> points, std::span<double> out) const {
    forward_batch(config, weights, spheres, points, out);
  }
};

/// Builds an artifact and rounds spheres/weights to f32 so that the
/// in-memory network is exactly the one a reader reconstructs.
NeuralArtifact make_artifact(const NetConfig& config, KeySphereSet spheres, Weights weights,
                             const NormalizationTransform& transform, nlohmann::json provenance = nlohmann::json::object());

/// FNV-1a over vertex coordinates and triangle indices, as hex.
std::string mesh_hash(const Mesh& mesh);

/// KSDF bytes. Layout (little-endian): "KSDF", version u32, flags u8 (low
/// nibble branch; bit 4 sine activation; bit 5 inverse weighting), M u32,
/// K u32, Q u32, feature_dim u32, transform 4 x f64 (scale, translation),
/// spheres M x 4 f32, feature block f32, trunk layers f32, CRC32 u32,
/// provenance length u32 + JSON bytes. The CRC covers every other byte.
std::vector<std::uint8_t> encode_artifact(const NeuralArtifact& artifact);
NeuralArtifact decode_artifact(const std::vector<std::uint8_t>& bytes);

/// Writes the file and returns its size in bytes.
std::size_t serialize(const NeuralArtifact& artifact, const std::filesystem::path& path);
NeuralArtifact deserialize(const std::filesystem::path& path);

/// Size of a KSDF file for a config and provenance length.
std::size_t artifact_byte_count(const NetConfig& config, std::size_t provenance_bytes);
/// Header bytes before the sphere block.
inline constexpr std::size_t kArtifactHeaderBytes = 4 + 4 + 1 + 4 * 4 + 4 * 8;

struct CompressionReport {
  std::size_t source_params = 0;    // 3 |V| + 3 |F|
  std::size_t artifact_params = 0;  // count_parameters(config)
  double ratio = 0.0;               // artifact / source
  std::size_t artifact_payload_bytes = 0;  // 4 bytes per parameter
};

/// Emits a warning when the artifact is larger than the mesh.
CompressionReport compression_report(const NeuralArtifact& artifact, const Mesh& source_mesh);

nlohmann::json to_json(const CompressionReport& report);
nlohmann::json describe(const NeuralArtifact& artifact);

}  // namespace ksdf
