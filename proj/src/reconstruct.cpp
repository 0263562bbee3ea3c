#include "ksdf/reconstruct.hpp"

#include "ksdf/error.hpp"
#include "ksdf/log.hpp"

#include <fstream>

namespace ksdf {

ScalarField evaluate_grid(const NeuralArtifact& artifact, int resolution) {
  if (resolution < 2) throw Error(ErrorCode::InvalidArgument, "grid resolution must be >= 2");
  ScalarField field(resolution);
  const std::size_t slab = static_cast<std::size_t>(resolution) * resolution;
  std::vector<Vec3> points(slab);
  for (int k = 0; k < resolution; ++k) {
    for (int j = 0; j < resolution; ++j) {
      for (int i = 0; i < resolution; ++i) points[i + static_cast<std::size_t>(resolution) * j] = field.point(i, j, k);
    }
    artifact.evaluate(points, std::span<double>(field.values.data() + slab * k, slab));
  }
  return field;
}

Mesh reconstruct_canonical(const NeuralArtifact& artifact, int resolution) {
  return marching_cubes(evaluate_grid(artifact, resolution), 0.0);
}

Mesh reconstruct_mesh(const NeuralArtifact& artifact, int resolution, const std::filesystem::path& output) {
  Mesh mesh = reconstruct_canonical(artifact, resolution);
  mesh.source_transform = artifact.transform;
  mesh = denormalize_mesh(mesh);
  if (mesh.empty()) {
    log::warn("reconstruction at R=", resolution, " has no zero crossing; writing an empty OBJ");
    std::ofstream out(output, std::ios::trunc);
    out << "# empty level set\n";
    if (!out) throw Error(ErrorCode::IoError, "cannot write " + output.string());
    return mesh;
  }
  save_mesh(mesh, output);
  return mesh;
}

}  // namespace ksdf
