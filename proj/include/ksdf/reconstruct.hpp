#pragma once

#include "ksdf/codec.hpp"
#include "ksdf/marching_cubes.hpp"

#include <filesystem>

namespace ksdf {

/// Network values on the R^3 lattice over [-1,1]^3, evaluated in z-slabs.
ScalarField evaluate_grid(const NeuralArtifact& artifact, int resolution);

/// Zero level set of the network in canonical coordinates.
Mesh reconstruct_canonical(const NeuralArtifact& artifact, int resolution);

/// Canonical reconstruction mapped back to source units and written as OBJ.
/// An empty level set is written as an OBJ without faces (the returned mesh
/// is empty) rather than treated as an error.
Mesh reconstruct_mesh(const NeuralArtifact& artifact, int resolution, const std::filesystem::path& output);

}  // namespace ksdf
