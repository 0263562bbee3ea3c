#pragma once

// Batched forward/backward kernels shared by inference, gradient evaluation
// and training. Samples are columns; activations are (units x samples).

#include "ksdf/network.hpp"

#include <Eigen/Core>

namespace ksdf::detail {

using Mat = Eigen::MatrixXd;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;
using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;
using VecMap = Eigen::Map<Eigen::VectorXd>;

inline constexpr std::size_t kChunk = 512;

/// Eigen picks the start of its vectorized reductions from the runtime
/// address of unaligned maps, which makes rounding depend on where a
/// std::vector happened to be allocated. Weight and gradient buffers handed
/// to the engine are therefore Eigen-allocated, so every block offset has a
/// fixed alignment.
inline Eigen::VectorXd aligned_copy(const std::vector<double>& values) {
  return Eigen::Map<const Eigen::VectorXd>(values.data(), static_cast<Eigen::Index>(values.size()));
}

/// Sphere-derived per-sample inputs of a chunk.
struct SphereInputs {
  Mat weights;  // M x n, w_ij
};

/// Fills the columns of `inputs` for the given positions (3 x n).
void compute_sphere_inputs(const NetConfig& config, const KeySphereSet& spheres, const Mat& xyz, SphereInputs& inputs);

/// Per-sphere features z_j as columns (29 x M). DPFE: z_j = act(A s_j + b)
/// with s_j = (c_j, r_j); LPFE: the latent table. Independent of the query
/// point, so it is built once per weight vector.
struct FeatureTable {
  Mat z;
  Mat pre;      // DPFE pre-activations A s_j + b
  Mat spheres;  // DPFE 4 x M sphere vectors
};

void build_feature_table(const NetConfig& config, const WeightLayout& layout, const double* weights,
                         const KeySphereSet& spheres, FeatureTable& table);

struct Workspace {
  std::vector<Mat> pre;   // pre-activations of the K hidden layers
  std::vector<Mat> act;   // act[0] = trunk input, act[l+1] = activation of hidden layer l
  Eigen::RowVectorXd out;
  Mat grad;               // backward scratch
  Mat grad_next;
};

/// Forward pass over a chunk. `inputs` must hold the sphere data for xyz.
void forward_chunk(const NetConfig& config, const WeightLayout& layout, const double* weights, const Mat& xyz,
                   const SphereInputs& inputs, const FeatureTable& table, Workspace& ws);

/// Backward pass after forward_chunk. `out_grad` is dLoss/dOutput per sample.
/// Accumulates into `gradient` (same layout as weights).
void backward_chunk(const NetConfig& config, const WeightLayout& layout, const double* weights,
                    const SphereInputs& inputs, const FeatureTable& table, const Eigen::RowVectorXd& out_grad,
                    Workspace& ws, double* gradient);

}  // namespace ksdf::detail
