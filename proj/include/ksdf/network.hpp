#pragma once

#include "ksdf/key_spheres.hpp"

#include <cstdint>
#include <span>
#include <string>
#include <vector>

namespace ksdf {

enum class Branch : std::uint8_t { none = 0, dpfe = 1, lpfe = 2 };
enum class Activation : std::uint8_t { relu = 0, sine = 1 };
/// `direct` is w_ij proportional to d_ij = 2 r_j + |x_i - c_j| (far spheres weigh
/// more). `inverse` (w_ij proportional to 1/d_ij) is an experimental ablation.
enum class Weighting : std::uint8_t { direct = 0, inverse = 1 };

std::string to_string(Branch b);
std::string to_string(Activation a);
std::string to_string(Weighting w);
Branch parse_branch(const std::string& s);
Activation parse_activation(const std::string& s);

inline constexpr int kFeatureDim = 29;

struct NetConfig {
  Branch branch = Branch::dpfe;
  int spheres = 128;  // M
  int layers = 6;     // K hidden layers
  int hidden = 32;    // Q units per hidden layer
  Activation activation = Activation::relu;
  Weighting weighting = Weighting::direct;

  static constexpr int feature_dim = kFeatureDim;
  int trunk_input_dim() const { return branch == Branch::none ? 3 : 3 + kFeatureDim; }
  /// Throws InvalidArgument for K, Q < 1, M < 1 with a sphere branch, or M != 0 without one.
  void validate() const;
  bool operator==(const NetConfig&) const = default;
};

/// Scalars stored in an artifact: 4 per key sphere plus every trainable weight.
std::size_t count_parameters(const NetConfig& config);
/// Trainable scalars only (size of Weights and of the gradient).
std::size_t count_trainable(const NetConfig& config);

/// Offsets of each block inside the flat weight vector. Order is the on-disk
/// order: feature block (DPFE lift 29x4 row-major then 29 bias, or LPFE M x 29
/// latent table then 29 bias), then each trunk layer as weights (out x in,
/// row-major) followed by its bias.
struct WeightLayout {
  std::size_t feature_weights = 0;
  std::size_t feature_bias = 0;
  std::size_t feature_end = 0;
  struct Layer {
    int in = 0;
    int out = 0;
    std::size_t weights = 0;
    std::size_t bias = 0;
  };
  std::vector<Layer> layers;  // K hidden layers followed by the output layer
  std::size_t total = 0;
};
WeightLayout weight_layout(const NetConfig& config);

/// Trainable parameters, stored in 64-bit; artifacts hold them as f32.
struct Weights {
  std::vector<double> values;
  std::size_t size() const { return values.size(); }
  bool all_finite() const;
  /// Rounds every value to the nearest f32.
  void round_to_f32();
};

/// Fan-in scaled uniform initialization, U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
Weights init_weights(const NetConfig& config, std::uint64_t seed);

/// Per-sphere weights w_ij for one query point; they sum to 1.
std::vector<double> point_feature_weights(const Vec3& x, const KeySphereSet& spheres,
                                          Weighting weighting = Weighting::direct);
void point_feature_weights(const Vec3& x, const KeySphereSet& spheres, Weighting weighting, std::span<double> out);

/// Network prediction at one point.
double forward(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres, const Vec3& x);

/// Batched prediction (chunked, parallel). Equal to pointwise forward within rounding.
void forward_batch(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres,
                   std::span<const Vec3> points, std::span<double> out);

struct LossAndGradient {
  double loss = 0.0;
  std::vector<double> gradient;  // same layout as Weights
};

/// Mean absolute error over the batch and its (sub)gradient. The L1
/// subgradient at a zero residual is 0.
LossAndGradient loss_and_gradients(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres,
                                   std::span<const Vec3> points, std::span<const double> targets);

/// Throws DimensionMismatch when the weights or spheres do not match the config.
void check_dimensions(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres);

}  // namespace ksdf
