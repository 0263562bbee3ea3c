#include "ksdf/network.hpp"

#include "network_engine.hpp"

#include "ksdf/error.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/rng.hpp"

#include <cmath>

namespace ksdf {

std::string to_string(Branch b) {
  switch (b) {
    case Branch::none: return "none";
    case Branch::dpfe: return "dpfe";
    case Branch::lpfe: return "lpfe";
  }
  return "?";
}

std::string to_string(Activation a) { return a == Activation::relu ? "relu" : "sine"; }
std::string to_string(Weighting w) { return w == Weighting::direct ? "direct" : "inverse"; }

Branch parse_branch(const std::string& s) {
  if (s == "none" || s == "NONE") return Branch::none;
  if (s == "dpfe" || s == "DPFE") return Branch::dpfe;
  if (s == "lpfe" || s == "LPFE") return Branch::lpfe;
  throw Error(ErrorCode::InvalidArgument, "unknown branch '" + s + "' (expected dpfe, lpfe or none)");
}

Activation parse_activation(const std::string& s) {
  if (s == "relu") return Activation::relu;
  if (s == "sine") return Activation::sine;
  throw Error(ErrorCode::InvalidArgument, "unknown activation '" + s + "' (expected relu or sine)");
}

void NetConfig::validate() const {
  if (layers < 1) throw Error(ErrorCode::InvalidArgument, "K (layers) must be >= 1");
  if (hidden < 1) throw Error(ErrorCode::InvalidArgument, "Q (hidden) must be >= 1");
  if (branch == Branch::none && spheres != 0) throw Error(ErrorCode::InvalidArgument, "branch none requires M = 0");
  if (branch != Branch::none && spheres < 1) throw Error(ErrorCode::InvalidArgument, "M must be >= 1 for dpfe/lpfe");
}

WeightLayout weight_layout(const NetConfig& config) {
  config.validate();
  WeightLayout layout;
  std::size_t off = 0;
  switch (config.branch) {
    case Branch::none: break;
    case Branch::dpfe:
      layout.feature_weights = off;
      off += 4 * kFeatureDim;
      layout.feature_bias = off;
      off += kFeatureDim;
      break;
    case Branch::lpfe:
      layout.feature_weights = off;
      off += static_cast<std::size_t>(config.spheres) * kFeatureDim;
      layout.feature_bias = off;
      off += kFeatureDim;
      break;
  }
  layout.feature_end = off;
  int in = config.trunk_input_dim();
  for (int l = 0; l <= config.layers; ++l) {
    WeightLayout::Layer layer;
    layer.in = in;
    layer.out = l == config.layers ? 1 : config.hidden;
    layer.weights = off;
    off += static_cast<std::size_t>(layer.in) * layer.out;
    layer.bias = off;
    off += layer.out;
    layout.layers.push_back(layer);
    in = layer.out;
  }
  layout.total = off;
  return layout;
}

std::size_t count_trainable(const NetConfig& config) { return weight_layout(config).total; }

std::size_t count_parameters(const NetConfig& config) {
  return 4 * static_cast<std::size_t>(config.branch == Branch::none ? 0 : config.spheres) + count_trainable(config);
}

bool Weights::all_finite() const {
  for (double v : values)
    if (!std::isfinite(v)) return false;
  return true;
}

void Weights::round_to_f32() {
  for (double& v : values) v = static_cast<float>(v);
}

Weights init_weights(const NetConfig& config, std::uint64_t seed) {
  const WeightLayout layout = weight_layout(config);
  Weights w;
  w.values.assign(layout.total, 0.0);
  Rng rng(stream_seed(seed, 0x1417));
  auto fill = [&](std::size_t from, std::size_t count, int fan_in) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t i = from; i < from + count; ++i) w.values[i] = rng.uniform(-bound, bound);
  };
  if (config.branch == Branch::dpfe) {
    fill(layout.feature_weights, 4 * kFeatureDim, 4);
    fill(layout.feature_bias, kFeatureDim, 4);
  } else if (config.branch == Branch::lpfe) {
    fill(layout.feature_weights, static_cast<std::size_t>(config.spheres) * kFeatureDim, kFeatureDim);
    fill(layout.feature_bias, kFeatureDim, kFeatureDim);
  }
  for (const auto& layer : layout.layers) {
    fill(layer.weights, static_cast<std::size_t>(layer.in) * layer.out, layer.in);
    fill(layer.bias, layer.out, layer.in);
  }
  return w;
}

void point_feature_weights(const Vec3& x, const KeySphereSet& spheres, Weighting weighting, std::span<double> out) {
  const std::size_t m = spheres.size();
  if (out.size() != m) throw Error(ErrorCode::DimensionMismatch, "weight buffer size differs from sphere count");
  if (m == 0) return;
  double sum = 0.0;
  std::size_t zeros = 0;
  for (std::size_t j = 0; j < m; ++j) {
    const auto& s = spheres.spheres[j];
    const double d = 2.0 * s.radius + (x - s.center).norm();
    out[j] = d;
    if (d == 0.0) ++zeros;
  }
  if (weighting == Weighting::direct) {
    for (std::size_t j = 0; j < m; ++j) sum += out[j];
    if (!(sum > 0.0)) {
      for (auto& v : out) v = 1.0 / static_cast<double>(m);
      return;
    }
    for (auto& v : out) v /= sum;
    return;
  }
  if (zeros > 0) {
    // the limit of 1/d as d -> 0 concentrates all weight on coincident spheres
    for (auto& v : out) v = v == 0.0 ? 1.0 / static_cast<double>(zeros) : 0.0;
    return;
  }
  for (auto& v : out) {
    v = 1.0 / v;
    sum += v;
  }
  for (auto& v : out) v /= sum;
}

std::vector<double> point_feature_weights(const Vec3& x, const KeySphereSet& spheres, Weighting weighting) {
  std::vector<double> w(spheres.size());
  point_feature_weights(x, spheres, weighting, w);
  return w;
}

void check_dimensions(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres) {
  config.validate();
  if (weights.size() != count_trainable(config)) {
    throw Error(ErrorCode::DimensionMismatch, "weights hold " + std::to_string(weights.size()) + " scalars, config needs " +
                                                  std::to_string(count_trainable(config)));
  }
  const std::size_t m = config.branch == Branch::none ? 0 : static_cast<std::size_t>(config.spheres);
  if (config.branch != Branch::none && spheres.size() != m) {
    throw Error(ErrorCode::DimensionMismatch, "config expects " + std::to_string(m) + " spheres, got " +
                                                  std::to_string(spheres.size()));
  }
}

namespace detail {

void compute_sphere_inputs(const NetConfig& config, const KeySphereSet& spheres, const Mat& xyz, SphereInputs& inputs) {
  if (config.branch == Branch::none) return;
  const Eigen::Index n = xyz.cols();
  const std::size_t m = spheres.size();
  inputs.weights.resize(static_cast<Eigen::Index>(m), n);
  for (Eigen::Index i = 0; i < n; ++i) {
    point_feature_weights(xyz.col(i), spheres, config.weighting, std::span<double>(inputs.weights.col(i).data(), m));
  }
}

namespace {

template <typename Derived>
void activate(const NetConfig& config, const Eigen::MatrixBase<Derived>& z, Mat& out) {
  if (config.activation == Activation::relu) out = z.cwiseMax(0.0);
  else out = z.array().sin().matrix();
}

// Multiplies `grad` by the activation derivative at `pre`.
void activation_backward(const NetConfig& config, const Mat& pre, Mat& grad) {
  if (config.activation == Activation::relu) grad.array() *= (pre.array() > 0.0).cast<double>();
  else grad.array() *= pre.array().cos();
}

}  // namespace

void build_feature_table(const NetConfig& config, const WeightLayout& layout, const double* weights,
                         const KeySphereSet& spheres, FeatureTable& table) {
  if (config.branch == Branch::lpfe) {
    // the row-major M x 29 latent table is a column-major 29 x M matrix
    table.z = Eigen::Map<const Mat>(weights + layout.feature_weights, kFeatureDim, config.spheres);
    return;
  }
  if (config.branch != Branch::dpfe) return;
  const Eigen::Index m = config.spheres;
  table.spheres.resize(4, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    const auto& s = spheres.spheres[static_cast<std::size_t>(j)];
    table.spheres.col(j) << s.center.x(), s.center.y(), s.center.z(), s.radius;
  }
  const ConstRowMap lift(weights + layout.feature_weights, kFeatureDim, 4);
  const ConstVecMap bias(weights + layout.feature_bias, kFeatureDim);
  table.pre.noalias() = lift * table.spheres;
  table.pre.colwise() += bias;
  activate(config, table.pre, table.z);
}

void forward_chunk(const NetConfig& config, const WeightLayout& layout, const double* weights, const Mat& xyz,
                   const SphereInputs& inputs, const FeatureTable& table, Workspace& ws) {
  const Eigen::Index n = xyz.cols();
  const int k_layers = config.layers;
  ws.pre.resize(k_layers);
  ws.act.resize(k_layers + 1);

  Mat& input = ws.act[0];
  input.resize(config.trunk_input_dim(), n);
  input.topRows(3) = xyz;
  if (config.branch != Branch::none) {
    input.bottomRows(kFeatureDim).noalias() = table.z * inputs.weights;
    if (config.branch == Branch::lpfe) {
      input.bottomRows(kFeatureDim).colwise() += ConstVecMap(weights + layout.feature_bias, kFeatureDim);
    }
  }

  for (int l = 0; l < k_layers; ++l) {
    const auto& layer = layout.layers[l];
    const ConstRowMap w(weights + layer.weights, layer.out, layer.in);
    const ConstVecMap b(weights + layer.bias, layer.out);
    Mat& z = ws.pre[l];
    z.noalias() = w * ws.act[l];
    z.colwise() += b;
    activate(config, z, ws.act[l + 1]);
  }
  const auto& last = layout.layers[k_layers];
  const ConstRowMap w_out(weights + last.weights, 1, last.in);
  ws.out.noalias() = w_out * ws.act[k_layers];
  ws.out.array() += weights[last.bias];
}

void backward_chunk(const NetConfig& config, const WeightLayout& layout, const double* weights,
                    const SphereInputs& inputs, const FeatureTable& table, const Eigen::RowVectorXd& out_grad,
                    Workspace& ws, double* gradient) {
  const int k_layers = config.layers;
  const auto& last = layout.layers[k_layers];
  {
    RowMap g_w(gradient + last.weights, 1, last.in);
    g_w.noalias() += out_grad * ws.act[k_layers].transpose();
    gradient[last.bias] += out_grad.sum();
    const ConstRowMap w_out(weights + last.weights, 1, last.in);
    ws.grad.noalias() = w_out.transpose() * out_grad;
  }
  for (int l = k_layers - 1; l >= 0; --l) {
    const auto& layer = layout.layers[l];
    activation_backward(config, ws.pre[l], ws.grad);
    RowMap g_w(gradient + layer.weights, layer.out, layer.in);
    g_w.noalias() += ws.grad * ws.act[l].transpose();
    VecMap g_b(gradient + layer.bias, layer.out);
    g_b += ws.grad.rowwise().sum();
    if (l > 0 || config.branch != Branch::none) {
      const ConstRowMap w(weights + layer.weights, layer.out, layer.in);
      ws.grad_next.noalias() = w.transpose() * ws.grad;
      std::swap(ws.grad, ws.grad_next);
    }
  }
  if (config.branch == Branch::none) return;
  // ws.grad is now d(loss)/d(trunk input); its last 29 rows are the feature gradient
  const auto feature_grad = ws.grad.bottomRows(kFeatureDim);
  if (config.branch == Branch::lpfe) {
    Eigen::Map<Mat> g_latent_t(gradient + layout.feature_weights, kFeatureDim, config.spheres);
    g_latent_t.noalias() += feature_grad * inputs.weights.transpose();
    VecMap(gradient + layout.feature_bias, kFeatureDim) += feature_grad.rowwise().sum();
    return;
  }
  Mat dz = feature_grad * inputs.weights.transpose();
  activation_backward(config, table.pre, dz);
  RowMap g_lift(gradient + layout.feature_weights, kFeatureDim, 4);
  g_lift.noalias() += dz * table.spheres.transpose();
  VecMap(gradient + layout.feature_bias, kFeatureDim) += dz.rowwise().sum();
}

}  // namespace detail

namespace {

detail::Mat positions_matrix(std::span<const Vec3> points, std::size_t from, std::size_t to) {
  detail::Mat xyz(3, static_cast<Eigen::Index>(to - from));
  for (std::size_t i = from; i < to; ++i) xyz.col(static_cast<Eigen::Index>(i - from)) = points[i];
  return xyz;
}

}  // namespace

void forward_batch(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres,
                   std::span<const Vec3> points, std::span<double> out) {
  check_dimensions(config, weights, spheres);
  if (points.size() != out.size()) throw Error(ErrorCode::DimensionMismatch, "points/output size mismatch");
  const WeightLayout layout = weight_layout(config);
  const Eigen::VectorXd w = detail::aligned_copy(weights.values);
  detail::FeatureTable table;
  detail::build_feature_table(config, layout, w.data(), spheres, table);
  const std::size_t n = points.size();
  parallel_for_chunks(chunk_count(n, detail::kChunk), [&](std::size_t c) {
    thread_local detail::Workspace ws;
    thread_local detail::SphereInputs inputs;
    const std::size_t from = c * detail::kChunk;
    const std::size_t to = std::min(n, from + detail::kChunk);
    const detail::Mat xyz = positions_matrix(points, from, to);
    detail::compute_sphere_inputs(config, spheres, xyz, inputs);
    detail::forward_chunk(config, layout, w.data(), xyz, inputs, table, ws);
    for (std::size_t i = from; i < to; ++i) out[i] = ws.out[static_cast<Eigen::Index>(i - from)];
  });
}

double forward(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres, const Vec3& x) {
  double out = 0.0;
  forward_batch(config, weights, spheres, std::span<const Vec3>(&x, 1), std::span<double>(&out, 1));
  return out;
}

LossAndGradient loss_and_gradients(const NetConfig& config, const Weights& weights, const KeySphereSet& spheres,
                                   std::span<const Vec3> points, std::span<const double> targets) {
  check_dimensions(config, weights, spheres);
  if (points.empty()) throw Error(ErrorCode::InvalidArgument, "empty batch");
  if (points.size() != targets.size()) throw Error(ErrorCode::DimensionMismatch, "points/targets size mismatch");
  const WeightLayout layout = weight_layout(config);
  const Eigen::VectorXd w = detail::aligned_copy(weights.values);
  detail::FeatureTable table;
  detail::build_feature_table(config, layout, w.data(), spheres, table);
  const std::size_t n = points.size();
  const std::size_t chunks = chunk_count(n, detail::kChunk);
  std::vector<Eigen::VectorXd> grads(chunks, Eigen::VectorXd::Zero(static_cast<Eigen::Index>(layout.total)));
  std::vector<double> losses(chunks, 0.0);
  const double inv_n = 1.0 / static_cast<double>(n);
  parallel_for_chunks(chunks, [&](std::size_t c) {
    detail::Workspace ws;
    detail::SphereInputs inputs;
    const std::size_t from = c * detail::kChunk;
    const std::size_t to = std::min(n, from + detail::kChunk);
    const detail::Mat xyz = positions_matrix(points, from, to);
    detail::compute_sphere_inputs(config, spheres, xyz, inputs);
    detail::forward_chunk(config, layout, w.data(), xyz, inputs, table, ws);
    Eigen::RowVectorXd g(ws.out.size());
    double loss = 0.0;
    for (Eigen::Index i = 0; i < ws.out.size(); ++i) {
      const double r = ws.out[i] - targets[from + static_cast<std::size_t>(i)];
      loss += std::abs(r);
      g[i] = r > 0.0 ? inv_n : (r < 0.0 ? -inv_n : 0.0);
    }
    losses[c] = loss;
    detail::backward_chunk(config, layout, w.data(), inputs, table, g, ws, grads[c].data());
  });
  LossAndGradient result;
  result.gradient.assign(layout.total, 0.0);
  for (std::size_t c = 0; c < chunks; ++c) {
    result.loss += losses[c];
    for (std::size_t k = 0; k < layout.total; ++k) result.gradient[k] += grads[c][static_cast<Eigen::Index>(k)];
  }
  result.loss *= inv_n;
  return result;
}

}  // namespace ksdf
