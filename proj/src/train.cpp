#include "ksdf/train.hpp"

#include "network_engine.hpp"

#include "ksdf/log.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/rng.hpp"

#include <cmath>
#include <numbers>
#include <numeric>

namespace ksdf {

std::string to_string(LrSchedule s) {
  switch (s) {
    case LrSchedule::constant: return "constant";
    case LrSchedule::cosine: return "cosine";
    case LrSchedule::step: return "step";
  }
  return "?";
}

LrSchedule parse_schedule(const std::string& s) {
  if (s == "constant") return LrSchedule::constant;
  if (s == "cosine") return LrSchedule::cosine;
  if (s == "step") return LrSchedule::step;
  throw Error(ErrorCode::InvalidArgument, "unknown lr schedule '" + s + "'");
}

void TrainConfig::validate() const {
  if (epochs < 0) throw Error(ErrorCode::InvalidArgument, "epochs must be >= 0");
  if (batch_size < 1) throw Error(ErrorCode::InvalidArgument, "batch size must be >= 1");
  if (!(learning_rate > 0.0)) throw Error(ErrorCode::InvalidArgument, "learning rate must be positive");
  if (!(beta1 > 0.0 && beta1 < 1.0 && beta2 > 0.0 && beta2 < 1.0 && epsilon > 0.0)) {
    throw Error(ErrorCode::InvalidArgument, "Adam constants out of range");
  }
  if (!(final_lr_fraction > 0.0 && final_lr_fraction <= 1.0)) {
    throw Error(ErrorCode::InvalidArgument, "final lr fraction must be in (0, 1]");
  }
}

double TrainConfig::learning_rate_at(int epoch) const {
  if (epochs <= 1) return learning_rate;
  const double progress = static_cast<double>(epoch) / (epochs - 1);
  switch (schedule) {
    case LrSchedule::constant: return learning_rate;
    case LrSchedule::cosine: {
      const double lo = learning_rate * final_lr_fraction;
      return lo + 0.5 * (learning_rate - lo) * (1.0 + std::cos(std::numbers::pi * progress));
    }
    case LrSchedule::step: {
      const int drops = std::min(3, static_cast<int>(4.0 * epoch / epochs));
      return learning_rate * std::pow(final_lr_fraction, drops / 3.0);
    }
  }
  return learning_rate;
}

TrainResult train(const NetConfig& config, const KeySphereSet& spheres, const SampleSet& data, const TrainConfig& tc,
                  const EpochCallback& on_epoch) {
  return train_from(config, spheres, data, tc, init_weights(config, tc.seed), on_epoch);
}

TrainResult train_from(const NetConfig& config, const KeySphereSet& spheres, const SampleSet& data,
                       const TrainConfig& tc, Weights initial, const EpochCallback& on_epoch) {
  tc.validate();
  check_dimensions(config, initial, spheres);
  if (data.size() == 0) throw Error(ErrorCode::InvalidArgument, "training set is empty");

  TrainResult result;
  result.weights = std::move(initial);
  if (tc.epochs == 0) return result;

  const WeightLayout layout = weight_layout(config);
  const std::size_t n = data.size();
  const std::size_t p = layout.total;

  detail::Mat positions(3, static_cast<Eigen::Index>(n));
  std::vector<double> targets(n);
  for (std::size_t i = 0; i < n; ++i) {
    positions.col(static_cast<Eigen::Index>(i)) = data.position(i);
    targets[i] = data.samples[i].value;
  }
  std::vector<double> m(p, 0.0), v(p, 0.0);
  const std::size_t batch = std::min(tc.batch_size, n);
  const std::size_t max_chunks = chunk_count(batch, detail::kChunk);
  std::vector<Eigen::VectorXd> chunk_grads(max_chunks, Eigen::VectorXd(static_cast<Eigen::Index>(p)));
  Eigen::VectorXd aligned_w(static_cast<Eigen::Index>(p));
  std::vector<double> chunk_loss(max_chunks);
  std::vector<double> grad(p);
  std::vector<std::size_t> order(n);
  std::uint64_t step = 0;
  std::vector<double> previous(p);
  detail::FeatureTable table;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), std::size_t{0});
    Rng shuffle(stream_seed(tc.seed, 0x5f1e, static_cast<std::uint64_t>(epoch)));
    for (std::size_t i = n - 1; i > 0; --i) std::swap(order[i], order[shuffle.below(i + 1)]);

    const double lr = tc.learning_rate_at(epoch);
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t bsize = std::min(batch, n - start);
      const std::size_t chunks = chunk_count(bsize, detail::kChunk);
      const double inv_b = 1.0 / static_cast<double>(bsize);
      std::copy(result.weights.values.begin(), result.weights.values.end(), aligned_w.data());
      const double* w = aligned_w.data();
      detail::build_feature_table(config, layout, w, spheres, table);
      parallel_for_chunks(chunks, [&](std::size_t c) {
        thread_local detail::Workspace ws;
        thread_local detail::SphereInputs inputs;
        thread_local detail::Mat xyz;
        thread_local Eigen::RowVectorXd g;
        const std::size_t from = start + c * detail::kChunk;
        const std::size_t to = std::min(start + bsize, from + detail::kChunk);
        const Eigen::Index len = static_cast<Eigen::Index>(to - from);
        xyz.resize(3, len);
        for (Eigen::Index i = 0; i < len; ++i) {
          xyz.col(i) = positions.col(static_cast<Eigen::Index>(order[from + static_cast<std::size_t>(i)]));
        }
        detail::compute_sphere_inputs(config, spheres, xyz, inputs);
        detail::forward_chunk(config, layout, w, xyz, inputs, table, ws);
        g.resize(len);
        double loss = 0.0;
        for (Eigen::Index i = 0; i < len; ++i) {
          const double r = ws.out[i] - targets[order[from + static_cast<std::size_t>(i)]];
          loss += std::abs(r);
          g[i] = r > 0.0 ? inv_b : (r < 0.0 ? -inv_b : 0.0);
        }
        chunk_loss[c] = loss;
        chunk_grads[c].setZero();
        detail::backward_chunk(config, layout, w, inputs, table, g, ws, chunk_grads[c].data());
      });

      double batch_loss = 0.0;
      std::fill(grad.begin(), grad.end(), 0.0);
      for (std::size_t c = 0; c < chunks; ++c) {
        batch_loss += chunk_loss[c];
        const double* cg = chunk_grads[c].data();
        for (std::size_t k = 0; k < p; ++k) grad[k] += cg[k];
      }
      if (!std::isfinite(batch_loss)) {
        throw DivergedError("loss became non-finite at epoch " + std::to_string(epoch), result.weights);
      }
      epoch_loss += batch_loss;

      ++step;
      const double bc1 = 1.0 - std::pow(tc.beta1, static_cast<double>(step));
      const double bc2 = 1.0 - std::pow(tc.beta2, static_cast<double>(step));
      const double step_size = lr / bc1;
      double* wm = result.weights.values.data();
      std::copy(wm, wm + p, previous.begin());
      for (std::size_t k = 0; k < p; ++k) {
        m[k] = tc.beta1 * m[k] + (1.0 - tc.beta1) * grad[k];
        v[k] = tc.beta2 * v[k] + (1.0 - tc.beta2) * grad[k] * grad[k];
        wm[k] -= step_size * m[k] / (std::sqrt(v[k] / bc2) + tc.epsilon);
      }
      if (!result.weights.all_finite()) {
        Weights before;
        before.values = previous;
        throw DivergedError("weights became non-finite at epoch " + std::to_string(epoch), std::move(before));
      }
    }
    epoch_loss /= static_cast<double>(n);
    result.history.push_back(epoch_loss);
    if (on_epoch) on_epoch(epoch, epoch_loss);
    log::debug("epoch ", epoch + 1, "/", tc.epochs, " loss ", epoch_loss, " lr ", lr);
  }
  return result;
}

}  // namespace ksdf
