#pragma once

#include "ksdf/error.hpp"
#include "ksdf/network.hpp"
#include "ksdf/sdf.hpp"

#include <cstdint>
#include <functional>
#include <vector>

namespace ksdf {

enum class LrSchedule { constant, cosine, step };

struct TrainConfig {
  int epochs = 100;
  std::size_t batch_size = 4096;
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  LrSchedule schedule = LrSchedule::cosine;
  /// cosine: final lr = learning_rate * final_lr_fraction.
  /// step: lr is multiplied by final_lr_fraction^(1/3) at 1/4, 2/4 and 3/4 of training.
  double final_lr_fraction = 0.05;
  std::uint64_t seed = 0;

  void validate() const;
  double learning_rate_at(int epoch) const;
};

std::string to_string(LrSchedule s);
LrSchedule parse_schedule(const std::string& s);

struct TrainResult {
  Weights weights;
  std::vector<double> history;  // mean L1 loss per epoch
};

/// Raised when a batch loss becomes NaN/Inf. Carries the weights from before
/// the offending step.
class DivergedError : public Error {
 public:
  DivergedError(const std::string& message, Weights last_good)
      : Error(ErrorCode::DivergedError, message), last_good_(std::move(last_good)) {}
  const Weights& last_good() const { return last_good_; }

 private:
  Weights last_good_;
};

using EpochCallback = std::function<void(int epoch, double loss)>;

/// Adam on the mean L1 loss, starting from init_weights(config, train.seed).
/// Deterministic in the seed and independent of the worker count.
TrainResult train(const NetConfig& config, const KeySphereSet& spheres, const SampleSet& data,
                  const TrainConfig& train, const EpochCallback& on_epoch = {});

/// Same, from explicit initial weights.
TrainResult train_from(const NetConfig& config, const KeySphereSet& spheres, const SampleSet& data,
                       const TrainConfig& train, Weights initial, const EpochCallback& on_epoch = {});

}  // namespace ksdf
