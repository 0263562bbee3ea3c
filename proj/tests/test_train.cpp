#include "gradient_check.hpp"
#include "ksdf/parallel.hpp"
#include "ksdf/shapes.hpp"
#include "ksdf/train.hpp"
#include "test_util.hpp"

#include <cmath>

namespace ksdf {
namespace {

struct Fixture {
  NetConfig net;
  KeySphereSet spheres;
  SampleSet data;
  TrainConfig train;
};

Fixture small_problem(Branch branch = Branch::dpfe) {
  Fixture f;
  f.net.branch = branch;
  f.net.spheres = branch == Branch::none ? 0 : 8;
  f.net.layers = 3;
  f.net.hidden = 16;
  const SpatialIndex index(shapes::icosphere(0.7, 3));
  if (branch != Branch::none) {
    f.spheres.spheres = {{Vec3::Zero(), 0.7}};
    for (int j = 1; j < 8; ++j) f.spheres.spheres.push_back({Vec3(0.1 * j - 0.4, 0.0, 0.0), 0.3});
  }
  f.data = sample_training_set(index, 4000, {}, 0.05, 3);
  f.train.epochs = 15;
  f.train.batch_size = 256;
  f.train.learning_rate = 3e-3;
  f.train.seed = 11;
  return f;
}

TEST(TrainConfig, Validation) {
  TrainConfig t;
  EXPECT_NO_THROW(t.validate());
  t.epochs = -1;
  EXPECT_KSDF_ERROR(t.validate(), ErrorCode::InvalidArgument);
  t = TrainConfig{};
  t.batch_size = 0;
  EXPECT_KSDF_ERROR(t.validate(), ErrorCode::InvalidArgument);
  t = TrainConfig{};
  t.learning_rate = 0.0;
  EXPECT_KSDF_ERROR(t.validate(), ErrorCode::InvalidArgument);
  t = TrainConfig{};
  t.final_lr_fraction = 0.0;
  EXPECT_KSDF_ERROR(t.validate(), ErrorCode::InvalidArgument);
  EXPECT_KSDF_ERROR(parse_schedule("linear"), ErrorCode::InvalidArgument);
}

TEST(TrainConfig, Schedules) {
  TrainConfig t;
  t.epochs = 9;
  t.learning_rate = 1e-2;
  t.final_lr_fraction = 0.1;
  EXPECT_DOUBLE_EQ(t.learning_rate_at(0), 1e-2);
  EXPECT_NEAR(t.learning_rate_at(8), 1e-3, 1e-15);
  EXPECT_NEAR(t.learning_rate_at(4), 5.5e-3, 1e-15);
  for (int e = 1; e < 9; ++e) EXPECT_LE(t.learning_rate_at(e), t.learning_rate_at(e - 1));
  t.schedule = LrSchedule::constant;
  EXPECT_DOUBLE_EQ(t.learning_rate_at(8), 1e-2);
  t.schedule = LrSchedule::step;
  t.epochs = 8;
  t.final_lr_fraction = 1e-3;
  EXPECT_DOUBLE_EQ(t.learning_rate_at(1), 1e-2);
  EXPECT_NEAR(t.learning_rate_at(2), 1e-3, 1e-15);
  EXPECT_NEAR(t.learning_rate_at(7), 1e-5, 1e-17);
}

TEST(Train, ZeroEpochsReturnsInitialWeights) {
  Fixture f = small_problem();
  f.train.epochs = 0;
  const TrainResult r = train(f.net, f.spheres, f.data, f.train);
  EXPECT_EQ(r.weights.values, init_weights(f.net, f.train.seed).values);
  EXPECT_TRUE(r.history.empty());
}

TEST(Train, LossDecreasesForEveryBranch) {
  for (Branch b : {Branch::dpfe, Branch::lpfe, Branch::none}) {
    const Fixture f = small_problem(b);
    int calls = 0;
    const TrainResult r = train(f.net, f.spheres, f.data, f.train, [&](int epoch, double) { EXPECT_EQ(epoch, calls++); });
    ASSERT_EQ(r.history.size(), 15u);
    EXPECT_EQ(calls, 15);
    EXPECT_LT(r.history.back(), 0.75 * r.history.front()) << to_string(b);
    EXPECT_TRUE(r.weights.all_finite());
  }
}

TEST(Train, DeterministicAcrossRunsAndThreadCounts) {
  Fixture f = small_problem(Branch::lpfe);
  f.train.batch_size = 1500;  // three chunks per step
  set_thread_count(1);
  const TrainResult a = train(f.net, f.spheres, f.data, f.train);
  const TrainResult b = train(f.net, f.spheres, f.data, f.train);
  set_thread_count(4);
  const TrainResult c = train(f.net, f.spheres, f.data, f.train);
  set_thread_count(0);
  EXPECT_EQ(a.weights.values, b.weights.values);
  EXPECT_EQ(a.weights.values, c.weights.values);
  EXPECT_EQ(a.history, c.history);
}

TEST(Train, SeedChangesResult) {
  Fixture f = small_problem();
  f.train.epochs = 2;
  const TrainResult a = train(f.net, f.spheres, f.data, f.train);
  f.train.seed = 12;
  EXPECT_NE(a.weights.values, train(f.net, f.spheres, f.data, f.train).weights.values);
}

TEST(Train, NonFiniteLossRaisesDivergedWithLastGoodWeights) {
  Fixture f = small_problem();
  f.data.samples[f.data.size() / 2].value = std::numeric_limits<float>::quiet_NaN();
  try {
    train(f.net, f.spheres, f.data, f.train);
    FAIL() << "expected DivergedError";
  } catch (const DivergedError& e) {
    EXPECT_EQ(e.code(), ErrorCode::DivergedError);
    EXPECT_EQ(e.last_good().size(), count_trainable(f.net));
    EXPECT_TRUE(e.last_good().all_finite());
  }
}

TEST(Train, RejectsBadInputs) {
  Fixture f = small_problem();
  EXPECT_KSDF_ERROR(train(f.net, test::random_spheres(3, 1), f.data, f.train), ErrorCode::DimensionMismatch);
  SampleSet empty;
  EXPECT_KSDF_ERROR(train(f.net, f.spheres, empty, f.train), ErrorCode::InvalidArgument);
}

}  // namespace
}  // namespace ksdf
