#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "facestyle/diffusion.hpp"
#include "test_util.hpp"

using namespace facestyle;

namespace {

ConditionVector dummy_condition(int frames) {
  return assemble_condition(Eigen::VectorXd::Ones(2), Eigen::VectorXd::Ones(2),
                            Eigen::MatrixXd::Zero(frames, 2));
}

Eigen::MatrixXd random_matrix(int rows, int cols, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::MatrixXd m(rows, cols);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Returns the same clean sequence whatever the input.
DenoiseFn oracle(const Eigen::MatrixXd& clean) {
  return [clean](const ad::Var&, const ConditionVector&, int) {
    ad::RowMatrix rm = clean;
    return ad::Var::constant(Eigen::Map<ad::Array>(rm.data(), rm.size()),
                             {static_cast<int>(clean.rows()), static_cast<int>(clean.cols())});
  };
}

}  // namespace

TEST(Schedule, LinearMatchesCumulativeProduct) {
  const int T = 1000;
  const NoiseSchedule s = make_schedule(T, ScheduleKind::kLinear);
  double prod = 1.0;
  for (int t = 1; t <= T; ++t) {
    const double beta = 1e-4 + (2e-2 - 1e-4) * (t - 1) / (T - 1);
    prod *= 1.0 - beta;
    ASSERT_NEAR(s.alpha_bar(t), prod, 1e-12) << t;
  }
  EXPECT_EQ(s.alpha_bar(0), 1.0);
}

TEST(Schedule, CosineFollowsSquaredCosine) {
  const int T = 100;
  const NoiseSchedule s = make_schedule(T, ScheduleKind::kCosine);
  auto f = [&](int t) {
    const double x = (static_cast<double>(t) / T + 0.008) / 1.008 * std::numbers::pi / 2;
    return std::cos(x) * std::cos(x);
  };
  for (int t = 1; t < T; ++t) EXPECT_NEAR(s.alpha_bar(t), f(t) / f(0), 1e-9) << t;
  // The final beta is capped at 0.999.
  EXPECT_NEAR(s.alpha_bar(T), s.alpha_bar(T - 1) * 0.001, 1e-15);
}

TEST(Schedule, AlphaBarStrictlyDecreasing) {
  for (auto kind : {ScheduleKind::kLinear, ScheduleKind::kCosine}) {
    const NoiseSchedule s = make_schedule(200, kind);
    for (int t = 1; t <= 200; ++t) EXPECT_LT(s.alpha_bar(t), s.alpha_bar(t - 1));
  }
}

TEST(Schedule, RejectsBadInput) {
  EXPECT_THROW(make_schedule(0, ScheduleKind::kLinear), ConfigError);
  EXPECT_THROW(NoiseSchedule::from_alphas(Eigen::ArrayXd::Constant(3, 1.5)), ConfigError);
  EXPECT_THROW(make_schedule(10, ScheduleKind::kLinear).alpha_bar(11), IndexError);
}

TEST(Schedule, DescriptorRoundTrip) {
  const NoiseSchedule s = make_schedule(50, ScheduleKind::kCosine);
  const NoiseSchedule r = NoiseSchedule::from_descriptor(s.descriptor());
  EXPECT_TRUE((r.alpha_bars == s.alpha_bars).all());
  Eigen::ArrayXd a(3);
  a << 0.9, 0.8, 0.5;
  const NoiseSchedule c = NoiseSchedule::from_descriptor(NoiseSchedule::from_alphas(a).descriptor());
  EXPECT_DOUBLE_EQ(c.alpha_bar(3), 0.9 * 0.8 * 0.5);
}

TEST(QSample, ClosedForm) {
  const NoiseSchedule s = make_schedule(10, ScheduleKind::kLinear);
  const Eigen::MatrixXd x0 = random_matrix(4, 3, 1), eps = random_matrix(4, 3, 2);
  for (int t : {1, 5, 10}) {
    const double ab = s.alpha_bar(t);
    EXPECT_TRUE(q_sample(x0, t, s, eps).isApprox(std::sqrt(ab) * x0 + std::sqrt(1 - ab) * eps, 1e-14));
  }
}

TEST(QSample, Errors) {
  const NoiseSchedule s = make_schedule(10, ScheduleKind::kLinear);
  const Eigen::MatrixXd x0 = random_matrix(4, 3, 1);
  EXPECT_THROW(q_sample(x0, 0, s, x0), IndexError);
  EXPECT_THROW(q_sample(x0, 11, s, x0), IndexError);
  EXPECT_THROW(q_sample(x0, 1, s, random_matrix(3, 3, 1)), ShapeError);
}

TEST(QSample, NoiseOnlyVariance) {
  const NoiseSchedule s = make_schedule(100, ScheduleKind::kLinear);
  const Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2000, 1);
  const Eigen::MatrixXd out = q_sample(zero, 50, s, random_matrix(2000, 1, 3));
  const double sd = std::sqrt(out.array().square().mean());
  EXPECT_NEAR(sd / std::sqrt(1 - s.alpha_bar(50)), 1.0, 0.05);
}

TEST(DDIM, Timesteps) {
  EXPECT_EQ(ddim_timesteps(1000, 5), (std::vector<int>{1000, 800, 600, 400, 200}));
  EXPECT_EQ(ddim_timesteps(10, 1), (std::vector<int>{10}));
  EXPECT_EQ(ddim_timesteps(7, 3), (std::vector<int>{7, 5, 2}));
  const auto all = ddim_timesteps(20, 20);
  for (int i = 0; i < 20; ++i) EXPECT_EQ(all[i], 20 - i);
  EXPECT_THROW(ddim_timesteps(10, 0), ConfigError);
  EXPECT_THROW(ddim_timesteps(10, 11), ConfigError);
}

TEST(DDIM, OracleReturnsClean) {
  const NoiseSchedule s = make_schedule(100, ScheduleKind::kLinear);
  const Eigen::MatrixXd x0 = random_matrix(6, 4, 5);
  for (int steps : {1, 3, 100}) {
    const Eigen::MatrixXd out = ddim_sample(oracle(x0), dummy_condition(6), s, steps, 11, 6, 4);
    EXPECT_LT((out - x0).cwiseAbs().maxCoeff(), 1e-12) << steps;
  }
}

TEST(DDIM, CallsAndDeterminism) {
  const NoiseSchedule s = make_schedule(100, ScheduleKind::kLinear);
  int calls = 0;
  std::vector<int> seen;
  const DenoiseFn fn = [&](const ad::Var& x, const ConditionVector&, int t) {
    ++calls;
    seen.push_back(t);
    return ad::scale(x, 0.5);
  };
  const auto a = ddim_sample(fn, dummy_condition(3), s, 5, 42, 3, 2);
  EXPECT_EQ(calls, 5);
  EXPECT_EQ(seen, ddim_timesteps(100, 5));
  const auto b = ddim_sample(fn, dummy_condition(3), s, 5, 42, 3, 2);
  EXPECT_TRUE(a == b);
  const auto c = ddim_sample(fn, dummy_condition(3), s, 5, 43, 3, 2);
  EXPECT_FALSE(a == c);
}

TEST(DDIM, NonFiniteDenoiserRaises) {
  const NoiseSchedule s = make_schedule(10, ScheduleKind::kLinear);
  const DenoiseFn bad = [](const ad::Var& x, const ConditionVector&, int) {
    return ad::Var::constant(ad::Array::Constant(x.size(), std::nan("")), x.shape());
  };
  EXPECT_THROW(ddim_sample(bad, dummy_condition(2), s, 2, 1, 2, 2), NumericError);
}

TEST(TrainingLoss, OracleIsZeroAndZeroPredictorIsMeanSquare) {
  const NoiseSchedule s = make_schedule(20, ScheduleKind::kLinear);
  DiffusionBatch batch;
  for (int b = 0; b < 3; ++b) {
    batch.clean.push_back(random_matrix(4, 2, 10 + b));
    batch.noise.push_back(random_matrix(4, 2, 20 + b));
    batch.t.push_back(1 + 6 * b);
  }
  const std::vector<ConditionVector> conds(3, dummy_condition(4));
  const DenoiseFn zero = [](const ad::Var& x, const ConditionVector&, int) {
    return ad::scale(x, 0.0);
  };
  double expected = 0;
  for (const auto& c : batch.clean) expected += c.array().square().sum();
  expected /= 3 * 4 * 2;
  EXPECT_NEAR(training_loss(zero, batch, conds, s).item(), expected, 1e-14);

  int b = 0;
  const DenoiseFn per_item = [&](const ad::Var&, const ConditionVector&, int) {
    return oracle(batch.clean[b++])(ad::Var(), conds[0], 0);
  };
  EXPECT_EQ(training_loss(per_item, batch, conds, s).item(), 0.0);
}

TEST(TrainingLoss, ValidatesBatch) {
  const NoiseSchedule s = make_schedule(20, ScheduleKind::kLinear);
  DiffusionBatch batch;
  batch.clean = {random_matrix(4, 2, 1)};
  batch.noise = {random_matrix(4, 3, 2)};
  batch.t = {1};
  const DenoiseFn id = [](const ad::Var& x, const ConditionVector&, int) { return x; };
  EXPECT_THROW(training_loss(id, batch, {dummy_condition(4)}, s), ShapeError);
  batch.noise = {random_matrix(4, 2, 2)};
  batch.t = {21};
  EXPECT_THROW(training_loss(id, batch, {dummy_condition(4)}, s), IndexError);
  batch.t = {1};
  EXPECT_THROW(training_loss(id, batch, {}, s), ShapeError);
}

TEST(Schedule, SingleStepAndLongTail) {
  const NoiseSchedule one = make_schedule(1, ScheduleKind::kLinear);
  ASSERT_EQ(one.steps(), 1);
  EXPECT_NEAR(one.alphas(0), 1.0 - 1e-4, 1e-15);
  EXPECT_EQ(one.alpha_bar(1), one.alphas(0));
  EXPECT_LT(make_schedule(1000, ScheduleKind::kLinear).alpha_bar(1000), 1e-3);
}

TEST(QSample, HandBuiltSchedules) {
  const NoiseSchedule still = NoiseSchedule::from_alphas(Eigen::ArrayXd::Ones(3));
  const Eigen::MatrixXd x0 = random_matrix(3, 2, 1), eps = random_matrix(3, 2, 2);
  for (int t = 1; t <= 3; ++t) EXPECT_TRUE(q_sample(x0, t, still, eps) == x0) << t;
  Eigen::ArrayXd a(2);
  a << 0.9, 0.8;
  const NoiseSchedule two = NoiseSchedule::from_alphas(a);
  const Eigen::MatrixXd one = Eigen::MatrixXd::Ones(1, 1), e = Eigen::MatrixXd::Constant(1, 1, 0.37);
  EXPECT_NEAR(q_sample(one, 2, two, e)(0, 0), std::sqrt(0.72) + std::sqrt(0.28) * 0.37, 1e-15);
}

TEST(TrainingLoss, UnitOffsetAndScalarLoopOracle) {
  const NoiseSchedule s = make_schedule(20, ScheduleKind::kLinear);
  DiffusionBatch ones;
  for (int b = 0; b < 2; ++b) {
    ones.clean.push_back(Eigen::MatrixXd::Ones(3, 4));
    ones.noise.push_back(random_matrix(3, 4, 40 + b));
    ones.t.push_back(5 + b);
  }
  const std::vector<ConditionVector> conds(2, dummy_condition(3));
  const DenoiseFn zero = [](const ad::Var& x, const ConditionVector&, int) { return ad::scale(x, 0.0); };
  EXPECT_NEAR(training_loss(zero, ones, conds, s).item(), 1.0, 1e-15);

  DiffusionBatch batch;
  for (int b = 0; b < 2; ++b) {
    batch.clean.push_back(random_matrix(3, 4, 50 + b));
    batch.noise.push_back(random_matrix(3, 4, 60 + b));
    batch.t.push_back(2 + 9 * b);
  }
  const DenoiseFn squash = [](const ad::Var& x, const ConditionVector&, int) {
    return ad::scale(ad::tanh(x), 0.5);
  };
  double sum = 0.0;
  for (int b = 0; b < 2; ++b) {
    const double ab = s.alpha_bar(batch.t[b]);
    for (int i = 0; i < 3; ++i)
      for (int j = 0; j < 4; ++j) {
        const double xt = std::sqrt(ab) * batch.clean[b](i, j) + std::sqrt(1 - ab) * batch.noise[b](i, j);
        const double d = 0.5 * std::tanh(xt) - batch.clean[b](i, j);
        sum += d * d;
      }
  }
  EXPECT_NEAR(training_loss(squash, batch, conds, s).item(), sum / 24, 1e-6);
}

TEST(DDIM, ZeroDenoiserGivesZeros) {
  const NoiseSchedule s = make_schedule(50, ScheduleKind::kLinear);
  const DenoiseFn zero = [](const ad::Var& x, const ConditionVector&, int) { return ad::scale(x, 0.0); };
  for (int steps : {1, 5, 50}) {
    EXPECT_EQ(ddim_sample(zero, dummy_condition(4), s, steps, 3, 4, 3).cwiseAbs().maxCoeff(), 0.0) << steps;
  }
}
