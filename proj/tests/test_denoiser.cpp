#include <gtest/gtest.h>

#include <cmath>

#include "facestyle/denoiser.hpp"
#include "test_util.hpp"

using namespace facestyle;

namespace {

DenoiserConfig small_config() {
  DenoiserConfig c;
  c.hidden_width = 16;
  c.num_blocks = 2;
  c.time_embed_dim = 8;
  c.sequence_length = 6;
  c.d_exp = 24;
  c.condition_dim = 7;
  return c;
}

ConditionVector condition(int frames, std::uint64_t seed) {
  Rng rng(seed);
  Eigen::VectorXd t(3), i(2);
  Eigen::MatrixXd a(frames, 2);
  for (auto& v : t) v = normal(rng);
  for (auto& v : i) v = normal(rng);
  for (Eigen::Index k = 0; k < a.size(); ++k) a.data()[k] = normal(rng);
  return assemble_condition(t, i, a);
}

ad::Var noisy(const DenoiserConfig& c, std::uint64_t seed) {
  return ad::Var::constant(testutil::random_array(c.sequence_length * c.d_exp, seed),
                           {c.sequence_length, c.d_exp});
}

}  // namespace

TEST(Denoiser, ParameterCountFormula) {
  const DenoiserConfig c = small_config();
  const Denoiser d(c, 1);
  const std::int64_t in = c.d_exp + c.time_embed_dim + c.condition_dim;
  const std::int64_t W = c.hidden_width, N = c.sequence_length;
  const std::int64_t block = 2 * (W * W + W) + N * N + N * W;
  const std::int64_t expected = in * W + W + c.num_blocks * block + W * c.d_exp + c.d_exp;
  EXPECT_EQ(d.params().count(), expected);
  EXPECT_EQ(Denoiser::parameter_count(c), expected);
  EXPECT_EQ(Denoiser::block_parameter_count(c), block);
}

TEST(Denoiser, ZeroInitOutputPredictsZero) {
  const DenoiserConfig c = small_config();
  const Denoiser d(c, 3);
  const ad::Var out = d.forward(noisy(c, 2), condition(c.sequence_length, 4), 17);
  EXPECT_EQ(out.shape(), (ad::Shape{c.sequence_length, c.d_exp}));
  EXPECT_EQ(out.value().abs().maxCoeff(), 0.0);
}

TEST(Denoiser, ShapeChecks) {
  const DenoiserConfig c = small_config();
  const Denoiser d(c, 3);
  EXPECT_THROW(d.forward(noisy(c, 2), condition(c.sequence_length + 1, 4), 1), ShapeError);
  EXPECT_THROW(d.forward(ad::Var::constant(ad::Array::Zero(5 * c.d_exp), {5, c.d_exp}),
                         condition(5, 4), 1),
               ShapeError);
  const ConditionVector wide = assemble_condition(Eigen::VectorXd::Ones(4), Eigen::VectorXd::Ones(2),
                                                  Eigen::MatrixXd::Zero(c.sequence_length, 2));
  EXPECT_THROW(d.forward(noisy(c, 2), wide, 1), ShapeError);
}

TEST(Denoiser, GradientsReachEveryParameterAfterOneStep) {
  // The zero output layer blocks gradients into the body until it moves.
  const DenoiserConfig c = small_config();
  Denoiser d(c, 5);
  nn::Adam adam({&d.params()}, {.lr = 1e-2});
  const ConditionVector cond = condition(c.sequence_length, 6);
  const ad::Var target = noisy(c, 7);
  for (int step = 0; step < 2; ++step) {
    ad::Var loss = ad::mean(ad::square(d.forward(noisy(c, 8), cond, 10) - target));
    loss.backward();
    if (step == 1) {
      for (const auto& p : d.params().parameters()) {
        EXPECT_GT(p.var.grad().abs().maxCoeff(), 0.0) << p.name;
      }
    }
    adam.step();
  }
}

TEST(Denoiser, ForwardGradientMatchesFiniteDifferences) {
  DenoiserConfig c = small_config();
  c.d_exp = 3;
  c.sequence_length = 3;
  c.hidden_width = 4;
  c.num_blocks = 1;
  c.time_embed_dim = 2;
  Denoiser d(c, 9);
  // Move the zero-initialized output off zero so every path contributes.
  ad::Array flat = d.params().flatten();
  flat += testutil::random_array(flat.size(), 10, 0.1);
  d.params().assign(flat);
  const ConditionVector cond = condition(c.sequence_length, 11);
  const auto f = [&](const std::vector<ad::Var>& p) {
    return testutil::weighted_sum(d.forward(p[0], cond, 5));
  };
  EXPECT_LT(testutil::gradient_error(f, {testutil::random_array(9, 12)}, {{3, 3}}), 1e-4);
}

TEST(Denoiser, TimestepEmbedding) {
  const Eigen::VectorXd e0 = timestep_embedding(0, 8);
  for (int i = 0; i < 4; ++i) {
    EXPECT_EQ(e0(i), 0.0);
    EXPECT_EQ(e0(4 + i), 1.0);
  }
  const Eigen::VectorXd e = timestep_embedding(7, 8);
  for (int i = 0; i < 4; ++i) {
    const double w = std::pow(10000.0, -static_cast<double>(i) / 4);
    EXPECT_NEAR(e(i), std::sin(7 * w), 1e-15);
    EXPECT_NEAR(e(4 + i), std::cos(7 * w), 1e-15);
  }
}

TEST(Denoiser, SeededInitIsDeterministic) {
  const DenoiserConfig c = small_config();
  EXPECT_EQ(Denoiser(c, 1).params().hash(), Denoiser(c, 1).params().hash());
  EXPECT_NE(Denoiser(c, 1).params().hash(), Denoiser(c, 2).params().hash());
}

TEST(DenoiserConfig, JsonRoundTripAndValidation) {
  const DenoiserConfig c = small_config();
  const DenoiserConfig r = DenoiserConfig::from_json(c.to_json());
  EXPECT_EQ(r.to_json(), c.to_json());
  DenoiserConfig bad = c;
  bad.hidden_width = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
}

TEST(Denoiser, ParameterCountBlockArithmetic) {
  DenoiserConfig c = small_config();
  c.num_blocks = 0;
  const std::int64_t in = c.d_exp + c.time_embed_dim + c.condition_dim, W = c.hidden_width;
  EXPECT_EQ(Denoiser(c, 1).params().count(), in * W + W + W * c.d_exp + c.d_exp);
  c.num_blocks = 2;
  const std::int64_t two = Denoiser::parameter_count(c);
  c.num_blocks = 4;
  EXPECT_EQ(Denoiser::parameter_count(c) - two, 2 * Denoiser::block_parameter_count(c));
  EXPECT_GT(two, 0);
}

TEST(Denoiser, TextSegmentChangesOutputAfterTraining) {
  const DenoiserConfig c = small_config();
  Denoiser d(c, 5);
  nn::Adam adam({&d.params()}, {.lr = 1e-2});
  const ConditionVector cond = condition(c.sequence_length, 6);
  for (int step = 0; step < 20; ++step) {
    ad::mean(ad::square(d.forward(noisy(c, 100 + step), cond, 1 + step) - noisy(c, 7))).backward();
    adam.step();
  }
  ConditionVector other = cond;
  other.text_emb = -cond.text_emb;
  const Eigen::MatrixXd a = d.denoise(noisy(c, 9).matrix(), cond, 10);
  const Eigen::MatrixXd b = d.denoise(noisy(c, 9).matrix(), other, 10);
  EXPECT_GT((a - b).cwiseAbs().mean(), 0.0);
}
