#include <gtest/gtest.h>

#include <cmath>

#include "facestyle/metrics.hpp"
#include "oracles.hpp"
#include "test_util.hpp"

using namespace facestyle;

namespace {

Frame wave_frame(int h, int w, bool second) {
  Frame f{h, w, ArrayX<double>(3 * h * w), {}};
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        f.at(c, y, x) = second ? 0.5 + 0.35 * std::sin(0.6 * x + 1.1 * y + 0.5 * c) + 0.05 * std::cos(x * y * 0.3)
                               : 0.5 + 0.4 * std::sin(0.7 * x + 1.3 * y + c);
      }
  return f;
}

Landmarks points(std::initializer_list<std::pair<double, double>> xy) {
  Landmarks l;
  for (const auto& [x, y] : xy) l.push_back({x, y});
  return l;
}

}  // namespace

TEST(SSIM, SelfSimilarityIsOne) {
  const Frame a = wave_frame(16, 16, false);
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-9);
  const Frame tiny = wave_frame(5, 5, true);
  EXPECT_NEAR(ssim(tiny, tiny), 1.0, 1e-9);
}

TEST(SSIM, MatchesDirectOracle) {
  for (auto [h, w] : {std::pair{16, 20}, std::pair{11, 11}, std::pair{6, 9}}) {
    const Frame a = wave_frame(h, w, false), b = wave_frame(h, w, true);
    EXPECT_NEAR(ssim(a, b), oracle::ssim(a, b), 1e-9) << h << "x" << w;
  }
}

TEST(SSIM, MatchesScikitImageReference) {
  // skimage.metrics.structural_similarity(a, b, gaussian_weights=True, sigma=1.5,
  //   use_sample_covariance=False, data_range=1.0, channel_axis=-1)
  const Frame a = wave_frame(16, 20, false), b = wave_frame(16, 20, true);
  EXPECT_NEAR(ssim(a, b), -0.7389942401319032, 1e-9);
}

TEST(SSIM, SymmetricAndShapeChecked) {
  const Frame a = wave_frame(12, 12, false), b = wave_frame(12, 12, true);
  EXPECT_NEAR(ssim(a, b), ssim(b, a), 1e-15);
  EXPECT_THROW(ssim(a, wave_frame(12, 13, true)), ShapeError);
}

TEST(LMD, ThreeFourFive) {
  Landmarks pred(landmarks::kCount, Eigen::Vector2d::Zero());
  Landmarks target(landmarks::kCount, Eigen::Vector2d(3.0, 4.0));
  EXPECT_EQ(lmd(pred, target, LandmarkSubset::kMouth), 5.0);
  EXPECT_EQ(lmd(pred, target, LandmarkSubset::kFace), 5.0);
}

TEST(LMD, SubsetsAndSequences) {
  Landmarks pred(landmarks::kCount, Eigen::Vector2d::Zero());
  Landmarks target = pred;
  target[landmarks::kBrowBegin] = {0.0, 14.0};  // outside the mouth
  target[0] = {6.0, 8.0};
  EXPECT_NEAR(lmd(pred, target, LandmarkSubset::kMouth), 10.0 / 6, 1e-15);
  EXPECT_NEAR(lmd(pred, target, LandmarkSubset::kFace), 24.0 / 14, 1e-15);
  EXPECT_NEAR(lmd(std::vector<Landmarks>{pred, pred}, std::vector<Landmarks>{target, pred},
                  LandmarkSubset::kFace),
              12.0 / 14, 1e-15);
  EXPECT_THROW(lmd(pred, points({{0, 0}}), LandmarkSubset::kFace), DataError);
  EXPECT_THROW(lmd(std::vector<Landmarks>{pred}, std::vector<Landmarks>{}, LandmarkSubset::kFace),
               DataError);
}

TEST(EvalReport, FrameWeightedAggregates) {
  EvalReport r;
  r.add({"a", 1, 0.2, 1.0, 2.0});
  r.add({"b", 3, 0.6, 2.0, 4.0});
  EXPECT_NEAR(r.ssim, 0.5, 1e-15);
  EXPECT_NEAR(r.m_lmd, 1.75, 1e-15);
  EXPECT_NEAR(r.f_lmd, 3.5, 1e-15);
  const auto j = r.to_json();
  EXPECT_EQ(j["videos"].size(), 2u);
  EXPECT_NE(r.table().find("SSIM"), std::string::npos);
}

TEST(EvalReport, EvaluateSequence) {
  Frame a = wave_frame(12, 12, false);
  a.landmarks = Landmarks(landmarks::kCount, Eigen::Vector2d::Zero());
  Frame b = a;
  b.landmarks = Landmarks(landmarks::kCount, Eigen::Vector2d(0.0, 2.0));
  const EvalRow row = evaluate_sequence("v", {a, a}, {a, b});
  EXPECT_EQ(row.frames, 2);
  EXPECT_NEAR(row.ssim, 1.0, 1e-9);
  EXPECT_NEAR(row.f_lmd, 1.0, 1e-15);
  EXPECT_THROW(evaluate_sequence("v", {a}, {a, b}), DataError);
}

TEST(SSIM, CheckerboardAgainstInverseIsNegative) {
  Frame a{16, 16, ArrayX<double>(3 * 256), {}}, b = a;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < 16; ++y)
      for (int x = 0; x < 16; ++x) {
        a.at(c, y, x) = (x + y) % 2;
        b.at(c, y, x) = 1.0 - a.at(c, y, x);
      }
  EXPECT_LT(ssim(a, b), 0.0);
}

TEST(SSIM, EqualConstantsAreOne) {
  const Frame a{12, 12, ArrayX<double>::Constant(3 * 144, 0.4), {}};
  EXPECT_NEAR(ssim(a, a), 1.0, 1e-12);
  const Frame zero{12, 12, ArrayX<double>::Zero(3 * 144), {}};
  EXPECT_NEAR(ssim(zero, zero), 1.0, 1e-12);
}

TEST(LMD, IdenticalSetsAreZero) {
  Landmarks l;
  for (int i = 0; i < landmarks::kCount; ++i) l.push_back({1.5 * i, 20.0 - i});
  EXPECT_EQ(lmd(l, l, LandmarkSubset::kMouth), 0.0);
  EXPECT_EQ(lmd(l, l, LandmarkSubset::kFace), 0.0);
}
