#include <gtest/gtest.h>

#include <map>

#include <set>

#include "facestyle/coeffspace.hpp"
#include "facestyle/corpus.hpp"
#include "facestyle/io.hpp"
#include "test_util.hpp"

using namespace facestyle;
namespace fs = std::filesystem;

TEST(CoeffsToParams, AffineReadout) {
  Eigen::VectorXd c = Eigen::VectorXd::Zero(kDefaultExpressionDim);
  c.segment(0, 8).setConstant(0.4);
  c(0) = 0.8;  // mean 0.45
  c.segment(8, 8).setConstant(-0.25);
  c.segment(16, 8).setConstant(-0.6);
  c.tail(10).setConstant(50.0);  // invisible
  const SynthFaceParams p = coeffs_to_params(c);
  EXPECT_NEAR(p.mouth_open, 0.5 + 0.5 * 0.45, 1e-15);
  EXPECT_NEAR(p.brow_raise, -0.25, 1e-15);
  EXPECT_NEAR(p.eye_open, 0.2, 1e-15);
  c.segment(0, 8).setConstant(5.0);
  EXPECT_EQ(coeffs_to_params(c).mouth_open, 1.0);
  EXPECT_THROW(coeffs_to_params(Eigen::VectorXd::Zero(10), 64), ShapeError);
}

TEST(Renderer, LandmarksFollowMouthOpening) {
  for (int r : {32, 64}) {
    for (double m : {0.0, 0.3, 1.0}) {
      SynthFaceParams p;
      p.mouth_open = m;
      const Landmarks l = face_landmarks(p, r);
      ASSERT_EQ(static_cast<int>(l.size()), landmarks::kCount);
      const double gap = (l[landmarks::kLowerLipMid] - l[landmarks::kUpperLipMid]).norm();
      EXPECT_NEAR(gap, 2 * 0.07 * m * r, 1e-12);
    }
  }
}

TEST(Renderer, FrameShapeRangeAndDeterminism) {
  SynthFaceParams p;
  p.identity_hue = 0.3;
  const Frame a = render_synthetic_frame(p, 32);
  EXPECT_EQ(a.height, 32);
  EXPECT_EQ(a.pixels.size(), 3 * 32 * 32);
  EXPECT_GE(a.pixels.minCoeff(), 0.0);
  EXPECT_LE(a.pixels.maxCoeff(), 1.0);
  EXPECT_TRUE((render_synthetic_frame(p, 32).pixels == a.pixels).all());
  p.art_palette_id = 2;
  EXPECT_FALSE((render_synthetic_frame(p, 32).pixels == a.pixels).all());
}

TEST(Renderer, OpenMouthDarkensMouthRegion) {
  SynthFaceParams closed, open;
  closed.mouth_open = 0.0;
  open.mouth_open = 1.0;
  const Frame a = render_synthetic_frame(closed, 64), b = render_synthetic_frame(open, 64);
  const int x = 32, y = static_cast<int>(0.72 * 64);
  auto lum = [&](const Frame& f) { return f.at(0, y, x) + f.at(1, y, x) + f.at(2, y, x); };
  EXPECT_LT(lum(b), lum(a));
}

TEST(Renderer, RejectsBadInput) {
  SynthFaceParams p;
  EXPECT_THROW(render_synthetic_frame(p, 48), ConfigError);
  p.mouth_open = 1.5;
  EXPECT_THROW(render_synthetic_frame(p, 32), DataError);
}

TEST(Corpus, DeterministicAndCoversClasses) {
  CorpusOptions o;
  o.resolution = 32;
  const auto a = generate_corpus(8, 6, 5, o), b = generate_corpus(8, 6, 5, o);
  std::set<Emotion> classes;
  for (int i = 0; i < 8; ++i) {
    EXPECT_TRUE(a[i].sequence.values == b[i].sequence.values);
    EXPECT_TRUE(a[i].audio == b[i].audio);
    classes.insert(a[i].emotion);
    ASSERT_EQ(a[i].frames.size(), 6u);
    ASSERT_EQ(a[i].styled.size(), 6u);
    // Styled and natural frames share geometry.
    for (int n = 0; n < 6; ++n) {
      for (int k = 0; k < landmarks::kCount; ++k) {
        EXPECT_EQ(a[i].frames[n].landmarks[k], a[i].styled[n].landmarks[k]);
      }
    }
  }
  EXPECT_EQ(static_cast<int>(classes.size()), kNumEmotions);
  const auto c = generate_corpus(8, 6, 6, o);
  EXPECT_FALSE(c[0].sequence.values == a[0].sequence.values);
  EXPECT_THROW(generate_corpus(0, 6, 1, o), ConfigError);
  o.art_palette = 0;
  EXPECT_THROW(generate_corpus(1, 6, 1, o), ConfigError);
}

TEST(Corpus, EmotionOffsetsSeparateClasses) {
  const Eigen::VectorXd happy = emotion_offset(Emotion::kHappy), sad = emotion_offset(Emotion::kSad);
  EXPECT_GT((happy - sad).head(24).norm(), 0.0);
  EXPECT_TRUE(emotion_offset(Emotion::kHappy) == happy);
}

TEST(IO, PngRoundTripQuantizes) {
  testutil::TempDir dir("png");
  SynthFaceParams p;
  const Frame f = render_synthetic_frame(p, 32);
  io::write_png(dir / "a.png", f);
  const Frame g = io::read_png(dir / "a.png");
  ASSERT_EQ(g.height, 32);
  EXPECT_LE((g.pixels - f.pixels).abs().maxCoeff(), 0.5 / 255 + 1e-12);
  EXPECT_THROW(io::read_png(dir / "missing.png"), DataError);
}

TEST(IO, Float32RoundTrip) {
  testutil::TempDir dir("f32");
  CoeffMatrix m(3, 4);
  for (int i = 0; i < 12; ++i) m.data()[i] = 0.25f * i - 1.0f;
  io::write_f32(dir / "m.bin", m);
  EXPECT_EQ(fs::file_size(dir / "m.bin"), 48u);
  EXPECT_TRUE(io::read_f32(dir / "m.bin", 4) == m);
  EXPECT_THROW(io::read_f32(dir / "m.bin", 5), DataError);
}

TEST(CorpusFiles, WriteAndLoad) {
  testutil::TempDir dir("corpus");
  CorpusOptions o;
  o.resolution = 32;
  const auto videos = generate_corpus(3, 4, 9, o);
  write_corpus(dir.path(), videos, o);
  const CorpusInfo info = read_corpus_info(dir.path());
  EXPECT_EQ(info.video_ids.size(), 3u);
  EXPECT_EQ(info.frames_per_video, 4);
  const VideoSample v = load_video(dir.path(), info.video_ids[1], info, true);
  EXPECT_TRUE(v.sequence.values == videos[1].sequence.values);
  EXPECT_EQ(v.emotion, videos[1].emotion);
  ASSERT_EQ(v.styled.size(), 4u);
  EXPECT_EQ(v.frames[2].landmarks[3], videos[1].frames[2].landmarks[3]);
  const ArtStyle art = ArtStyle::load(dir / "art_style.json");
  EXPECT_EQ(art.palette_id, 1);
  EXPECT_TRUE(fs::exists(art.reference_image));
  EXPECT_EQ(read_au_intensities(dir / info.video_ids[0] / "aus.json").size(), 17);
}

TEST(CoeffsToParams, NeutralMonotoneAndSaturating) {
  const SynthFaceParams n = coeffs_to_params(Eigen::VectorXd::Zero(kDefaultExpressionDim));
  EXPECT_EQ(n.mouth_open, 0.5);
  EXPECT_EQ(n.brow_raise, 0.0);
  EXPECT_EQ(n.eye_open, 0.5);
  double prev = -1.0;
  for (int i = 0; i <= 40; ++i) {
    Eigen::VectorXd c = Eigen::VectorXd::Zero(kDefaultExpressionDim);
    c(0) = 0.5 * i;
    const double m = coeffs_to_params(c).mouth_open;
    EXPECT_GE(m, prev) << i;
    prev = m;
  }
  EXPECT_EQ(prev, 1.0);
  for (double s : {1e6, -1e6}) {
    const SynthFaceParams p = coeffs_to_params(Eigen::VectorXd::Constant(kDefaultExpressionDim, s));
    EXPECT_EQ(p.mouth_open, s > 0 ? 1.0 : 0.0);
    EXPECT_EQ(p.brow_raise, s > 0 ? 1.0 : -1.0);
    EXPECT_EQ(p.eye_open, s > 0 ? 1.0 : 0.0);
  }
}

TEST(Corpus, ClassMeansPairwiseDistinct) {
  CorpusOptions o;
  o.render = false;
  const auto corpus = generate_corpus(24, 8, 5, o);
  std::map<Emotion, std::pair<Eigen::VectorXd, int>> sums;
  for (const auto& v : corpus) {
    auto& [sum, n] = sums.try_emplace(v.emotion, Eigen::VectorXd::Zero(v.sequence.dim()), 0).first->second;
    sum += v.sequence.values.cast<double>().colwise().sum().transpose();
    n += v.sequence.frames();
  }
  ASSERT_EQ(static_cast<int>(sums.size()), kNumEmotions);
  for (auto a = sums.begin(); a != sums.end(); ++a) {
    for (auto b = std::next(a); b != sums.end(); ++b) {
      const Eigen::VectorXd ma = a->second.first / a->second.second, mb = b->second.first / b->second.second;
      EXPECT_GT((ma - mb).norm(), 0.0);
    }
  }
}
