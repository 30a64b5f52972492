#pragma once

// Expression-coefficient sequences, the procedural cartoon-face renderer that
// gives coefficients a visible meaning, and a seeded synthetic corpus.

#include <Eigen/Dense>
#include <algorithm>
#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "facestyle/error.hpp"
#include "facestyle/feature_ops.hpp"

namespace facestyle {

inline constexpr int kDefaultExpressionDim = 64;
inline constexpr int kDefaultAudioDim = 16;
inline constexpr int kNumPalettes = 4;
inline constexpr int kCoefficientGroupSize = 8;

enum class Emotion : int {
  kAngry = 0,
  kContempt,
  kDisgusted,
  kFear,
  kHappy,
  kNeutral,
  kSad,
  kSurprised,
};
inline constexpr int kNumEmotions = 8;

std::string emotion_name(Emotion e);
// Throws DataError for an unknown name.
Emotion emotion_from_name(const std::string& name);

using CoeffMatrix = Eigen::Matrix<float, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

// N frames of D_exp expression coefficients.
struct ExpressionSequence {
  CoeffMatrix values;
  double fps = 25.0;
  std::string video_id;

  int frames() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
  // Throws DataError on N < 1, non-finite values or fps <= 0.
  void validate() const;
};

struct SynthFaceParams {
  double mouth_open = 0.5;  // [0, 1]
  double brow_raise = 0.0;  // [-1, 1]
  double eye_open = 0.5;    // [0, 1]
  double identity_hue = 0.5;  // [0, 1]
  int art_palette_id = 0;     // [0, kNumPalettes)

  bool valid() const;
};

// Landmark layout: 6 mouth points, 4 brow points, 4 eye corners.
namespace landmarks {
inline constexpr int kMouthBegin = 0;
inline constexpr int kMouthCount = 6;
inline constexpr int kBrowBegin = 6;
inline constexpr int kEyeBegin = 10;
inline constexpr int kCount = 14;
inline constexpr int kUpperLipMid = 2;
inline constexpr int kLowerLipMid = 3;
}  // namespace landmarks

using Landmarks = std::vector<Eigen::Vector2d>;

// RGB image stored channel-major (3, H, W) with values in [0, 1].
template <typename Scalar>
struct BasicFrame {
  int height = 0;
  int width = 0;
  ArrayX<Scalar> pixels;
  Landmarks landmarks;

  SpatialShape shape() const { return {3, height, width}; }
  Scalar& at(int c, int y, int x) { return pixels((c * height + y) * width + x); }
  Scalar at(int c, int y, int x) const { return pixels((c * height + y) * width + x); }
};
using Frame = BasicFrame<double>;

inline bool is_supported_resolution(int r) { return r == 32 || r == 64 || r == 128 || r == 256; }

// Analytic landmark positions in pixel coordinates.
Landmarks face_landmarks(const SynthFaceParams& params, int resolution);

// Throws ConfigError for unsupported resolutions and DataError for
// out-of-range params.
Frame render_synthetic_frame(const SynthFaceParams& params, int resolution);

// Neutral face in the given palette; used as the art-style reference image.
Frame render_palette_reference(int palette_id, int resolution);

// Fixed affine readout:
//   mouth_open = 0.5 + 0.5 * mean(c[0:8]),  brow_raise = mean(c[8:16]),
//   eye_open   = 0.5 + 0.5 * mean(c[16:24]),
// clamped to their ranges. Remaining coefficients are not visible.
template <typename Derived>
SynthFaceParams coeffs_to_params(const Eigen::DenseBase<Derived>& coeffs,
                                 int d_exp = kDefaultExpressionDim, double identity_hue = 0.5,
                                 int palette = 0) {
  if (coeffs.size() != d_exp) {
    throw ShapeError("coefficient row has " + std::to_string(coeffs.size()) +
                     " entries, expected " + std::to_string(d_exp));
  }
  if (d_exp < 3 * kCoefficientGroupSize) {
    throw ConfigError("D_exp must be at least " + std::to_string(3 * kCoefficientGroupSize));
  }
  auto group_mean = [&](int g) {
    double s = 0.0;
    for (int i = 0; i < kCoefficientGroupSize; ++i) {
      s += static_cast<double>(coeffs(g * kCoefficientGroupSize + i));
    }
    return s / kCoefficientGroupSize;
  };
  SynthFaceParams p;
  p.mouth_open = std::clamp(0.5 + 0.5 * group_mean(0), 0.0, 1.0);
  p.brow_raise = std::clamp(group_mean(1), -1.0, 1.0);
  p.eye_open = std::clamp(0.5 + 0.5 * group_mean(2), 0.0, 1.0);
  p.identity_hue = identity_hue;
  p.art_palette_id = palette;
  return p;
}

struct CorpusOptions {
  int resolution = 64;
  double fps = 25.0;
  int d_exp = kDefaultExpressionDim;
  int audio_dim = kDefaultAudioDim;
  int art_palette = 1;
  bool render = true;
};

struct VideoSample {
  ExpressionSequence sequence;
  CoeffMatrix audio;  // (N, audio_dim) pseudo-audio features
  Emotion emotion = Emotion::kNeutral;
  double identity_hue = 0.5;
  int art_palette = 1;
  std::vector<Frame> frames;  // natural palette
  std::vector<Frame> styled;  // art palette targets

  std::vector<SynthFaceParams> frame_params(int palette = 0) const;
};

// Per-class mean offset of each coefficient.
Eigen::VectorXd emotion_offset(Emotion e, int d_exp = kDefaultExpressionDim);

std::vector<VideoSample> generate_corpus(int num_videos, int frames_per_video, std::uint64_t seed,
                                         const CorpusOptions& options = {});

}  // namespace facestyle
