#include "facestyle/coeffspace.hpp"

#include <cmath>
#include <numbers>

#include "facestyle/random.hpp"

namespace facestyle {

namespace {

constexpr std::array<const char*, kNumEmotions> kEmotionNames = {
    "angry", "contempt", "disgusted", "fear", "happy", "neutral", "sad", "surprised"};

// (mouth, brow, eye) group offsets per emotion.
constexpr std::array<std::array<double, 3>, kNumEmotions> kGroupOffsets = {{
    {-0.2, -0.6, 0.1},
    {-0.1, -0.2, -0.2},
    {-0.1, -0.5, -0.4},
    {0.2, 0.6, 0.5},
    {0.3, 0.2, -0.2},
    {0.0, 0.0, 0.0},
    {-0.3, -0.3, -0.3},
    {0.5, 0.8, 0.6},
}};

constexpr std::uint64_t kClassTableSeed = 0x5eed0ffce5ULL;
constexpr std::uint64_t kAudioProjectionSeed = 0xa0d10ULL;

using Color = Eigen::Array3d;

struct Palette {
  Color background;
  Color eye_white;
  Color pupil;
  Color brow;
  Color lip;
  Color mouth;
  Color outline;
  double outline_width;  // normalized units; 0 disables
  double skin_hue_shift;
  double skin_saturation;
  int posterize_levels;  // 0 disables
};

Palette palette(int id) {
  switch (id) {
    case 0:
      return {{0.85, 0.88, 0.92}, {0.97, 0.97, 0.97}, {0.15, 0.1, 0.08}, {0.3, 0.2, 0.12},
              {0.75, 0.32, 0.32}, {0.35, 0.05, 0.08}, {0, 0, 0}, 0.0, 0.0, 1.0, 0};
    case 1:  // comic: warm background, inked outline, flat colors
      return {{0.98, 0.86, 0.4}, {1.0, 1.0, 1.0}, {0.05, 0.05, 0.2}, {0.1, 0.05, 0.05},
              {0.9, 0.15, 0.3}, {0.25, 0.0, 0.1}, {0.05, 0.05, 0.05}, 0.025, 0.45, 0.6, 4};
    case 2:  // pastel
      return {{0.7, 0.86, 0.78}, {0.95, 0.95, 1.0}, {0.3, 0.25, 0.5}, {0.45, 0.35, 0.55},
              {0.95, 0.6, 0.7}, {0.55, 0.25, 0.4}, {0.5, 0.4, 0.6}, 0.012, 0.7, 0.5, 0};
    default:  // ink wash
      return {{0.93, 0.93, 0.88}, {0.95, 0.95, 0.95}, {0.05, 0.05, 0.1}, {0.05, 0.05, 0.1},
              {0.35, 0.35, 0.45}, {0.1, 0.1, 0.15}, {0.1, 0.1, 0.15}, 0.03, 0.6, 0.15, 3};
  }
}

Color hsv_to_rgb(double h, double s, double v) {
  h = h - std::floor(h);
  const double i = std::floor(h * 6.0);
  const double f = h * 6.0 - i;
  const double p = v * (1 - s), q = v * (1 - f * s), t = v * (1 - (1 - f) * s);
  switch (static_cast<int>(i) % 6) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

Color skin_color(double identity_hue, const Palette& pal) {
  const double hue = 0.02 + 0.09 * identity_hue + pal.skin_hue_shift;
  const double sat = (0.25 + 0.35 * identity_hue) * pal.skin_saturation;
  const double val = 0.95 - 0.35 * identity_hue;
  return hsv_to_rgb(hue, sat, val);
}

// Face geometry in normalized [0,1] coordinates.
struct Geometry {
  Eigen::Vector2d face_center{0.5, 0.52};
  Eigen::Vector2d face_radii{0.36, 0.44};
  Eigen::Vector2d mouth_center{0.5, 0.72};
  double mouth_half_width = 0.12;
  double mouth_half_height = 0.0;
  double lip_thickness = 0.02;
  std::array<Eigen::Vector2d, 2> eye_centers{Eigen::Vector2d{0.36, 0.42},
                                             Eigen::Vector2d{0.64, 0.42}};
  double eye_half_width = 0.08;
  double eye_half_height = 0.0;
  std::array<Eigen::Vector2d, 4> brow_points;  // left inner, left outer, right inner, right outer
  double brow_thickness = 0.018;
};

Geometry geometry(const SynthFaceParams& p) {
  Geometry g;
  g.mouth_half_height = 0.07 * p.mouth_open;
  g.eye_half_height = 0.005 + 0.05 * p.eye_open;
  const double inner_y = 0.31 - 0.06 * p.brow_raise;
  const double outer_y = 0.31 - 0.03 * p.brow_raise;
  g.brow_points = {Eigen::Vector2d{0.43, inner_y}, Eigen::Vector2d{0.28, outer_y},
                   Eigen::Vector2d{0.57, inner_y}, Eigen::Vector2d{0.72, outer_y}};
  return g;
}

// Approximate signed distance to an axis-aligned ellipse.
double ellipse_sd(const Eigen::Vector2d& p, const Eigen::Vector2d& c, const Eigen::Vector2d& r) {
  const Eigen::Vector2d q = (p - c).cwiseQuotient(r);
  return (q.norm() - 1.0) * r.minCoeff();
}

double segment_distance(const Eigen::Vector2d& p, const Eigen::Vector2d& a,
                        const Eigen::Vector2d& b) {
  const Eigen::Vector2d ab = b - a;
  const double t = std::clamp((p - a).dot(ab) / ab.squaredNorm(), 0.0, 1.0);
  return (p - (a + t * ab)).norm();
}

double coverage(double sd, double pixel) { return std::clamp(0.5 - sd / pixel, 0.0, 1.0); }

void require_valid(const SynthFaceParams& params, int resolution) {
  if (!is_supported_resolution(resolution)) {
    throw ConfigError("unsupported resolution " + std::to_string(resolution) +
                      " (expected 32, 64, 128 or 256)");
  }
  if (!params.valid()) throw DataError("face params out of range");
}

}  // namespace

std::string emotion_name(Emotion e) { return kEmotionNames.at(static_cast<int>(e)); }

Emotion emotion_from_name(const std::string& name) {
  for (int i = 0; i < kNumEmotions; ++i) {
    if (name == kEmotionNames[i]) return static_cast<Emotion>(i);
  }
  throw DataError("unknown emotion class '" + name + "'");
}

void ExpressionSequence::validate() const {
  if (values.rows() < 1) throw DataError("expression sequence '" + video_id + "' is empty");
  if (!values.allFinite()) throw DataError("expression sequence '" + video_id + "' not finite");
  if (!(fps > 0)) throw DataError("fps must be positive");
}

bool SynthFaceParams::valid() const {
  return mouth_open >= 0 && mouth_open <= 1 && brow_raise >= -1 && brow_raise <= 1 &&
         eye_open >= 0 && eye_open <= 1 && identity_hue >= 0 && identity_hue <= 1 &&
         art_palette_id >= 0 && art_palette_id < kNumPalettes;
}

Landmarks face_landmarks(const SynthFaceParams& params, int resolution) {
  require_valid(params, resolution);
  const Geometry g = geometry(params);
  const double r = resolution;
  const Eigen::Vector2d mc = g.mouth_center;
  const double hw = g.mouth_half_width, hh = g.mouth_half_height;
  const double lower_half = hh * std::sqrt(0.75);
  Landmarks out = {
      {mc.x() - hw, mc.y()},
      {mc.x() + hw, mc.y()},
      {mc.x(), mc.y() - hh},
      {mc.x(), mc.y() + hh},
      {mc.x() - hw / 2, mc.y() + lower_half},
      {mc.x() + hw / 2, mc.y() + lower_half},
  };
  for (const auto& b : g.brow_points) out.push_back(b);
  for (const auto& e : g.eye_centers) {
    out.push_back({e.x() - g.eye_half_width, e.y()});
    out.push_back({e.x() + g.eye_half_width, e.y()});
  }
  for (auto& p : out) p *= r;
  return out;
}

Frame render_synthetic_frame(const SynthFaceParams& params, int resolution) {
  require_valid(params, resolution);
  const Palette pal = palette(params.art_palette_id);
  const Geometry g = geometry(params);
  const Color skin = skin_color(params.identity_hue, pal);
  const double px = 1.0 / resolution;

  Frame frame;
  frame.height = frame.width = resolution;
  frame.pixels.resize(3 * resolution * resolution);

  const Eigen::Vector2d mouth_outer{g.mouth_half_width + g.lip_thickness,
                                    g.mouth_half_height + g.lip_thickness};
  const Eigen::Vector2d eye_radii{g.eye_half_width, g.eye_half_height};
  const double pupil_r = 0.03;

  for (int y = 0; y < resolution; ++y) {
    for (int x = 0; x < resolution; ++x) {
      const Eigen::Vector2d p{(x + 0.5) * px, (y + 0.5) * px};
      Color c = pal.background;
      auto paint = [&c](const Color& color, double a) { c = (1 - a) * c + a * color; };

      const double face_sd = ellipse_sd(p, g.face_center, g.face_radii);
      if (pal.outline_width > 0) paint(pal.outline, coverage(face_sd - pal.outline_width, px));
      paint(skin, coverage(face_sd, px));

      for (const auto& e : g.eye_centers) {
        const double eye_a = coverage(ellipse_sd(p, e, eye_radii), px);
        paint(pal.eye_white, eye_a);
        paint(pal.pupil, eye_a * coverage((p - e).norm() - pupil_r, px));
      }
      for (int b = 0; b < 2; ++b) {
        const double d = segment_distance(p, g.brow_points[2 * b], g.brow_points[2 * b + 1]);
        paint(pal.brow, coverage(d - g.brow_thickness, px));
      }
      paint(pal.lip, coverage(ellipse_sd(p, g.mouth_center, mouth_outer), px));
      if (g.mouth_half_height > 1e-4) {
        const Eigen::Vector2d inner{g.mouth_half_width, g.mouth_half_height};
        paint(pal.mouth, coverage(ellipse_sd(p, g.mouth_center, inner), px));
      }

      if (pal.posterize_levels > 0) {
        const double lv = pal.posterize_levels;
        // Soft posterization keeps the image smooth enough to learn.
        c = (c * lv).floor() / lv * 0.5 + c * 0.5;
      }
      c = c.max(0.0).min(1.0);
      for (int ch = 0; ch < 3; ++ch) frame.at(ch, y, x) = c(ch);
    }
  }
  frame.landmarks = face_landmarks(params, resolution);
  return frame;
}

Frame render_palette_reference(int palette_id, int resolution) {
  SynthFaceParams p;
  p.art_palette_id = palette_id;
  return render_synthetic_frame(p, resolution);
}

std::vector<SynthFaceParams> VideoSample::frame_params(int palette) const {
  std::vector<SynthFaceParams> out;
  out.reserve(sequence.frames());
  for (int n = 0; n < sequence.frames(); ++n) {
    out.push_back(coeffs_to_params(sequence.values.row(n), sequence.dim(), identity_hue, palette));
  }
  return out;
}

Eigen::VectorXd emotion_offset(Emotion e, int d_exp) {
  if (d_exp < 3 * kCoefficientGroupSize) throw ConfigError("D_exp too small");
  Rng rng(derive_seed(kClassTableSeed, static_cast<std::uint64_t>(e)));
  Eigen::VectorXd off(d_exp);
  const auto& groups = kGroupOffsets[static_cast<int>(e)];
  for (int d = 0; d < d_exp; ++d) {
    const double jitter = 0.3 * normal(rng);
    off(d) = d < 3 * kCoefficientGroupSize ? groups[d / kCoefficientGroupSize] : jitter;
  }
  return off;
}

namespace {

struct Sinusoid {
  double amplitude, frequency, phase;
};

std::vector<Sinusoid> random_sinusoids(Rng& rng, int count, double amp_lo, double amp_hi,
                                       double f_lo, double f_hi) {
  std::vector<Sinusoid> out;
  for (int j = 0; j < count; ++j) {
    out.push_back({uniform(rng, amp_lo, amp_hi), uniform(rng, f_lo, f_hi),
                   uniform(rng, 0.0, 2 * std::numbers::pi)});
  }
  return out;
}

double evaluate(const std::vector<Sinusoid>& s, double t) {
  double v = 0.0;
  for (const auto& w : s) v += w.amplitude * std::sin(2 * std::numbers::pi * w.frequency * t + w.phase);
  return v;
}

VideoSample make_video(int index, Emotion emotion, int frames, std::uint64_t seed,
                       const CorpusOptions& opt) {
  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(index)));
  VideoSample v;
  v.emotion = emotion;
  v.identity_hue = uniform(rng);
  v.art_palette = opt.art_palette;
  char id[32];
  std::snprintf(id, sizeof(id), "vid_%04d", index);
  v.sequence.video_id = id;
  v.sequence.fps = opt.fps;

  const Eigen::VectorXd offset = emotion_offset(emotion, opt.d_exp);
  // Shared latent per visible group: mouth (speech band), brow, eye.
  const std::array<std::vector<Sinusoid>, 3> latents = {
      random_sinusoids(rng, 4, 0.2, 0.4, 1.5, 4.5),
      random_sinusoids(rng, 3, 0.04, 0.15, 0.2, 1.0),
      random_sinusoids(rng, 3, 0.03, 0.12, 0.1, 0.8),
  };
  std::vector<std::vector<Sinusoid>> per_dim;
  for (int d = 0; d < opt.d_exp; ++d) {
    const bool visible = d < 3 * kCoefficientGroupSize;
    per_dim.push_back(visible ? random_sinusoids(rng, 2, 0.01, 0.04, 0.2, 2.0)
                              : random_sinusoids(rng, 4, 0.02, 0.08, 0.1, 3.0));
  }
  Eigen::VectorXd video_offset(opt.d_exp);
  for (auto& o : video_offset) o = 0.05 * normal(rng);

  v.sequence.values.resize(frames, opt.d_exp);
  std::vector<double> mouth(frames + 2);
  for (int n = -1; n <= frames; ++n) mouth[n + 1] = evaluate(latents[0], n / opt.fps);
  for (int n = 0; n < frames; ++n) {
    const double t = n / opt.fps;
    for (int d = 0; d < opt.d_exp; ++d) {
      const int group = d / kCoefficientGroupSize;
      double c = offset(d) + video_offset(d) + evaluate(per_dim[d], t);
      if (group < 3) c += evaluate(latents[group], t);
      v.sequence.values(n, d) = static_cast<float>(c);
    }
  }

  // Pseudo-audio: fixed projections of mouth level and velocity plus noise.
  Rng proj_rng(kAudioProjectionSeed);
  Eigen::VectorXd p_level(opt.audio_dim), p_vel(opt.audio_dim);
  for (int k = 0; k < opt.audio_dim; ++k) {
    p_level(k) = normal(proj_rng);
    p_vel(k) = normal(proj_rng);
  }
  v.audio.resize(frames, opt.audio_dim);
  for (int n = 0; n < frames; ++n) {
    const double level = mouth[n + 1];
    const double velocity = (mouth[n + 2] - mouth[n]) * opt.fps / 2.0 / (2 * std::numbers::pi * 3.0);
    for (int k = 0; k < opt.audio_dim; ++k) {
      v.audio(n, k) =
          static_cast<float>(p_level(k) * level * 3.0 + p_vel(k) * velocity * 3.0 + 0.05 * normal(rng));
    }
  }

  if (opt.render) {
    for (const auto& p : v.frame_params(0)) v.frames.push_back(render_synthetic_frame(p, opt.resolution));
    for (const auto& p : v.frame_params(opt.art_palette)) {
      v.styled.push_back(render_synthetic_frame(p, opt.resolution));
    }
  }
  return v;
}

}  // namespace

std::vector<VideoSample> generate_corpus(int num_videos, int frames_per_video, std::uint64_t seed,
                                         const CorpusOptions& options) {
  if (num_videos < 1) throw ConfigError("num_videos must be >= 1");
  if (frames_per_video < 2) throw ConfigError("frames_per_video must be >= 2");
  if (options.render && !is_supported_resolution(options.resolution)) {
    throw ConfigError("unsupported corpus resolution " + std::to_string(options.resolution));
  }
  if (options.art_palette < 1 || options.art_palette >= kNumPalettes) {
    throw ConfigError("art palette must be in [1, " + std::to_string(kNumPalettes - 1) + "]");
  }
  // Classes cycle through seeded permutations so every block of 8 videos
  // covers all emotions.
  Rng class_rng(derive_seed(seed, 0xc1a55ULL));
  std::vector<Emotion> classes;
  while (static_cast<int>(classes.size()) < num_videos) {
    std::array<int, kNumEmotions> perm{};
    for (int i = 0; i < kNumEmotions; ++i) perm[i] = i;
    std::shuffle(perm.begin(), perm.end(), class_rng);
    for (int c : perm) classes.push_back(static_cast<Emotion>(c));
  }

  std::vector<VideoSample> corpus;
  corpus.reserve(num_videos);
  for (int i = 0; i < num_videos; ++i) {
    corpus.push_back(make_video(i, classes[i], frames_per_video, seed, options));
  }
  return corpus;
}

}  // namespace facestyle
