#pragma once

// Art-style stage: a style-modulated toy generator G with ModRes, the style
// encoder E_s, the content encoder E_c, the motion generator G_m, the
// refinement network R and the discriminator D.
//
// Data flow for one frame:
//   w   = ModRes(E_s(identity), E_s(art), blend)
//   f   = G_m(identity, coeffs)                    flow at the warp layer
//   m   = G block output at the warp resolution
//   m^  = R(warp(m, f), E_c feature at that resolution)
//   skips from E_c are added at every resolution >= the warp resolution.

#include <Eigen/Dense>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <string>
#include <utility>
#include <vector>

#include "facestyle/coeffspace.hpp"
#include "facestyle/feature_ops.hpp"
#include "facestyle/nn.hpp"

namespace facestyle {

// Channel-major (C, H, W) activations.
template <typename Scalar>
struct BasicFeatureMap {
  SpatialShape shape;
  ArrayX<Scalar> values;

  Scalar& at(int c, int y, int x) { return values((c * shape.height + y) * shape.width + x); }
  Scalar at(int c, int y, int x) const { return values((c * shape.height + y) * shape.width + x); }
  // ShapeError unless square, power-of-two sized and finite.
  void validate() const;
};
using FeatureMap = BasicFeatureMap<double>;

// (H, W, 2) displacement in pixels, interleaved (dx, dy).
template <typename Scalar>
struct BasicFlowField {
  int height = 0;
  int width = 0;
  ArrayX<Scalar> displacement;

  static BasicFlowField zeros(int h, int w) {
    return {h, w, ArrayX<Scalar>::Zero(2 * h * w)};
  }
  static BasicFlowField constant(int h, int w, Scalar dx, Scalar dy) {
    BasicFlowField f = zeros(h, w);
    for (int p = 0; p < h * w; ++p) {
      f.displacement(2 * p) = dx;
      f.displacement(2 * p + 1) = dy;
    }
    return f;
  }
  Scalar& dx(int y, int x) { return displacement(2 * (y * width + x)); }
  Scalar& dy(int y, int x) { return displacement(2 * (y * width + x) + 1); }
  Scalar dx(int y, int x) const { return displacement(2 * (y * width + x)); }
  Scalar dy(int y, int x) const { return displacement(2 * (y * width + x) + 1); }
};
using FlowField = BasicFlowField<double>;

// (L, d_w) latent code.
struct StyleCode {
  RowMatrixX<double> values;
  int layers() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

template <typename Scalar>
struct BasicAdaINParams {
  ArrayX<Scalar> scale;
  ArrayX<Scalar> bias;
};
using AdaINParams = BasicAdaINParams<double>;

template <typename Scalar>
void BasicFeatureMap<Scalar>::validate() const {
  auto pow2 = [](int v) { return v > 0 && (v & (v - 1)) == 0; };
  if (shape.height != shape.width || !pow2(shape.height)) {
    throw ShapeError("feature maps must be square with a power-of-two side");
  }
  if (values.size() != shape.size()) throw ShapeError("feature map value count mismatch");
  if (!values.allFinite()) throw NumericError("feature map is not finite");
}

// y_s * (x - mean) / sqrt(var + eps^2) + y_b per channel.
template <typename Scalar>
BasicFeatureMap<Scalar> adain(const BasicFeatureMap<Scalar>& x, const BasicAdaINParams<Scalar>& y,
                              Scalar eps = Scalar(1e-5)) {
  if (y.scale.size() != x.shape.channels || y.bias.size() != x.shape.channels) {
    throw ShapeError("adain: " + std::to_string(x.shape.channels) + " channels, params for " +
                     std::to_string(y.scale.size()));
  }
  BasicFeatureMap<Scalar> out{x.shape, {}};
  ArrayX<Scalar> normalized, inv_std;
  kernels::adain_forward<Scalar>(x.values, x.shape, y.scale, y.bias, eps, out.values, normalized,
                                 inv_std);
  return out;
}

// Bilinear sampling at (x + dx, y + dy) with border clamping.
template <typename Scalar>
BasicFeatureMap<Scalar> warp(const BasicFeatureMap<Scalar>& m, const BasicFlowField<Scalar>& f) {
  if (f.height != m.shape.height || f.width != m.shape.width ||
      f.displacement.size() != 2 * m.shape.plane()) {
    throw ShapeError("warp: flow and feature map sizes differ");
  }
  BasicFeatureMap<Scalar> out{m.shape, {}};
  kernels::warp_forward<Scalar>(m.values, m.shape, f.displacement, out.values);
  return out;
}

ad::Var to_var(const FeatureMap& m);
FeatureMap to_feature_map(const ad::Var& v);
ad::Var to_var(const FlowField& f);
FlowField to_flow_field(const ad::Var& v);
ad::Var to_var(const StyleCode& w);
StyleCode to_style_code(const ad::Var& v);
// (3, H, W) constant holding the frame's pixels.
ad::Var image_var(const Frame& frame);
Frame var_to_frame(const ad::Var& image);

struct StyleAConfig {
  int resolution = 64;
  int channels = 16;
  int style_dim = 64;
  int d_exp = kDefaultExpressionDim;
  int warp_resolution = 0;  // 0 selects min(64, resolution / 4)
  bool use_skips = true;
  bool use_refine = true;
  double blend = 1.0;
  double eps = 1e-5;

  int num_blocks() const;  // 4x4 -> resolution by doubling
  int num_layers() const { return 2 * num_blocks(); }
  int warp_res() const;
  // E_c outputs, one per resolution from `resolution` down to warp_res().
  int skip_count() const;

  void validate() const;
  nlohmann::json to_json() const;
  static StyleAConfig from_json(const nlohmann::json& j);
};

// Image -> StyleCode by strided convolutions down to 4x4 and a linear head.
class StyleEncoder {
 public:
  StyleEncoder(const StyleAConfig& config, std::uint64_t seed);
  ad::Var forward(const ad::Var& image) const;  // (3,R,R) -> (L, d_w)
  StyleCode encode(const Frame& frame) const;
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  StyleAConfig config_;
  nn::ParamStore params_{"style_encoder."};
  std::vector<nn::Conv2d> convs_;
  nn::Linear head_;
};

// Per-resolution extension points used while synthesizing.
struct SynthesisHooks {
  // Receives the block output at the warp resolution and returns m^.
  std::function<ad::Var(const ad::Var& m)> warp_layer;
  // Adds content at resolutions >= the warp resolution.
  std::function<ad::Var(int resolution, const ad::Var& h)> skip;
};

// Toy style-based generator plus the ModRes residual; both are frozen in
// the art-style stage.
class Generator {
 public:
  Generator(const StyleAConfig& config, std::uint64_t seed);

  // w_i + blend * MLP([w_i, w_s]); the MLP output layer starts at zero.
  ad::Var modres(const ad::Var& w_i, const ad::Var& w_s, double blend) const;
  StyleCode modres_merge(const StyleCode& w_i, const StyleCode& w_s, double blend) const;

  // (L, d_w) -> (3, R, R) in [0, 1].
  ad::Var synthesize(const ad::Var& w, const SynthesisHooks& hooks = {}) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  struct Layer {
    nn::Conv2d conv;
    nn::Linear to_scale, to_bias;
  };
  ad::Var modulate(const Layer& layer, const ad::Var& h, const ad::Var& w, int index) const;

  StyleAConfig config_;
  nn::ParamStore params_{"generator."};
  ad::Var constant_;
  std::vector<Layer> layers_;
  nn::Conv2d to_rgb_;
  nn::Linear modres_hidden_, modres_out_;
};

// Multi-level content features from the identity image.
class ContentEncoder {
 public:
  ContentEncoder(const StyleAConfig& config, std::uint64_t seed);
  // skip_count() maps, resolution first, each half the previous size.
  std::vector<ad::Var> forward(const ad::Var& image) const;
  std::vector<FeatureMap> encode(const Frame& frame) const;
  // Zero-initialized 1x1 projection applied before a feature joins G.
  ad::Var inject(int level, const ad::Var& feature) const;
  int level_for_resolution(int resolution) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  StyleAConfig config_;
  nn::ParamStore params_{"content_encoder."};
  std::vector<nn::Conv2d> convs_;
  std::vector<nn::Conv2d> projections_;
};

// Image encoder + coefficient encoder (AdaIN params) + flow decoder.
class MotionGenerator {
 public:
  MotionGenerator(const StyleAConfig& config, std::uint64_t seed);
  // identity (3,R,R), coeffs (1, D_exp) -> flow (warp_res, warp_res, 2).
  ad::Var forward(const ad::Var& identity, const ad::Var& coeffs) const;
  FlowField flow(const Frame& identity, const Eigen::VectorXd& coeffs) const;
  // The AdaIN parameters produced for decoder layer `layer` (0 or 1).
  AdaINParams coefficient_params(const Eigen::VectorXd& coeffs, int layer) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  std::pair<ad::Var, ad::Var> adain_params(const ad::Var& hidden, int layer) const;
  ad::Var coeff_hidden(const ad::Var& coeffs) const;

  StyleAConfig config_;
  nn::ParamStore params_{"motion_generator."};
  std::vector<nn::Conv2d> encoder_;
  nn::Linear coeff_in_;
  std::vector<nn::Linear> to_scale_, to_bias_;
  nn::Conv2d decode_low_, decode_high_, to_flow_;
};

// m^ + conv(lrelu(conv([m^, context]))); the last conv starts at zero.
class Refiner {
 public:
  Refiner(const StyleAConfig& config, std::uint64_t seed);
  ad::Var forward(const ad::Var& m_hat, const ad::Var& context) const;
  FeatureMap refine(const FeatureMap& m_hat, const FeatureMap& context) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  StyleAConfig config_;
  nn::ParamStore params_{"refiner."};
  nn::Conv2d in_, out_;
};

// Four strided conv blocks and a sigmoid head; returns a (1, 1) probability.
class Discriminator {
 public:
  Discriminator(const StyleAConfig& config, std::uint64_t seed);
  ad::Var forward(const ad::Var& image) const;

  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

 private:
  StyleAConfig config_;
  nn::ParamStore params_{"discriminator."};
  std::vector<nn::Conv2d> convs_;
  nn::Linear head_;
};

// All art-style networks with per-network seeds derived from one seed, so
// ablated variants share initial weights for the networks they keep.
class StyleAModel {
 public:
  StyleAModel(const StyleAConfig& config, std::uint64_t seed);

  // Per-identity state reused across the frames of one video.
  struct Prepared {
    ad::Var identity;
    ad::Var style;                 // merged (L, d_w)
    std::vector<ad::Var> content;  // E_c pyramid
  };
  Prepared prepare(const Frame& identity, const Frame& art) const;
  // Reuses a merged style computed earlier (E_s and G frozen).
  Prepared prepare(const Frame& identity, const ad::Var& style) const;
  ad::Var merged_style(const Frame& identity, const Frame& art) const;

  // One frame for a coefficient row (1, D_exp). flow_out receives f.
  ad::Var render(const Prepared& prepared, const ad::Var& coeffs, ad::Var* flow_out = nullptr) const;
  Frame render_frame(const Prepared& prepared, const Eigen::VectorXd& coeffs) const;

  // G with an explicit style, content pyramid and flow; skips only when
  // use_skips is set. Refinement follows the model config.
  Frame synthesize(const StyleCode& w, const std::vector<FeatureMap>& content,
                   const FlowField& flow, bool use_skips) const;

  // Freezes E_s and G (including ModRes).
  void freeze_inversion();

  const StyleAConfig& config() const { return config_; }
  StyleEncoder& style_encoder() { return style_encoder_; }
  Generator& generator() { return generator_; }
  ContentEncoder& content_encoder() { return content_encoder_; }
  MotionGenerator& motion_generator() { return motion_generator_; }
  Refiner& refiner() { return refiner_; }
  Discriminator& discriminator() { return discriminator_; }
  const StyleEncoder& style_encoder() const { return style_encoder_; }
  const Generator& generator() const { return generator_; }
  const ContentEncoder& content_encoder() const { return content_encoder_; }
  const MotionGenerator& motion_generator() const { return motion_generator_; }
  const Refiner& refiner() const { return refiner_; }
  const Discriminator& discriminator() const { return discriminator_; }

  // (group name, store) for checkpointing.
  std::vector<std::pair<std::string, nn::ParamStore*>> groups();

 private:
  ad::Var synthesize_var(const ad::Var& w, const std::vector<ad::Var>* content,
                         const ad::Var* flow, bool use_skips) const;

  StyleAConfig config_;
  StyleEncoder style_encoder_;
  Generator generator_;
  ContentEncoder content_encoder_;
  MotionGenerator motion_generator_;
  Refiner refiner_;
  Discriminator discriminator_;
};

}  // namespace facestyle
