#include "facestyle/stylea.hpp"

#include <cmath>

#include "facestyle/error.hpp"
#include "facestyle/random.hpp"

namespace facestyle {

namespace {

int log2_exact(int v) {
  int n = 0;
  while ((1 << n) < v) ++n;
  return n;
}

ad::Var centered(const ad::Var& image) { return ad::scale(ad::add_scalar(image, -0.5), 2.0); }

ad::Var flatten_row(const ad::Var& x) { return ad::reshape(x, {1, x.size()}); }

std::uint64_t network_seed(std::uint64_t seed, const char* name) {
  return derive_seed(seed, fnv1a64(name));
}

}  // namespace

ad::Var to_var(const FeatureMap& m) {
  return ad::Var::constant(m.values, {m.shape.channels, m.shape.height, m.shape.width});
}

FeatureMap to_feature_map(const ad::Var& v) {
  if (v.shape().size() != 3) throw ShapeError("feature map must be (C, H, W)");
  return {{v.dim(0), v.dim(1), v.dim(2)}, v.value()};
}

ad::Var to_var(const FlowField& f) {
  return ad::Var::constant(f.displacement, {f.height, f.width, 2});
}

FlowField to_flow_field(const ad::Var& v) {
  if (v.shape().size() != 3 || v.dim(2) != 2) throw ShapeError("flow must be (H, W, 2)");
  return {v.dim(0), v.dim(1), v.value()};
}

ad::Var to_var(const StyleCode& w) {
  return ad::Var::constant(Eigen::Map<const ad::Array>(w.values.data(), w.values.size()),
                           {w.layers(), w.dim()});
}

StyleCode to_style_code(const ad::Var& v) {
  if (v.shape().size() != 2) throw ShapeError("style code must be (L, d_w)");
  return {v.matrix()};
}

ad::Var image_var(const Frame& frame) {
  return ad::Var::constant(frame.pixels, {3, frame.height, frame.width});
}

Frame var_to_frame(const ad::Var& image) {
  if (image.shape().size() != 3 || image.dim(0) != 3) throw ShapeError("image must be (3, H, W)");
  Frame f;
  f.height = image.dim(1);
  f.width = image.dim(2);
  f.pixels = image.value();
  return f;
}

int StyleAConfig::num_blocks() const { return log2_exact(resolution) - 2; }

int StyleAConfig::warp_res() const {
  return warp_resolution > 0 ? warp_resolution : std::min(64, resolution / 4);
}

int StyleAConfig::skip_count() const { return log2_exact(resolution / warp_res()) + 1; }

void StyleAConfig::validate() const {
  if (!is_supported_resolution(resolution)) {
    throw ConfigError("style resolution must be 32, 64, 128 or 256");
  }
  const int w = warp_res();
  if (w < 8 || w > resolution || (w & (w - 1)) != 0) {
    throw ConfigError("warp resolution must be a power of two in [8, resolution]");
  }
  if (channels <= 0 || style_dim <= 0 || d_exp <= 0) {
    throw ConfigError("style network widths must be positive");
  }
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("blend must lie in [0, 1]");
  if (!(eps > 0)) throw ConfigError("eps must be positive");
}

nlohmann::json StyleAConfig::to_json() const {
  return {{"resolution", resolution}, {"channels", channels},   {"style_dim", style_dim},
          {"d_exp", d_exp},           {"warp_resolution", warp_res()},
          {"use_skips", use_skips},   {"use_refine", use_refine}, {"blend", blend},
          {"eps", eps}};
}

StyleAConfig StyleAConfig::from_json(const nlohmann::json& j) {
  StyleAConfig c;
  c.resolution = j.value("resolution", c.resolution);
  c.channels = j.value("channels", c.channels);
  c.style_dim = j.value("style_dim", c.style_dim);
  c.d_exp = j.value("d_exp", c.d_exp);
  c.warp_resolution = j.value("warp_resolution", c.warp_resolution);
  c.use_skips = j.value("use_skips", c.use_skips);
  c.use_refine = j.value("use_refine", c.use_refine);
  c.blend = j.value("blend", c.blend);
  c.eps = j.value("eps", c.eps);
  c.validate();
  return c;
}

// ---------------------------------------------------------------------------

StyleEncoder::StyleEncoder(const StyleAConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.channels;
  convs_.emplace_back(params_, "conv0", 3, c, 3, 1, rng);
  for (int r = config_.resolution, i = 1; r > 4; r /= 2, ++i) {
    convs_.emplace_back(params_, "conv" + std::to_string(i), c, c, 3, 2, rng);
  }
  head_ = nn::Linear(params_, "head", c * 16, config_.num_layers() * config_.style_dim, rng);
}

ad::Var StyleEncoder::forward(const ad::Var& image) const {
  if (image.shape() != ad::Shape{3, config_.resolution, config_.resolution}) {
    throw ShapeError("style encoder input " + ad::shape_string(image.shape()));
  }
  ad::Var h = centered(image);
  for (const auto& conv : convs_) h = ad::leaky_relu(conv(h));
  return ad::reshape(head_(flatten_row(h)), {config_.num_layers(), config_.style_dim});
}

StyleCode StyleEncoder::encode(const Frame& frame) const {
  return to_style_code(forward(image_var(frame)));
}

// ---------------------------------------------------------------------------

Generator::Generator(const StyleAConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.channels, d = config_.style_dim;
  constant_ = params_.add_normal("constant", {c, 4, 4}, 1.0, rng);
  for (int l = 0; l < config_.num_layers(); ++l) {
    const std::string name = "layer" + std::to_string(l);
    layers_.push_back({nn::Conv2d(params_, name + ".conv", c, c, 3, 1, rng),
                       nn::Linear(params_, name + ".scale", d, c, rng),
                       nn::Linear(params_, name + ".bias", d, c, rng)});
  }
  to_rgb_ = nn::Conv2d(params_, "to_rgb", c, 3, 1, 1, rng);
  modres_hidden_ = nn::Linear(params_, "modres.hidden", 2 * d, d, rng);
  modres_out_ = nn::Linear(params_, "modres.out", d, d, rng, /*zero_init=*/true);
}

ad::Var Generator::modres(const ad::Var& w_i, const ad::Var& w_s, double blend) const {
  if (w_i.shape() != w_s.shape()) {
    throw ShapeError("modres: " + ad::shape_string(w_i.shape()) + " vs " +
                     ad::shape_string(w_s.shape()));
  }
  if (w_i.shape() != ad::Shape{config_.num_layers(), config_.style_dim}) {
    throw ShapeError("modres: style code " + ad::shape_string(w_i.shape()));
  }
  if (!(blend >= 0.0 && blend <= 1.0)) throw ConfigError("blend must lie in [0, 1]");
  if (blend == 0.0) return w_i;
  const ad::Var r = modres_out_(ad::leaky_relu(modres_hidden_(ad::concat_cols({w_i, w_s}))));
  return w_i + r * blend;
}

StyleCode Generator::modres_merge(const StyleCode& w_i, const StyleCode& w_s, double blend) const {
  return to_style_code(modres(to_var(w_i), to_var(w_s), blend));
}

ad::Var Generator::modulate(const Layer& layer, const ad::Var& h, const ad::Var& w,
                            int index) const {
  const ad::Var style = ad::row(w, index);
  const ad::Var scale = ad::add_scalar(layer.to_scale(style), 1.0);
  const ad::Var bias = layer.to_bias(style);
  return ad::leaky_relu(ad::adain(layer.conv(h), scale, bias, config_.eps));
}

ad::Var Generator::synthesize(const ad::Var& w, const SynthesisHooks& hooks) const {
  if (w.shape() != ad::Shape{config_.num_layers(), config_.style_dim}) {
    throw ShapeError("generator expects a (" + std::to_string(config_.num_layers()) + ", " +
                     std::to_string(config_.style_dim) + ") style code, got " +
                     ad::shape_string(w.shape()));
  }
  ad::Var h = constant_;
  for (int b = 0; b < config_.num_blocks(); ++b) {
    h = ad::upsample2x(h);
    h = modulate(layers_[2 * b], h, w, 2 * b);
    h = modulate(layers_[2 * b + 1], h, w, 2 * b + 1);
    const int res = h.dim(1);
    if (res == config_.warp_res() && hooks.warp_layer) h = hooks.warp_layer(h);
    if (res >= config_.warp_res() && hooks.skip) h = hooks.skip(res, h);
  }
  return ad::sigmoid(to_rgb_(h));
}

// ---------------------------------------------------------------------------

ContentEncoder::ContentEncoder(const StyleAConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.channels;
  for (int l = 0; l < config_.skip_count(); ++l) {
    const std::string name = "level" + std::to_string(l);
    convs_.emplace_back(params_, name + ".conv", l == 0 ? 3 : c, c, 3, l == 0 ? 1 : 2, rng);
    projections_.emplace_back(params_, name + ".inject", c, c, 1, 1, rng, /*zero_init=*/true);
  }
}

std::vector<ad::Var> ContentEncoder::forward(const ad::Var& image) const {
  if (image.shape() != ad::Shape{3, config_.resolution, config_.resolution}) {
    throw ShapeError("content encoder input " + ad::shape_string(image.shape()) +
                     " does not match resolution " + std::to_string(config_.resolution));
  }
  std::vector<ad::Var> out;
  ad::Var h = centered(image);
  for (const auto& conv : convs_) {
    h = ad::leaky_relu(conv(h));
    out.push_back(h);
  }
  return out;
}

std::vector<FeatureMap> ContentEncoder::encode(const Frame& frame) const {
  std::vector<FeatureMap> out;
  for (const auto& v : forward(image_var(frame))) out.push_back(to_feature_map(v));
  return out;
}

ad::Var ContentEncoder::inject(int level, const ad::Var& feature) const {
  return projections_.at(level)(feature);
}

int ContentEncoder::level_for_resolution(int resolution) const {
  const int level = log2_exact(config_.resolution / resolution);
  if ((config_.resolution >> level) != resolution || level >= config_.skip_count()) {
    throw ShapeError("no content level at resolution " + std::to_string(resolution));
  }
  return level;
}

// ---------------------------------------------------------------------------

MotionGenerator::MotionGenerator(const StyleAConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.channels;
  encoder_.emplace_back(params_, "encoder0", 3, c, 3, 1, rng);
  int i = 1;
  for (int r = config_.resolution; r > config_.warp_res() / 2; r /= 2, ++i) {
    encoder_.emplace_back(params_, "encoder" + std::to_string(i), c, c, 3, 2, rng);
  }
  constexpr int kHidden = 128;
  coeff_in_ = nn::Linear(params_, "coeff.hidden", config_.d_exp, kHidden, rng);
  for (int l = 0; l < 2; ++l) {
    to_scale_.emplace_back(params_, "coeff.scale" + std::to_string(l), kHidden, c, rng);
    to_bias_.emplace_back(params_, "coeff.bias" + std::to_string(l), kHidden, c, rng);
  }
  decode_low_ = nn::Conv2d(params_, "decoder.low", c, c, 3, 1, rng);
  decode_high_ = nn::Conv2d(params_, "decoder.high", 2 * c, c, 3, 1, rng);
  to_flow_ = nn::Conv2d(params_, "decoder.flow", c, 2, 3, 1, rng, /*zero_init=*/true);
}

ad::Var MotionGenerator::coeff_hidden(const ad::Var& coeffs) const {
  if (coeffs.shape() != ad::Shape{1, config_.d_exp}) {
    throw ShapeError("motion generator expects (1, " + std::to_string(config_.d_exp) +
                     ") coefficients, got " + ad::shape_string(coeffs.shape()));
  }
  return ad::leaky_relu(coeff_in_(coeffs));
}

std::pair<ad::Var, ad::Var> MotionGenerator::adain_params(const ad::Var& hidden, int layer) const {
  return {ad::add_scalar(to_scale_.at(layer)(hidden), 1.0), to_bias_.at(layer)(hidden)};
}

ad::Var MotionGenerator::forward(const ad::Var& identity, const ad::Var& coeffs) const {
  if (identity.shape() != ad::Shape{3, config_.resolution, config_.resolution}) {
    throw ShapeError("motion generator identity " + ad::shape_string(identity.shape()));
  }
  const ad::Var hidden = coeff_hidden(coeffs);
  ad::Var h = centered(identity);
  ad::Var at_warp;
  for (const auto& conv : encoder_) {
    h = ad::leaky_relu(conv(h));
    if (h.dim(1) == config_.warp_res()) at_warp = h;
  }
  const auto [s0, b0] = adain_params(hidden, 0);
  const auto [s1, b1] = adain_params(hidden, 1);
  h = ad::leaky_relu(ad::adain(decode_low_(h), s0, b0, config_.eps));
  h = ad::concat({ad::upsample2x(h), at_warp});
  h = ad::leaky_relu(ad::adain(decode_high_(h), s1, b1, config_.eps));
  return ad::planes_to_flow(to_flow_(h));
}

FlowField MotionGenerator::flow(const Frame& identity, const Eigen::VectorXd& coeffs) const {
  return to_flow_field(forward(image_var(identity),
                               ad::Var::constant(coeffs.array(), {1, static_cast<int>(coeffs.size())})));
}

AdaINParams MotionGenerator::coefficient_params(const Eigen::VectorXd& coeffs, int layer) const {
  const auto [s, b] = adain_params(
      coeff_hidden(ad::Var::constant(coeffs.array(), {1, static_cast<int>(coeffs.size())})), layer);
  return {s.value(), b.value()};
}

// ---------------------------------------------------------------------------

Refiner::Refiner(const StyleAConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.channels;
  in_ = nn::Conv2d(params_, "in", 2 * c, c, 3, 1, rng);
  out_ = nn::Conv2d(params_, "out", c, c, 3, 1, rng, /*zero_init=*/true);
}

ad::Var Refiner::forward(const ad::Var& m_hat, const ad::Var& context) const {
  if (m_hat.shape() != context.shape()) {
    throw ShapeError("refine: " + ad::shape_string(m_hat.shape()) + " vs context " +
                     ad::shape_string(context.shape()));
  }
  if (m_hat.shape().size() != 3 || m_hat.dim(0) != config_.channels) {
    throw ShapeError("refine: expected " + std::to_string(config_.channels) + " channels");
  }
  return m_hat + out_(ad::leaky_relu(in_(ad::concat({m_hat, context}))));
}

FeatureMap Refiner::refine(const FeatureMap& m_hat, const FeatureMap& context) const {
  return to_feature_map(forward(to_var(m_hat), to_var(context)));
}

// ---------------------------------------------------------------------------

Discriminator::Discriminator(const StyleAConfig& config, std::uint64_t seed) : config_(config) {
  config_.validate();
  Rng rng(seed);
  const int c = config_.channels;
  for (int i = 0; i < 4; ++i) {
    convs_.emplace_back(params_, "conv" + std::to_string(i), i == 0 ? 3 : c, c, 3, 2, rng);
  }
  const int side = config_.resolution / 16;
  head_ = nn::Linear(params_, "head", c * side * side, 1, rng);
}

ad::Var Discriminator::forward(const ad::Var& image) const {
  if (image.shape() != ad::Shape{3, config_.resolution, config_.resolution}) {
    throw ShapeError("discriminator input " + ad::shape_string(image.shape()));
  }
  ad::Var h = centered(image);
  for (const auto& conv : convs_) h = ad::leaky_relu(conv(h));
  return ad::sigmoid(head_(flatten_row(h)));
}

// ---------------------------------------------------------------------------

StyleAModel::StyleAModel(const StyleAConfig& config, std::uint64_t seed)
    : config_(config),
      style_encoder_(config, network_seed(seed, "style_encoder")),
      generator_(config, network_seed(seed, "generator")),
      content_encoder_(config, network_seed(seed, "content_encoder")),
      motion_generator_(config, network_seed(seed, "motion_generator")),
      refiner_(config, network_seed(seed, "refiner")),
      discriminator_(config, network_seed(seed, "discriminator")) {}

StyleAModel::Prepared StyleAModel::prepare(const Frame& identity, const Frame& art) const {
  Prepared p;
  p.identity = image_var(identity);
  const ad::Var w_i = style_encoder_.forward(p.identity);
  const ad::Var w_s = style_encoder_.forward(image_var(art));
  p.style = generator_.modres(w_i, w_s, config_.blend);
  if (config_.use_skips || config_.use_refine) p.content = content_encoder_.forward(p.identity);
  return p;
}

StyleAModel::Prepared StyleAModel::prepare(const Frame& identity, const ad::Var& style) const {
  Prepared p;
  p.identity = image_var(identity);
  p.style = style;
  if (config_.use_skips || config_.use_refine) p.content = content_encoder_.forward(p.identity);
  return p;
}

ad::Var StyleAModel::merged_style(const Frame& identity, const Frame& art) const {
  return generator_.modres(style_encoder_.forward(image_var(identity)),
                           style_encoder_.forward(image_var(art)), config_.blend);
}

ad::Var StyleAModel::synthesize_var(const ad::Var& w, const std::vector<ad::Var>* content,
                                    const ad::Var* flow, bool use_skips) const {
  SynthesisHooks hooks;
  const bool have_content = content && !content->empty();
  if (have_content && static_cast<int>(content->size()) != config_.skip_count()) {
    throw ShapeError("content pyramid has " + std::to_string(content->size()) + " levels, expected " +
                     std::to_string(config_.skip_count()));
  }
  hooks.warp_layer = [&](const ad::Var& m) {
    ad::Var m_hat = flow ? ad::warp(m, *flow) : m;
    if (config_.use_refine && have_content) {
      const int level = content_encoder_.level_for_resolution(config_.warp_res());
      m_hat = refiner_.forward(m_hat, (*content)[level]);
    }
    return m_hat;
  };
  if (use_skips && have_content) {
    hooks.skip = [&](int res, const ad::Var& h) {
      const int level = content_encoder_.level_for_resolution(res);
      return h + content_encoder_.inject(level, (*content)[level]);
    };
  }
  return generator_.synthesize(w, hooks);
}

ad::Var StyleAModel::render(const Prepared& prepared, const ad::Var& coeffs,
                            ad::Var* flow_out) const {
  const ad::Var flow = motion_generator_.forward(prepared.identity, coeffs);
  if (flow_out) *flow_out = flow;
  return synthesize_var(prepared.style, &prepared.content, &flow, config_.use_skips);
}

Frame StyleAModel::render_frame(const Prepared& prepared, const Eigen::VectorXd& coeffs) const {
  return var_to_frame(
      render(prepared, ad::Var::constant(coeffs.array(), {1, static_cast<int>(coeffs.size())})));
}

Frame StyleAModel::synthesize(const StyleCode& w, const std::vector<FeatureMap>& content,
                              const FlowField& flow, bool use_skips) const {
  std::vector<ad::Var> feats;
  for (const auto& f : content) feats.push_back(to_var(f));
  const ad::Var fv = to_var(flow);
  return var_to_frame(synthesize_var(to_var(w), &feats, &fv, use_skips));
}

void StyleAModel::freeze_inversion() {
  style_encoder_.params().set_trainable(false);
  generator_.params().set_trainable(false);
}

std::vector<std::pair<std::string, nn::ParamStore*>> StyleAModel::groups() {
  return {{"style_encoder", &style_encoder_.params()},
          {"generator", &generator_.params()},
          {"content_encoder", &content_encoder_.params()},
          {"motion_generator", &motion_generator_.params()},
          {"refiner", &refiner_.params()},
          {"discriminator", &discriminator_.params()}};
}

}  // namespace facestyle
