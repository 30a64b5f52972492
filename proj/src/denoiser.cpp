#include "facestyle/denoiser.hpp"

#include <cmath>

#include "facestyle/error.hpp"

namespace facestyle {

void DenoiserConfig::validate() const {
  if (hidden_width <= 0 || num_blocks < 0 || time_embed_dim <= 0 || sequence_length <= 0 ||
      d_exp <= 0 || condition_dim <= 0) {
    throw ConfigError("denoiser dimensions must be positive");
  }
  if (time_embed_dim % 2 != 0) throw ConfigError("time_embed_dim must be even");
}

nlohmann::json DenoiserConfig::to_json() const {
  return {{"hidden_width", hidden_width},     {"num_blocks", num_blocks},
          {"time_embed_dim", time_embed_dim}, {"sequence_length", sequence_length},
          {"d_exp", d_exp},                   {"condition_dim", condition_dim}};
}

DenoiserConfig DenoiserConfig::from_json(const nlohmann::json& j) {
  DenoiserConfig c;
  c.hidden_width = j.value("hidden_width", c.hidden_width);
  c.num_blocks = j.value("num_blocks", c.num_blocks);
  c.time_embed_dim = j.value("time_embed_dim", c.time_embed_dim);
  c.sequence_length = j.value("sequence_length", c.sequence_length);
  c.d_exp = j.value("d_exp", c.d_exp);
  c.condition_dim = j.value("condition_dim", c.condition_dim);
  c.validate();
  return c;
}

Eigen::VectorXd timestep_embedding(int t, int dim) {
  const int half = dim / 2;
  Eigen::VectorXd e(dim);
  for (int i = 0; i < half; ++i) {
    const double w = std::pow(10000.0, -static_cast<double>(i) / half);
    e(i) = std::sin(t * w);
    e(half + i) = std::cos(t * w);
  }
  return e;
}

Denoiser::Denoiser(const DenoiserConfig& config, std::uint64_t seed)
    : config_(config), params_("denoiser.") {
  config_.validate();
  Rng rng(seed);
  const int w = config_.hidden_width, n = config_.sequence_length;
  input_ = nn::Linear(params_, "input", config_.d_exp + config_.time_embed_dim + config_.condition_dim,
                      w, rng);
  for (int b = 0; b < config_.num_blocks; ++b) {
    const std::string name = "block" + std::to_string(b) + ".";
    Block block;
    block.inner = nn::Linear(params_, name + "inner", w, w, rng);
    block.outer = nn::Linear(params_, name + "outer", w, w, rng);
    block.mix = params_.add_normal(name + "mix", {n, n}, 0.1 / std::sqrt(n), rng);
    block.position = params_.add_constant(name + "position", {n, w}, 0.0);
    blocks_.push_back(std::move(block));
  }
  output_ = nn::Linear(params_, "output", w, config_.d_exp, rng, /*zero_init=*/true);
}

ad::Var Denoiser::forward(const ad::Var& noisy, const ConditionVector& condition, int t) const {
  const int n = config_.sequence_length;
  if (noisy.shape() != ad::Shape{n, config_.d_exp}) {
    throw ShapeError("denoiser input " + ad::shape_string(noisy.shape()) + ", expected (" +
                     std::to_string(n) + ", " + std::to_string(config_.d_exp) + ")");
  }
  if (condition.fused_dim() != config_.condition_dim) {
    throw ShapeError("condition has " + std::to_string(condition.fused_dim()) +
                     " features per frame, denoiser expects " + std::to_string(config_.condition_dim));
  }
  if (condition.frames() != n) {
    throw ShapeError("condition covers " + std::to_string(condition.frames()) + " frames, expected " +
                     std::to_string(n));
  }
  ad::RowMatrix side(n, config_.time_embed_dim + config_.condition_dim);
  side.leftCols(config_.time_embed_dim).rowwise() =
      timestep_embedding(t, config_.time_embed_dim).transpose();
  side.rightCols(config_.condition_dim) = condition.fused();
  ad::Var side_var = ad::Var::constant(Eigen::Map<ad::Array>(side.data(), side.size()),
                                       {n, static_cast<int>(side.cols())});

  ad::Var h = input_(ad::concat_cols({noisy, side_var}));
  for (const Block& b : blocks_) {
    h = h + b.outer(ad::silu(b.inner(h)));
    h = h + ad::matmul(b.mix, h) + b.position;
  }
  return output_(h);
}

Eigen::MatrixXd Denoiser::denoise(const Eigen::MatrixXd& noisy, const ConditionVector& condition,
                                  int t) const {
  ad::RowMatrix rm = noisy;
  ad::Var x = ad::Var::constant(Eigen::Map<ad::Array>(rm.data(), rm.size()),
                                {static_cast<int>(rm.rows()), static_cast<int>(rm.cols())});
  return forward(x, condition, t).matrix();
}

DenoiseFn Denoiser::as_function() const {
  return [this](const ad::Var& noisy, const ConditionVector& c, int t) { return forward(noisy, c, t); };
}

std::int64_t Denoiser::block_parameter_count(const DenoiserConfig& c) {
  const std::int64_t w = c.hidden_width, n = c.sequence_length;
  return 2 * nn::Linear::parameter_count(c.hidden_width, c.hidden_width) + n * n + n * w;
}

std::int64_t Denoiser::parameter_count(const DenoiserConfig& c) {
  c.validate();
  return nn::Linear::parameter_count(c.d_exp + c.time_embed_dim + c.condition_dim, c.hidden_width) +
         c.num_blocks * block_parameter_count(c) +
         nn::Linear::parameter_count(c.hidden_width, c.d_exp);
}

}  // namespace facestyle
