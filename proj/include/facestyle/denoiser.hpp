#pragma once

// Residual MLP that predicts a clean coefficient sequence from a noisy one,
// the condition and the diffusion step.
//
// Each frame token [x_n, time_embedding(t), c_n] is projected to the hidden
// width, passed through blocks of
//     h <- h + W2 silu(W1 h + b1) + b2     (per frame, shared weights)
//     h <- h + M h + P                     (mixing across the N frames)
// and projected back to D_exp by a zero-initialized output layer.

#include <Eigen/Dense>
#include <cstdint>
#include <nlohmann/json.hpp>
#include <vector>

#include "facestyle/conditioning.hpp"
#include "facestyle/diffusion.hpp"
#include "facestyle/nn.hpp"

namespace facestyle {

struct DenoiserConfig {
  int hidden_width = 128;
  int num_blocks = 3;
  int time_embed_dim = 64;
  int sequence_length = 32;
  int d_exp = kDefaultExpressionDim;
  int condition_dim = kDefaultTextDim + kDefaultIdentityDim + kDefaultAudioDim;

  void validate() const;
  nlohmann::json to_json() const;
  static DenoiserConfig from_json(const nlohmann::json& j);
};

// Sinusoidal embedding [sin(t w_i), cos(t w_i)] with w_i = 10000^(-i / (dim/2)).
Eigen::VectorXd timestep_embedding(int t, int dim);

class Denoiser {
 public:
  Denoiser(const DenoiserConfig& config, std::uint64_t seed);

  // noisy: (N, D_exp) -> predicted clean sequence (N, D_exp).
  ad::Var forward(const ad::Var& noisy, const ConditionVector& condition, int t) const;
  Eigen::MatrixXd denoise(const Eigen::MatrixXd& noisy, const ConditionVector& condition,
                          int t) const;
  DenoiseFn as_function() const;

  const DenoiserConfig& config() const { return config_; }
  nn::ParamStore& params() { return params_; }
  const nn::ParamStore& params() const { return params_; }

  static std::int64_t parameter_count(const DenoiserConfig& config);
  static std::int64_t block_parameter_count(const DenoiserConfig& config);

 private:
  struct Block {
    nn::Linear inner, outer;
    ad::Var mix, position;
  };

  DenoiserConfig config_;
  nn::ParamStore params_;
  nn::Linear input_;
  std::vector<Block> blocks_;
  nn::Linear output_;
};

}  // namespace facestyle
