#pragma once

// Reconstruction + perceptual loss for stylized frames and the adversarial
// objective.

#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <vector>

#include "facestyle/coeffspace.hpp"
#include "facestyle/nn.hpp"

namespace facestyle {

inline constexpr double kDefaultPerceptualWeight = 0.1;

// Fixed feature extractor standing in for a pretrained perceptual network.
class PerceptualBackbone {
 public:
  virtual ~PerceptualBackbone() = default;
  virtual std::string name() const = 0;
  // (3, H, W) -> one feature map per level.
  virtual std::vector<ad::Var> features(const ad::Var& image) const = 0;
};

// `depth` stride-2 3x3 convolutions with ReLU and frozen He-normal weights.
class RandomConvBackbone : public PerceptualBackbone {
 public:
  RandomConvBackbone(std::uint64_t seed, int depth, int channels = 8);
  std::string name() const override { return "random-conv"; }
  std::vector<ad::Var> features(const ad::Var& image) const override;

 private:
  nn::ParamStore params_{"backbone."};
  std::vector<nn::Conv2d> convs_;
};

std::unique_ptr<PerceptualBackbone> fixed_random_backbone(std::uint64_t seed, int depth);

struct Style2Loss {
  ad::Var rec;    // RMS pixel distance
  ad::Var prec;   // sum over levels of the mean absolute feature difference
  ad::Var total;  // rec + lambda * prec
};

Style2Loss style2_loss(const ad::Var& pred, const ad::Var& target,
                       const PerceptualBackbone& backbone,
                       double lambda = kDefaultPerceptualWeight);
double style2_loss(const Frame& pred, const Frame& target, const PerceptualBackbone& backbone,
                   double lambda = kDefaultPerceptualWeight);

// sqrt(mean((a - b)^2)); the pixel term alone.
ad::Var reconstruction_loss(const ad::Var& pred, const ad::Var& target);

using DiscriminatorFn = std::function<ad::Var(const ad::Var& image)>;

struct AdversarialLoss {
  ad::Var disc;  // -[log D(real) + log(1 - D(fake))]
  ad::Var gen;   // -log D(fake)
};

// Probabilities are clamped to [1e-7, 1 - 1e-7] before the logs; a value
// outside [0, 1] or NaN raises NumericError.
AdversarialLoss adversarial_losses(const DiscriminatorFn& disc, const ad::Var& real,
                                   const ad::Var& fake);

}  // namespace facestyle
