#include "facestyle/losses.hpp"

#include <cmath>

#include "facestyle/error.hpp"
#include "facestyle/stylea.hpp"

namespace facestyle {

namespace {

constexpr double kProbClamp = 1e-7;

ad::Var checked_probability(const ad::Var& p) {
  if (p.size() != 1) throw ShapeError("discriminator must return one probability");
  const double v = p.item();
  if (!(v >= 0.0 && v <= 1.0)) {
    throw NumericError("discriminator output " + std::to_string(v) + " is not a probability");
  }
  return p;
}

}  // namespace

RandomConvBackbone::RandomConvBackbone(std::uint64_t seed, int depth, int channels) {
  if (depth < 1) throw ConfigError("backbone depth must be >= 1");
  Rng rng(seed);
  for (int i = 0; i < depth; ++i) {
    convs_.emplace_back(params_, "conv" + std::to_string(i), i == 0 ? 3 : channels, channels, 3, 2,
                        rng);
  }
  params_.set_trainable(false);
}

std::vector<ad::Var> RandomConvBackbone::features(const ad::Var& image) const {
  std::vector<ad::Var> out;
  ad::Var h = image;
  for (const auto& conv : convs_) {
    if (h.dim(1) < 2) break;
    h = ad::relu(conv(h));
    out.push_back(h);
  }
  return out;
}

std::unique_ptr<PerceptualBackbone> fixed_random_backbone(std::uint64_t seed, int depth) {
  return std::make_unique<RandomConvBackbone>(seed, depth);
}

ad::Var reconstruction_loss(const ad::Var& pred, const ad::Var& target) {
  if (pred.shape() != target.shape()) {
    throw ShapeError("loss on " + ad::shape_string(pred.shape()) + " vs " +
                     ad::shape_string(target.shape()));
  }
  return ad::sqrt(ad::mean(ad::square(pred - target)));
}

Style2Loss style2_loss(const ad::Var& pred, const ad::Var& target,
                       const PerceptualBackbone& backbone, double lambda) {
  if (!(lambda >= 0)) throw ConfigError("perceptual weight must be >= 0");
  Style2Loss out;
  out.rec = reconstruction_loss(pred, target);
  const auto fp = backbone.features(pred);
  const auto ft = backbone.features(ad::detach(target));
  for (std::size_t i = 0; i < fp.size(); ++i) {
    const ad::Var term = ad::mean(ad::abs(fp[i] - ft[i]));
    out.prec = out.prec.defined() ? out.prec + term : term;
  }
  if (!out.prec.defined()) out.prec = ad::Var::scalar(0.0);
  out.total = out.rec + out.prec * lambda;
  return out;
}

double style2_loss(const Frame& pred, const Frame& target, const PerceptualBackbone& backbone,
                   double lambda) {
  if (pred.height != target.height || pred.width != target.width) {
    throw ShapeError("frames differ in size");
  }
  return style2_loss(image_var(pred), image_var(target), backbone, lambda).total.item();
}

AdversarialLoss adversarial_losses(const DiscriminatorFn& disc, const ad::Var& real,
                                   const ad::Var& fake) {
  if (real.shape() != fake.shape()) throw ShapeError("real and fake images differ in shape");
  const ad::Var d_real = checked_probability(disc(real));
  const ad::Var d_fake_detached = checked_probability(disc(ad::detach(fake)));
  const ad::Var d_fake = checked_probability(disc(fake));
  auto log_p = [](const ad::Var& p) { return ad::log_clamped(p, kProbClamp); };
  auto log_1mp = [](const ad::Var& p) {
    return ad::log_clamped(ad::add_scalar(ad::scale(p, -1.0), 1.0), kProbClamp);
  };
  AdversarialLoss out;
  out.disc = ad::scale(ad::sum(log_p(d_real) + log_1mp(d_fake_detached)), -1.0);
  out.gen = ad::scale(ad::sum(log_p(d_fake)), -1.0);
  return out;
}

}  // namespace facestyle
