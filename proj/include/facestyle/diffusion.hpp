#pragma once

// Forward noising, the x0-prediction training objective and the
// deterministic DDIM sampler over coefficient sequences.

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <functional>
#include <nlohmann/json.hpp>
#include <vector>

#include "facestyle/autodiff.hpp"
#include "facestyle/conditioning.hpp"
#include "facestyle/error.hpp"

namespace facestyle {

enum class ScheduleKind { kLinear, kCosine, kCustom };

struct NoiseSchedule {
  ScheduleKind kind = ScheduleKind::kLinear;
  double beta_start = 1e-4;
  double beta_end = 2e-2;
  Eigen::ArrayXd alphas;      // alphas(t - 1) for t in [1, T]
  Eigen::ArrayXd alpha_bars;  // cumulative products

  int steps() const { return static_cast<int>(alphas.size()); }
  // Defined for t in [0, T]; alpha_bar(0) = 1.
  double alpha_bar(int t) const;

  // Arbitrary per-step alphas in (0, 1].
  static NoiseSchedule from_alphas(const Eigen::ArrayXd& alphas);

  nlohmann::json descriptor() const;
  static NoiseSchedule from_descriptor(const nlohmann::json& j);
};

std::string schedule_kind_name(ScheduleKind k);
ScheduleKind schedule_kind_from_name(const std::string& name);

// linear: betas evenly spaced on [beta_start, beta_end] (beta_start alone
// when T = 1). cosine: squared-cosine alpha_bar with offset 0.008 and betas
// capped at 0.999.
NoiseSchedule make_schedule(int steps, ScheduleKind kind, double beta_start = 1e-4,
                            double beta_end = 2e-2);

// sqrt(alpha_bar_t) * clean + sqrt(1 - alpha_bar_t) * noise.
template <typename DerivedClean, typename DerivedNoise>
typename DerivedClean::PlainObject q_sample(const Eigen::MatrixBase<DerivedClean>& clean, int t,
                                            const NoiseSchedule& schedule,
                                            const Eigen::MatrixBase<DerivedNoise>& noise) {
  if (t < 1 || t > schedule.steps()) {
    throw IndexError("diffusion step " + std::to_string(t) + " outside [1, " +
                     std::to_string(schedule.steps()) + "]");
  }
  if (clean.rows() != noise.rows() || clean.cols() != noise.cols()) {
    throw ShapeError("q_sample: clean and noise shapes differ");
  }
  using Scalar = typename DerivedClean::Scalar;
  const double ab = schedule.alpha_bar(t);
  return Scalar(std::sqrt(ab)) * clean + Scalar(std::sqrt(1.0 - ab)) * noise.template cast<Scalar>();
}

// B sequences with their diffusion steps and noise draws.
struct DiffusionBatch {
  std::vector<Eigen::MatrixXd> clean;
  std::vector<int> t;
  std::vector<Eigen::MatrixXd> noise;

  int size() const { return static_cast<int>(clean.size()); }
  // Throws ShapeError/IndexError on inconsistent members.
  void validate(int steps) const;
};

// Predicts the clean sequence from (noisy, condition, t).
using DenoiseFn =
    std::function<ad::Var(const ad::Var& noisy, const ConditionVector& condition, int t)>;

// Mean squared error between clean sequences and the denoiser's predictions
// on q_sample outputs, averaged over B * N * D elements.
ad::Var training_loss(const DenoiseFn& denoiser, const DiffusionBatch& batch,
                      const std::vector<ConditionVector>& conditions,
                      const NoiseSchedule& schedule);

// Evenly spaced descending steps in [1, T], always starting at T.
std::vector<int> ddim_timesteps(int steps, int num_steps);

// Deterministic (eta = 0) DDIM for x0-prediction, starting from seeded
// N(0, I) noise. Runs exactly num_steps denoiser evaluations and returns the
// final clean estimate.
Eigen::MatrixXd ddim_sample(const DenoiseFn& denoiser, const ConditionVector& condition,
                            const NoiseSchedule& schedule, int num_steps, std::uint64_t seed,
                            int frames, int dim);

}  // namespace facestyle
