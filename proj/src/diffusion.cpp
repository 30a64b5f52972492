#include "facestyle/diffusion.hpp"

#include <algorithm>
#include <numbers>

#include "facestyle/random.hpp"

namespace facestyle {

double NoiseSchedule::alpha_bar(int t) const {
  if (t == 0) return 1.0;
  if (t < 0 || t > steps()) throw IndexError("alpha_bar index " + std::to_string(t));
  return alpha_bars(t - 1);
}

NoiseSchedule NoiseSchedule::from_alphas(const Eigen::ArrayXd& alphas) {
  if (alphas.size() < 1) throw ConfigError("schedule needs at least one step");
  if ((alphas <= 0.0).any() || (alphas > 1.0).any()) {
    throw ConfigError("schedule alphas must lie in (0, 1]");
  }
  NoiseSchedule s;
  s.kind = ScheduleKind::kCustom;
  s.alphas = alphas;
  s.alpha_bars.resize(alphas.size());
  double prod = 1.0;
  for (Eigen::Index i = 0; i < alphas.size(); ++i) {
    prod *= alphas(i);
    s.alpha_bars(i) = prod;
  }
  return s;
}

std::string schedule_kind_name(ScheduleKind k) {
  switch (k) {
    case ScheduleKind::kLinear: return "linear";
    case ScheduleKind::kCosine: return "cosine";
    case ScheduleKind::kCustom: return "custom";
  }
  return "custom";
}

ScheduleKind schedule_kind_from_name(const std::string& name) {
  if (name == "linear") return ScheduleKind::kLinear;
  if (name == "cosine") return ScheduleKind::kCosine;
  throw ConfigError("unknown schedule kind '" + name + "'");
}

NoiseSchedule make_schedule(int steps, ScheduleKind kind, double beta_start, double beta_end) {
  if (steps < 1) throw ConfigError("diffusion steps must be >= 1");
  Eigen::ArrayXd alphas(steps);
  switch (kind) {
    case ScheduleKind::kLinear: {
      if (!(beta_start > 0 && beta_end < 1 && beta_start <= beta_end)) {
        throw ConfigError("linear schedule endpoints must satisfy 0 < start <= end < 1");
      }
      const Eigen::ArrayXd betas =
          steps == 1 ? Eigen::ArrayXd(Eigen::ArrayXd::Constant(1, beta_start))
                     : Eigen::ArrayXd(Eigen::ArrayXd::LinSpaced(steps, beta_start, beta_end));
      alphas = 1.0 - betas;
      break;
    }
    case ScheduleKind::kCosine: {
      constexpr double s = 0.008;
      auto f = [&](int t) {
        const double x = (static_cast<double>(t) / steps + s) / (1 + s) * std::numbers::pi / 2;
        return std::cos(x) * std::cos(x);
      };
      for (int t = 1; t <= steps; ++t) {
        alphas(t - 1) = 1.0 - std::min(1.0 - f(t) / f(t - 1), 0.999);
      }
      break;
    }
    case ScheduleKind::kCustom:
      throw ConfigError("custom schedules are built with NoiseSchedule::from_alphas");
  }
  NoiseSchedule out = NoiseSchedule::from_alphas(alphas);
  out.kind = kind;
  out.beta_start = beta_start;
  out.beta_end = beta_end;
  return out;
}

nlohmann::json NoiseSchedule::descriptor() const {
  nlohmann::json j = {{"kind", schedule_kind_name(kind)}, {"T", steps()}};
  if (kind == ScheduleKind::kCustom) {
    j["alphas"] = std::vector<double>(alphas.data(), alphas.data() + alphas.size());
  } else {
    j["beta_start"] = beta_start;
    j["beta_end"] = beta_end;
  }
  return j;
}

NoiseSchedule NoiseSchedule::from_descriptor(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "custom") {
    const auto a = j.at("alphas").get<std::vector<double>>();
    return from_alphas(Eigen::Map<const Eigen::ArrayXd>(a.data(), static_cast<Eigen::Index>(a.size())));
  }
  return make_schedule(j.at("T").get<int>(), schedule_kind_from_name(kind),
                       j.value("beta_start", 1e-4), j.value("beta_end", 2e-2));
}

void DiffusionBatch::validate(int steps) const {
  if (clean.empty()) throw ShapeError("empty diffusion batch");
  if (t.size() != clean.size() || noise.size() != clean.size()) {
    throw ShapeError("diffusion batch members have different lengths");
  }
  for (int b = 0; b < size(); ++b) {
    if (clean[b].rows() != clean[0].rows() || clean[b].cols() != clean[0].cols() ||
        noise[b].rows() != clean[b].rows() || noise[b].cols() != clean[b].cols()) {
      throw ShapeError("diffusion batch item " + std::to_string(b) + " has inconsistent shape");
    }
    if (t[b] < 1 || t[b] > steps) throw IndexError("batch step out of range");
  }
}

ad::Var training_loss(const DenoiseFn& denoiser, const DiffusionBatch& batch,
                      const std::vector<ConditionVector>& conditions,
                      const NoiseSchedule& schedule) {
  batch.validate(schedule.steps());
  if (conditions.size() != batch.clean.size()) {
    throw ShapeError("one condition per batch item is required");
  }
  const int n = static_cast<int>(batch.clean[0].rows());
  const int d = static_cast<int>(batch.clean[0].cols());
  ad::Var total;
  for (int b = 0; b < batch.size(); ++b) {
    const Eigen::MatrixXd noisy = q_sample(batch.clean[b], batch.t[b], schedule, batch.noise[b]);
    ad::RowMatrix noisy_rm = noisy;
    ad::RowMatrix clean_rm = batch.clean[b];
    ad::Var x = ad::Var::constant(Eigen::Map<ad::Array>(noisy_rm.data(), noisy_rm.size()), {n, d});
    ad::Var target =
        ad::Var::constant(Eigen::Map<ad::Array>(clean_rm.data(), clean_rm.size()), {n, d});
    ad::Var pred = denoiser(x, conditions[b], batch.t[b]);
    if (pred.shape() != target.shape()) {
      throw ShapeError("denoiser returned " + ad::shape_string(pred.shape()) + ", expected " +
                       ad::shape_string(target.shape()));
    }
    ad::Var err = ad::sum(ad::square(pred - target));
    total = total.defined() ? total + err : err;
  }
  return ad::scale(total, 1.0 / (static_cast<double>(batch.size()) * n * d));
}

std::vector<int> ddim_timesteps(int steps, int num_steps) {
  if (num_steps < 1 || num_steps > steps) {
    throw ConfigError("sampling steps " + std::to_string(num_steps) + " outside [1, " +
                      std::to_string(steps) + "]");
  }
  std::vector<int> ts;
  ts.reserve(num_steps);
  for (int i = num_steps; i >= 1; --i) {
    ts.push_back(static_cast<int>(std::llround(static_cast<double>(steps) * i / num_steps)));
  }
  return ts;
}

Eigen::MatrixXd ddim_sample(const DenoiseFn& denoiser, const ConditionVector& condition,
                            const NoiseSchedule& schedule, int num_steps, std::uint64_t seed,
                            int frames, int dim) {
  const std::vector<int> ts = ddim_timesteps(schedule.steps(), num_steps);
  Rng rng(seed);
  ad::RowMatrix x(frames, dim);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = normal(rng);

  ad::RowMatrix x0;
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const int t = ts[i];
    const int t_next = i + 1 < ts.size() ? ts[i + 1] : 0;
    ad::Var in = ad::Var::constant(Eigen::Map<ad::Array>(x.data(), x.size()), {frames, dim});
    ad::Var pred = denoiser(in, condition, t);
    if (pred.shape() != ad::Shape{frames, dim}) throw ShapeError("denoiser output shape");
    x0 = pred.matrix();
    if (!x0.allFinite()) throw NumericError("denoiser produced non-finite values at step " + std::to_string(t));

    const double ab = schedule.alpha_bar(t);
    const double ab_next = schedule.alpha_bar(t_next);
    const double noise_scale = std::sqrt(1.0 - ab);
    ad::RowMatrix eps = noise_scale > 1e-12 ? ad::RowMatrix((x - std::sqrt(ab) * x0) / noise_scale)
                                            : ad::RowMatrix::Zero(frames, dim);
    if (t_next == 0) {
      x = x0;
    } else {
      x = std::sqrt(ab_next) * x0 + std::sqrt(1.0 - ab_next) * eps;
    }
  }
  return x;
}

}  // namespace facestyle
