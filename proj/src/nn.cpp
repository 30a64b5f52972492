#include "facestyle/nn.hpp"

#include <cmath>

#include "facestyle/error.hpp"

namespace facestyle::nn {

Var ParamStore::add_normal(const std::string& name, ad::Shape shape, double stddev, Rng& rng) {
  ad::Array v(ad::numel(shape));
  for (auto& x : v) x = stddev * normal(rng);
  Var p = Var::parameter(std::move(v), std::move(shape));
  p.set_requires_grad(trainable_);
  params_.push_back({prefix_ + name, p});
  return p;
}

Var ParamStore::add_constant(const std::string& name, ad::Shape shape, double value) {
  const int n = ad::numel(shape);
  Var p = Var::parameter(ad::Array::Constant(n, value), std::move(shape));
  p.set_requires_grad(trainable_);
  params_.push_back({prefix_ + name, p});
  return p;
}

std::vector<Var> ParamStore::vars() const {
  std::vector<Var> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var);
  return out;
}

std::int64_t ParamStore::count() const {
  std::int64_t n = 0;
  for (const auto& p : params_) n += p.var.size();
  return n;
}

void ParamStore::set_trainable(bool trainable) {
  trainable_ = trainable;
  for (auto& p : params_) {
    Var v = p.var;
    v.set_requires_grad(trainable);
    v.zero_grad();
  }
}

void ParamStore::zero_grad() {
  for (auto& p : params_) {
    Var v = p.var;
    v.zero_grad();
  }
}

std::uint64_t ParamStore::hash() const {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const auto& p : params_) {
    h = fnv1a64(p.var.value().data(), sizeof(double) * p.var.size(), h);
  }
  return h;
}

ad::Array ParamStore::flatten() const {
  ad::Array flat(count());
  Eigen::Index off = 0;
  for (const auto& p : params_) {
    flat.segment(off, p.var.size()) = p.var.value();
    off += p.var.size();
  }
  return flat;
}

void ParamStore::assign(const ad::Array& flat) {
  if (flat.size() != count()) {
    throw ShapeError("parameter blob for '" + prefix_ + "' has " + std::to_string(flat.size()) +
                     " values, expected " + std::to_string(count()));
  }
  Eigen::Index off = 0;
  for (auto& p : params_) {
    Var v = p.var;
    v.mutable_value() = flat.segment(off, v.size());
    off += v.size();
  }
}

Linear::Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
               bool zero_init)
    : in_(in), out_(out) {
  const double std_dev = zero_init ? 0.0 : std::sqrt(1.0 / in);
  weight_ = store.add_normal(name + ".weight", {in, out}, std_dev, rng);
  bias_ = store.add_constant(name + ".bias", {out}, 0.0);
}

Var Linear::operator()(const Var& x) const {
  return ad::add_row_bias(ad::matmul(x, weight_), bias_);
}

Conv2d::Conv2d(ParamStore& store, const std::string& name, int in, int out, int kernel,
               int stride, Rng& rng, bool zero_init)
    : in_(in), out_(out), kernel_(kernel), stride_(stride) {
  const double std_dev = zero_init ? 0.0 : std::sqrt(2.0 / (in * kernel * kernel));
  weight_ = store.add_normal(name + ".weight", {out, in, kernel, kernel}, std_dev, rng);
  bias_ = store.add_constant(name + ".bias", {out}, 0.0);
}

Var Conv2d::operator()(const Var& x) const {
  return ad::conv2d(x, weight_, bias_, stride_, kernel_ / 2);
}

Adam::Adam(std::vector<const ParamStore*> stores, AdamOptions options) : options_(options) {
  for (const ParamStore* s : stores) {
    if (!s->trainable()) {
      throw InvariantError("optimizer given frozen parameters '" + s->prefix() + "'");
    }
    for (const auto& p : s->parameters()) {
      params_.push_back(p.var);
      m_.push_back(ad::Array::Zero(p.var.size()));
      v_.push_back(ad::Array::Zero(p.var.size()));
    }
  }
}

double Adam::step() {
  double sq = 0.0;
  for (const auto& p : params_) sq += p.grad().square().sum();
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) throw NumericError("non-finite gradient norm");
  const double clip =
      (options_.clip_norm > 0 && norm > options_.clip_norm) ? options_.clip_norm / norm : 1.0;

  ++step_;
  const double bc1 = 1.0 - std::pow(options_.beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(options_.beta2, static_cast<double>(step_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const ad::Array g = params_[i].grad() * clip;
    m_[i] = options_.beta1 * m_[i] + (1 - options_.beta1) * g;
    v_[i] = options_.beta2 * v_[i] + (1 - options_.beta2) * g.square();
    params_[i].mutable_value() -=
        options_.lr * (m_[i] / bc1) / ((v_[i] / bc2).sqrt() + options_.eps);
  }
  zero_grad();
  return norm;
}

void Adam::zero_grad() {
  for (auto& p : params_) p.zero_grad();
}

ad::Array Adam::state() const {
  Eigen::Index n = 1;
  for (const auto& m : m_) n += 2 * m.size();
  ad::Array s(n);
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    s.segment(off, m_[i].size()) = m_[i];
    off += m_[i].size();
    s.segment(off, v_[i].size()) = v_[i];
    off += v_[i].size();
  }
  s(off) = static_cast<double>(step_);
  return s;
}

void Adam::load_state(const ad::Array& state) {
  Eigen::Index n = 1;
  for (const auto& m : m_) n += 2 * m.size();
  if (state.size() != n) throw ShapeError("optimizer state size mismatch");
  Eigen::Index off = 0;
  for (std::size_t i = 0; i < m_.size(); ++i) {
    m_[i] = state.segment(off, m_[i].size());
    off += m_[i].size();
    v_[i] = state.segment(off, v_[i].size());
    off += v_[i].size();
  }
  step_ = static_cast<std::int64_t>(state(off));
}

}  // namespace facestyle::nn
