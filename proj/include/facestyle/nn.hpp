#pragma once

// Parameter containers, layers and the Adam optimizer on top of autodiff.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "facestyle/autodiff.hpp"
#include "facestyle/random.hpp"

namespace facestyle::nn {

using ad::Var;

struct NamedParameter {
  std::string name;
  Var var;
};

// Ordered, named set of trainable tensors belonging to one network.
class ParamStore {
 public:
  explicit ParamStore(std::string prefix = {}) : prefix_(std::move(prefix)) {}

  // Gaussian init with the given standard deviation.
  Var add_normal(const std::string& name, ad::Shape shape, double stddev, Rng& rng);
  Var add_constant(const std::string& name, ad::Shape shape, double value);

  const std::vector<NamedParameter>& parameters() const { return params_; }
  std::vector<Var> vars() const;
  std::int64_t count() const;

  // Frozen stores build no gradient tape and are rejected by optimizers.
  void set_trainable(bool trainable);
  bool trainable() const { return trainable_; }
  void zero_grad();

  // FNV-1a over every parameter's raw bytes in registration order.
  std::uint64_t hash() const;

  // Flat concatenation of all values in registration order.
  ad::Array flatten() const;
  void assign(const ad::Array& flat);

  const std::string& prefix() const { return prefix_; }

 private:
  std::string prefix_;
  std::vector<NamedParameter> params_;
  bool trainable_ = true;
};

class Linear {
 public:
  Linear() = default;
  // zero_init zeroes both weight and bias.
  Linear(ParamStore& store, const std::string& name, int in, int out, Rng& rng,
         bool zero_init = false);
  // x: (rows, in) -> (rows, out)
  Var operator()(const Var& x) const;
  int in() const { return in_; }
  int out() const { return out_; }
  static std::int64_t parameter_count(int in, int out) {
    return static_cast<std::int64_t>(in) * out + out;
  }

 private:
  int in_ = 0, out_ = 0;
  Var weight_, bias_;
};

class Conv2d {
 public:
  Conv2d() = default;
  Conv2d(ParamStore& store, const std::string& name, int in, int out, int kernel, int stride,
         Rng& rng, bool zero_init = false);
  Var operator()(const Var& x) const;
  int out_channels() const { return out_; }

 private:
  int in_ = 0, out_ = 0, kernel_ = 1, stride_ = 1;
  Var weight_, bias_;
};

struct AdamOptions {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  // Global-norm gradient clip; <= 0 disables.
  double clip_norm = 0.0;
};

class Adam {
 public:
  // Throws InvariantError if any store is frozen.
  Adam(std::vector<const ParamStore*> stores, AdamOptions options);

  // Applies one update from the accumulated gradients, then clears them.
  // Returns the pre-clip global gradient norm.
  double step();
  void zero_grad();

  std::int64_t steps() const { return step_; }
  const AdamOptions& options() const { return options_; }
  void set_lr(double lr) { options_.lr = lr; }

  // Moment buffers followed by the step counter, for checkpoint resume.
  ad::Array state() const;
  void load_state(const ad::Array& state);

 private:
  std::vector<Var> params_;
  std::vector<ad::Array> m_, v_;
  AdamOptions options_;
  std::int64_t step_ = 0;
};

}  // namespace facestyle::nn
