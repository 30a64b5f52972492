#pragma once

#include <unistd.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <string>
#include <vector>

#include "facestyle/autodiff.hpp"
#include "facestyle/random.hpp"

namespace testutil {

namespace fs = std::filesystem;
using facestyle::ad::Array;
using facestyle::ad::Shape;
using facestyle::ad::Var;

inline Array random_array(int n, std::uint64_t seed, double scale = 1.0) {
  facestyle::Rng rng(seed);
  Array a(n);
  for (auto& v : a) v = scale * facestyle::normal(rng);
  return a;
}

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag) {
    path_ = fs::temp_directory_path() /
            ("facestyle_" + tag + "_" + std::to_string(::getpid()) +
             "_" + std::to_string(reinterpret_cast<std::uintptr_t>(this)));
    fs::remove_all(path_);
    fs::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    fs::remove_all(path_, ec);
  }
  const fs::path& path() const { return path_; }
  fs::path operator/(const std::string& p) const { return path_ / p; }

 private:
  fs::path path_;
};

inline std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Max over every input entry of |analytic - numeric| / max(|analytic|, |numeric|, floor),
// with central differences of step h on the scalar f.
using ScalarFn = std::function<Var(const std::vector<Var>&)>;

inline double gradient_error(const ScalarFn& f, const std::vector<Array>& values,
                             const std::vector<Shape>& shapes, double h = 1e-5,
                             double floor = 1e-5) {
  std::vector<Var> params;
  for (std::size_t i = 0; i < values.size(); ++i) params.push_back(Var::parameter(values[i], shapes[i]));
  Var out = f(params);
  out.backward();
  double worst = 0.0;
  for (std::size_t i = 0; i < values.size(); ++i) {
    const Array analytic = params[i].grad();
    for (Eigen::Index k = 0; k < values[i].size(); ++k) {
      auto eval = [&](double delta) {
        std::vector<Var> consts;
        for (std::size_t j = 0; j < values.size(); ++j) {
          Array v = values[j];
          if (j == i) v(k) += delta;
          consts.push_back(Var::constant(v, shapes[j]));
        }
        return f(consts).item();
      };
      const double numeric = (eval(h) - eval(-h)) / (2 * h);
      const double a = analytic.size() ? analytic(k) : 0.0;
      const double err = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), floor});
      worst = std::max(worst, err);
    }
  }
  return worst;
}

// Reduces any output to a scalar through fixed random weights.
inline Var weighted_sum(const Var& x, std::uint64_t seed = 99) {
  return facestyle::ad::sum(x * Var::constant(random_array(x.size(), seed), x.shape()));
}

}  // namespace testutil
