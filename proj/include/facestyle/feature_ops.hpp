#pragma once

// Scalar-generic kernels for channel-major (C, H, W) feature maps. These are
// shared by the value-level API in stylea.hpp and the autodiff ops.

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>

namespace facestyle {

template <typename Scalar>
using ArrayX = Eigen::Array<Scalar, Eigen::Dynamic, 1>;

template <typename Scalar>
using RowMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct SpatialShape {
  int channels = 0;
  int height = 0;
  int width = 0;
  int plane() const { return height * width; }
  int size() const { return channels * height * width; }
  bool operator==(const SpatialShape&) const = default;
};

namespace kernels {

// Instance normalization with an affine per-channel scale and bias. The
// denominator is sqrt(var + eps^2), so eps is in units of a standard
// deviation and constant channels map to zero instead of 0/0.
template <typename Scalar>
void adain_forward(const ArrayX<Scalar>& x, SpatialShape s, const ArrayX<Scalar>& scale,
                   const ArrayX<Scalar>& bias, Scalar eps, ArrayX<Scalar>& out,
                   ArrayX<Scalar>& normalized, ArrayX<Scalar>& inv_std) {
  const int plane = s.plane();
  out.resize(s.size());
  normalized.resize(s.size());
  inv_std.resize(s.channels);
  for (int c = 0; c < s.channels; ++c) {
    const auto xc = x.segment(c * plane, plane);
    const Scalar mean = xc.mean();
    const Scalar var = (xc - mean).square().mean();
    const Scalar inv = Scalar(1) / std::sqrt(var + eps * eps);
    inv_std(c) = inv;
    normalized.segment(c * plane, plane) = (xc - mean) * inv;
    out.segment(c * plane, plane) = scale(c) * normalized.segment(c * plane, plane) + bias(c);
  }
}

template <typename Scalar>
void adain_backward(const ArrayX<Scalar>& grad_out, SpatialShape s,
                    const ArrayX<Scalar>& scale, const ArrayX<Scalar>& normalized,
                    const ArrayX<Scalar>& inv_std, ArrayX<Scalar>* grad_x,
                    ArrayX<Scalar>* grad_scale, ArrayX<Scalar>* grad_bias) {
  const int plane = s.plane();
  for (int c = 0; c < s.channels; ++c) {
    const auto g = grad_out.segment(c * plane, plane);
    const auto xhat = normalized.segment(c * plane, plane);
    if (grad_bias) (*grad_bias)(c) += g.sum();
    if (grad_scale) (*grad_scale)(c) += (g * xhat).sum();
    if (grad_x) {
      const ArrayX<Scalar> gxhat = g * scale(c);
      const Scalar mean_g = gxhat.mean();
      const Scalar mean_gx = (gxhat * xhat).mean();
      grad_x->segment(c * plane, plane) += inv_std(c) * (gxhat - mean_g - xhat * mean_gx);
    }
  }
}

// Bilinear sample positions for one output pixel with border clamping.
template <typename Scalar>
struct BilinearTap {
  int x0, x1, y0, y1;
  Scalar wx, wy;
  bool clamped_x, clamped_y;
};

template <typename Scalar>
BilinearTap<Scalar> bilinear_tap(Scalar sx, Scalar sy, int height, int width) {
  BilinearTap<Scalar> tap{};
  const Scalar max_x = Scalar(width - 1);
  const Scalar max_y = Scalar(height - 1);
  tap.clamped_x = sx < Scalar(0) || sx > max_x;
  tap.clamped_y = sy < Scalar(0) || sy > max_y;
  sx = std::clamp(sx, Scalar(0), max_x);
  sy = std::clamp(sy, Scalar(0), max_y);
  tap.x0 = static_cast<int>(std::floor(sx));
  tap.y0 = static_cast<int>(std::floor(sy));
  tap.x1 = std::min(tap.x0 + 1, width - 1);
  tap.y1 = std::min(tap.y0 + 1, height - 1);
  tap.wx = sx - Scalar(tap.x0);
  tap.wy = sy - Scalar(tap.y0);
  return tap;
}

// out(c, y, x) = m(c, y + dy, x + dx); flow is (H, W, 2) with (dx, dy) pairs.
template <typename Scalar>
void warp_forward(const ArrayX<Scalar>& m, SpatialShape s, const ArrayX<Scalar>& flow,
                  ArrayX<Scalar>& out) {
  const int plane = s.plane();
  out.resize(s.size());
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const int p = y * s.width + x;
      const auto tap = bilinear_tap<Scalar>(Scalar(x) + flow(2 * p), Scalar(y) + flow(2 * p + 1),
                                            s.height, s.width);
      const int i00 = tap.y0 * s.width + tap.x0, i01 = tap.y0 * s.width + tap.x1;
      const int i10 = tap.y1 * s.width + tap.x0, i11 = tap.y1 * s.width + tap.x1;
      const Scalar w00 = (1 - tap.wx) * (1 - tap.wy), w01 = tap.wx * (1 - tap.wy);
      const Scalar w10 = (1 - tap.wx) * tap.wy, w11 = tap.wx * tap.wy;
      for (int c = 0; c < s.channels; ++c) {
        const Scalar* mc = m.data() + c * plane;
        out(c * plane + p) = w00 * mc[i00] + w01 * mc[i01] + w10 * mc[i10] + w11 * mc[i11];
      }
    }
  }
}

template <typename Scalar>
void warp_backward(const ArrayX<Scalar>& grad_out, const ArrayX<Scalar>& m, SpatialShape s,
                   const ArrayX<Scalar>& flow, ArrayX<Scalar>* grad_m,
                   ArrayX<Scalar>* grad_flow) {
  const int plane = s.plane();
  for (int y = 0; y < s.height; ++y) {
    for (int x = 0; x < s.width; ++x) {
      const int p = y * s.width + x;
      const auto tap = bilinear_tap<Scalar>(Scalar(x) + flow(2 * p), Scalar(y) + flow(2 * p + 1),
                                            s.height, s.width);
      const int i00 = tap.y0 * s.width + tap.x0, i01 = tap.y0 * s.width + tap.x1;
      const int i10 = tap.y1 * s.width + tap.x0, i11 = tap.y1 * s.width + tap.x1;
      const Scalar w00 = (1 - tap.wx) * (1 - tap.wy), w01 = tap.wx * (1 - tap.wy);
      const Scalar w10 = (1 - tap.wx) * tap.wy, w11 = tap.wx * tap.wy;
      Scalar gdx = 0, gdy = 0;
      for (int c = 0; c < s.channels; ++c) {
        const Scalar g = grad_out(c * plane + p);
        if (grad_m) {
          Scalar* gm = grad_m->data() + c * plane;
          gm[i00] += w00 * g;
          gm[i01] += w01 * g;
          gm[i10] += w10 * g;
          gm[i11] += w11 * g;
        }
        if (grad_flow) {
          const Scalar* mc = m.data() + c * plane;
          gdx += g * ((1 - tap.wy) * (mc[i01] - mc[i00]) + tap.wy * (mc[i11] - mc[i10]));
          gdy += g * ((1 - tap.wx) * (mc[i10] - mc[i00]) + tap.wx * (mc[i11] - mc[i01]));
        }
      }
      if (grad_flow) {
        if (!tap.clamped_x) (*grad_flow)(2 * p) += gdx;
        if (!tap.clamped_y) (*grad_flow)(2 * p + 1) += gdy;
      }
    }
  }
}

}  // namespace kernels
}  // namespace facestyle
