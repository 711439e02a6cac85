#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "blurbridge/imaging/image.hpp"

#include "blurbridge/nn/tensor.hpp"

namespace blurbridge::nn {

inline constexpr double leaky_slope = 0.2;

template <typename T>
Tensor<T> leaky_relu(Tensor<T> x) {
  for (T& v : x.data) v = v > T(0) ? v : static_cast<T>(leaky_slope) * v;
  return x;
}

/// Multiplies `g` in place by the leaky-ReLU derivative evaluated at pre-activation `z`.
template <typename T>
Tensor<T> leaky_relu_backward(const Tensor<T>& z, Tensor<T> g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(z.data[i] > T(0))) g.data[i] *= static_cast<T>(leaky_slope);
  return g;
}

template <typename T>
Tensor<T> relu(Tensor<T> x) {
  for (T& v : x.data) v = std::max(v, T(0));
  return x;
}

template <typename T>
Tensor<T> relu_backward(const Tensor<T>& z, Tensor<T> g) {
  for (std::size_t i = 0; i < g.size(); ++i)
    if (!(z.data[i] > T(0))) g.data[i] = T(0);
  return g;
}

/// Nearest-neighbour 2x upsampling.
template <typename T>
Tensor<T> upsample2x(const Tensor<T>& x) {
  Tensor<T> y(x.n, x.c, 2 * x.h, 2 * x.w);
  for (int i = 0; i < x.n; ++i)
    for (int c = 0; c < x.c; ++c)
      for (int yy = 0; yy < y.h; ++yy)
        for (int xx = 0; xx < y.w; ++xx) y(i, c, yy, xx) = x(i, c, yy / 2, xx / 2);
  return y;
}

template <typename T>
Tensor<T> upsample2x_backward(const Tensor<T>& g) {
  Tensor<T> gx(g.n, g.c, g.h / 2, g.w / 2);
  for (int i = 0; i < g.n; ++i)
    for (int c = 0; c < g.c; ++c)
      for (int yy = 0; yy < g.h; ++yy)
        for (int xx = 0; xx < g.w; ++xx) gx(i, c, yy / 2, xx / 2) += g(i, c, yy, xx);
  return gx;
}

/// Logistic function of the logit clamped to [-limit, limit].
namespace detail {

// Mean over a (2r+1)-tap window along one axis with reflect-101 borders, and its adjoint.
template <typename T>
void box_pass(const T* src, T* dst, int h, int w, int r, bool along_x, bool adjoint) {
  const T inv = T(1) / static_cast<T>(2 * r + 1);
  const int n = along_x ? w : h;
  if (adjoint) std::fill(dst, dst + static_cast<std::size_t>(h) * w, T(0));
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x) {
      const int i = along_x ? x : y;
      T acc = T(0);
      for (int d = -r; d <= r; ++d) {
        const int j = reflect_index(i + d, n);
        const std::size_t at = along_x ? static_cast<std::size_t>(y) * w + j : static_cast<std::size_t>(j) * w + x;
        if (adjoint)
          dst[at] += src[static_cast<std::size_t>(y) * w + x] * inv;
        else
          acc += src[at];
      }
      if (!adjoint) dst[static_cast<std::size_t>(y) * w + x] = acc * inv;
    }
}

}  // namespace detail

/// Fixed high-pass filter gain * (x - box(x)) with a (2r+1)^2 reflect-padded box mean.
/// Removes flat colour content so only local edge profiles remain.
template <typename T>
Tensor<T> highpass(const Tensor<T>& x, T gain, int r) {
  Tensor<T> out = x;
  std::vector<T> tmp(static_cast<std::size_t>(x.h) * x.w), box(tmp.size());
  for (int p = 0; p < x.n * x.c; ++p) {
    const T* src = x.data.data() + static_cast<std::size_t>(p) * x.plane();
    T* dst = out.data.data() + static_cast<std::size_t>(p) * x.plane();
    detail::box_pass(src, tmp.data(), x.h, x.w, r, true, false);
    detail::box_pass(tmp.data(), box.data(), x.h, x.w, r, false, false);
    for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] = gain * (src[i] - box[i]);
  }
  return out;
}

/// Adjoint of highpass: maps a gradient on the filtered image to the raw image.
template <typename T>
Tensor<T> highpass_adjoint(const Tensor<T>& g, T gain, int r) {
  Tensor<T> out = g;
  std::vector<T> tmp(static_cast<std::size_t>(g.h) * g.w), box(tmp.size());
  for (int p = 0; p < g.n * g.c; ++p) {
    const T* src = g.data.data() + static_cast<std::size_t>(p) * g.plane();
    T* dst = out.data.data() + static_cast<std::size_t>(p) * g.plane();
    detail::box_pass(src, tmp.data(), g.h, g.w, r, false, true);
    detail::box_pass(tmp.data(), box.data(), g.h, g.w, r, true, true);
    for (std::size_t i = 0; i < tmp.size(); ++i) dst[i] = gain * (src[i] - box[i]);
  }
  return out;
}

template <typename T>
T clamped_sigmoid(T z, T limit) {
  const T c = std::clamp(z, -limit, limit);
  return T(1) / (T(1) + std::exp(-c));
}

}  // namespace blurbridge::nn
