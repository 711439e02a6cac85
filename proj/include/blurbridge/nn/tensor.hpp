#pragma once

#include <algorithm>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "blurbridge/error.hpp"
#include "blurbridge/imaging/image.hpp"

namespace blurbridge::nn {

/// Dense NCHW tensor.
template <typename T>
struct Tensor {
  int n = 0, c = 0, h = 0, w = 0;
  std::vector<T> data;

  Tensor() = default;
  Tensor(int n_, int c_, int h_, int w_, T fill = T(0))
      : n(n_), c(c_), h(h_), w(w_), data(static_cast<std::size_t>(n_) * c_ * h_ * w_, fill) {}

  std::size_t size() const noexcept { return data.size(); }
  std::size_t plane() const noexcept { return static_cast<std::size_t>(h) * w; }
  std::size_t sample_size() const noexcept { return static_cast<std::size_t>(c) * h * w; }

  T& operator()(int i, int ch, int y, int x) noexcept {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }
  T operator()(int i, int ch, int y, int x) const noexcept {
    return data[((static_cast<std::size_t>(i) * c + ch) * h + y) * w + x];
  }

  std::span<T> sample(int i) noexcept { return {data.data() + i * sample_size(), sample_size()}; }
  std::span<const T> sample(int i) const noexcept {
    return {data.data() + i * sample_size(), sample_size()};
  }

  bool same_shape(const Tensor& o) const noexcept { return n == o.n && c == o.c && h == o.h && w == o.w; }
  Tensor zeros_like() const { return Tensor(n, c, h, w); }
  void fill(T v) { std::fill(data.begin(), data.end(), v); }

  std::string shape_string() const {
    return std::to_string(n) + "x" + std::to_string(c) + "x" + std::to_string(h) + "x" +
           std::to_string(w);
  }
};

template <typename T>
void require_same_shape(const Tensor<T>& a, const Tensor<T>& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatchError(std::string(what) + ": tensor shapes " + a.shape_string() + " and " +
                             b.shape_string() + " differ");
  }
}

template <typename T>
Tensor<T>& operator+=(Tensor<T>& a, const Tensor<T>& b) {
  require_same_shape(a, b, "tensor add");
  for (std::size_t i = 0; i < a.size(); ++i) a.data[i] += b.data[i];
  return a;
}

template <typename T>
Tensor<T> operator+(Tensor<T> a, const Tensor<T>& b) {
  a += b;
  return a;
}

template <typename T>
Tensor<T> scaled(Tensor<T> a, T s) {
  for (T& v : a.data) v *= s;
  return a;
}

/// Stacks images into an N x 3 x H x W batch.
template <typename T>
Tensor<T> to_tensor(std::span<const Image> images) {
  if (images.empty()) throw EmptySetError("to_tensor: empty batch");
  const Image& first = images.front();
  Tensor<T> t(static_cast<int>(images.size()), Image::channels, first.height(), first.width());
  for (std::size_t i = 0; i < images.size(); ++i) {
    require_same_shape(images[i], first, "to_tensor");
    auto src = images[i].values();
    auto dst = t.sample(static_cast<int>(i));
    for (std::size_t j = 0; j < src.size(); ++j) dst[j] = static_cast<T>(src[j]);
  }
  return t;
}

template <typename T>
Tensor<T> to_tensor(const Image& img) {
  return to_tensor<T>(std::span<const Image>(&img, 1));
}

/// Extracts sample i as an image. Values are clamped into [0,1].
template <typename T>
Image to_image(const Tensor<T>& t, int i) {
  if (t.c != Image::channels) throw ShapeMismatchError("to_image: tensor must have 3 channels");
  Image img(t.h, t.w);
  auto src = t.sample(i);
  auto dst = img.values();
  for (std::size_t j = 0; j < dst.size(); ++j) dst[j] = static_cast<double>(src[j]);
  img.clamp();
  return img;
}

}  // namespace blurbridge::nn
