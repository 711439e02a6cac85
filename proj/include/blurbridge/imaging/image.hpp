#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "blurbridge/error.hpp"

namespace blurbridge {

/// Three-channel image with real intensities, stored planar (channel, row, column).
///
/// Public operations keep values finite and inside [0,1]; anything that could
/// leave that range clamps explicitly via clamp().
class Image {
 public:
  static constexpr int channels = 3;
  static constexpr int min_side = 8;

  Image() = default;

  Image(int height, int width, double fill = 0.0) : height_(height), width_(width) {
    if (height < min_side || width < min_side) {
      throw TooSmallError("image must be at least 8x8, got " + std::to_string(height) + "x" +
                          std::to_string(width));
    }
    data_.assign(static_cast<std::size_t>(channels) * height * width, fill);
  }

  int height() const noexcept { return height_; }
  int width() const noexcept { return width_; }
  std::size_t plane_size() const noexcept { return static_cast<std::size_t>(height_) * width_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(int c, int y, int x) noexcept { return data_[index(c, y, x)]; }
  double operator()(int c, int y, int x) const noexcept { return data_[index(c, y, x)]; }

  std::span<double> plane(int c) noexcept { return {data_.data() + c * plane_size(), plane_size()}; }
  std::span<const double> plane(int c) const noexcept {
    return {data_.data() + c * plane_size(), plane_size()};
  }

  std::span<double> values() noexcept { return data_; }
  std::span<const double> values() const noexcept { return data_; }

  bool same_shape(const Image& other) const noexcept {
    return height_ == other.height_ && width_ == other.width_;
  }

  /// True when every value is finite and inside [0,1].
  bool in_range() const noexcept {
    return std::all_of(data_.begin(), data_.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; });
  }

  Image& clamp() noexcept {
    for (double& v : data_) v = std::isfinite(v) ? std::clamp(v, 0.0, 1.0) : 0.0;
    return *this;
  }

  double mean() const noexcept {
    double s = 0.0;
    for (double v : data_) s += v;
    return data_.empty() ? 0.0 : s / static_cast<double>(data_.size());
  }

  friend bool operator==(const Image& a, const Image& b) {
    return a.height_ == b.height_ && a.width_ == b.width_ && a.data_ == b.data_;
  }

 private:
  std::size_t index(int c, int y, int x) const noexcept {
    return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
  }

  int height_ = 0;
  int width_ = 0;
  std::vector<double> data_;
};

inline void require_same_shape(const Image& a, const Image& b, const char* what) {
  if (!a.same_shape(b)) {
    throw ShapeMismatchError(std::string(what) + ": image shapes differ (" +
                             std::to_string(a.height()) + "x" + std::to_string(a.width()) +
                             " vs " + std::to_string(b.height()) + "x" +
                             std::to_string(b.width()) + ")");
  }
}

/// BT.601 luma.
inline std::vector<double> luminance(const Image& img) {
  std::vector<double> out(img.plane_size());
  auto r = img.plane(0), g = img.plane(1), b = img.plane(2);
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = 0.299 * r[i] + 0.587 * g[i] + 0.114 * b[i];
  return out;
}

/// Index into [0, n) with reflect-101 boundary handling (edge pixel not repeated).
inline int reflect_index(int i, int n) noexcept {
  if (n == 1) return 0;
  const int period = 2 * n - 2;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - i;
}

}  // namespace blurbridge
