#pragma once

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>
#include <vector>

#include "blurbridge/error.hpp"

namespace blurbridge {

/// Square, odd-sized, nonnegative convolution kernel whose weights sum to one.
class BlurKernel {
 public:
  BlurKernel() : BlurKernel(delta()) {}

  BlurKernel(int size, std::vector<double> weights) : size_(size), weights_(std::move(weights)) {
    if (size < 1 || size % 2 == 0) throw InvalidRangeError("kernel size must be odd and positive");
    if (weights_.size() != static_cast<std::size_t>(size) * size) {
      throw ShapeMismatchError("kernel weight count does not match size");
    }
  }

  static BlurKernel delta() { return BlurKernel(1, {1.0}); }

  /// Sampled isotropic Gaussian. size 0 picks 2*ceil(3 sigma)+1; sigma 0 yields a delta.
  static BlurKernel gaussian(double sigma, int size = 0) {
    if (sigma < 0) throw InvalidRangeError("gaussian sigma must be >= 0");
    if (size == 0) size = 2 * static_cast<int>(std::ceil(3.0 * sigma)) + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
    const int r = size / 2;
    if (sigma == 0.0) {
      w[r * size + r] = 1.0;
      return BlurKernel(size, std::move(w));
    }
    for (int y = 0; y < size; ++y) {
      for (int x = 0; x < size; ++x) {
        const double d2 = (y - r) * (y - r) + (x - r) * (x - r);
        w[y * size + x] = std::exp(-d2 / (2.0 * sigma * sigma));
      }
    }
    return BlurKernel(size, std::move(w)).normalized();
  }

  /// Uniform motion along a centred segment of the given length; the segment is
  /// densely sampled and each sample lands on its nearest pixel.
  static BlurKernel linear_motion(double length, double angle_deg) {
    if (length < 1.0) throw InvalidRangeError("motion length must be >= 1");
    const double theta = angle_deg * std::numbers::pi / 180.0;
    const double c = std::cos(theta), s = std::sin(theta);
    const int samples = static_cast<int>(std::ceil(length * 64.0));
    std::vector<std::pair<int, int>> hits;
    hits.reserve(samples);
    int r = 0;
    for (int i = 0; i < samples; ++i) {
      const double t = -length / 2.0 + (i + 0.5) * length / samples;
      // Snap tiny floating-point residue so axis-aligned lines stay on one row or column.
      const double px = std::abs(t * c) < 1e-12 ? 0.0 : t * c;
      const double py = std::abs(t * s) < 1e-12 ? 0.0 : t * s;
      const int ix = static_cast<int>(std::lround(px));
      const int iy = static_cast<int>(std::lround(py));
      hits.emplace_back(iy, ix);
      r = std::max({r, std::abs(ix), std::abs(iy)});
    }
    const int size = 2 * r + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
    for (auto [iy, ix] : hits) w[(iy + r) * size + (ix + r)] += 1.0;
    return BlurKernel(size, std::move(w)).normalized();
  }

  /// Average of point spreads at sub-pixel positions, splatted bilinearly.
  static BlurKernel from_trajectory(const std::vector<std::pair<double, double>>& points) {
    if (points.empty()) throw InvalidRangeError("trajectory needs at least one point");
    double extent = 0.0;
    for (auto [py, px] : points) extent = std::max({extent, std::abs(py), std::abs(px)});
    const int r = static_cast<int>(std::ceil(extent));
    const int size = 2 * r + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
    for (auto [py, px] : points) {
      const double fy = py + r, fx = px + r;
      const int y0 = static_cast<int>(std::floor(fy)), x0 = static_cast<int>(std::floor(fx));
      const double ay = fy - y0, ax = fx - x0;
      auto add = [&](int y, int x, double v) {
        if (v > 0.0 && y >= 0 && y < size && x >= 0 && x < size) w[y * size + x] += v;
      };
      add(y0, x0, (1 - ay) * (1 - ax));
      add(y0, x0 + 1, (1 - ay) * ax);
      add(y0 + 1, x0, ay * (1 - ax));
      add(y0 + 1, x0 + 1, ay * ax);
    }
    return BlurKernel(size, std::move(w)).normalized();
  }

  int size() const noexcept { return size_; }
  int radius() const noexcept { return size_ / 2; }
  const std::vector<double>& weights() const noexcept { return weights_; }
  double operator()(int y, int x) const noexcept { return weights_[y * size_ + x]; }
  /// Weight at offset (dy, dx) from the centre; zero outside the support.
  double at_offset(int dy, int dx) const noexcept {
    const int r = radius();
    if (std::abs(dy) > r || std::abs(dx) > r) return 0.0;
    return weights_[(dy + r) * size_ + (dx + r)];
  }

  double sum() const noexcept {
    double s = 0.0;
    for (double v : weights_) s += v;
    return s;
  }

  bool is_valid(double tol = 1e-8) const noexcept {
    return std::all_of(weights_.begin(), weights_.end(),
                       [](double v) { return std::isfinite(v) && v >= 0.0; }) &&
           std::abs(sum() - 1.0) <= tol;
  }

  BlurKernel normalized() const {
    const double s = sum();
    if (!(s > 0.0)) throw DegenerateInputError("kernel has no positive mass");
    BlurKernel out = *this;
    for (double& v : out.weights_) v /= s;
    return out;
  }

  /// Same kernel zero-padded (centred) to a larger odd size.
  BlurKernel embedded(int size) const {
    if (size < size_ || size % 2 == 0) throw InvalidRangeError("cannot embed into smaller kernel");
    std::vector<double> w(static_cast<std::size_t>(size) * size, 0.0);
    const int off = (size - size_) / 2;
    for (int y = 0; y < size_; ++y)
      for (int x = 0; x < size_; ++x) w[(y + off) * size + x + off] = weights_[y * size_ + x];
    return BlurKernel(size, std::move(w));
  }

  /// Kernel with the same centre and the outer ring of zero weights removed.
  BlurKernel trimmed() const {
    int r = radius();
    while (r > 0) {
      bool ring_zero = true;
      for (int d = -r; d <= r && ring_zero; ++d) {
        ring_zero = at_offset(-r, d) == 0.0 && at_offset(r, d) == 0.0 && at_offset(d, -r) == 0.0 &&
                    at_offset(d, r) == 0.0;
      }
      if (!ring_zero) break;
      --r;
    }
    const int size = 2 * r + 1;
    std::vector<double> w(static_cast<std::size_t>(size) * size);
    for (int y = -r; y <= r; ++y)
      for (int x = -r; x <= r; ++x) w[(y + r) * size + x + r] = at_offset(y, x);
    return BlurKernel(size, std::move(w));
  }

  friend bool operator==(const BlurKernel& a, const BlurKernel& b) = default;

 private:
  int size_ = 1;
  std::vector<double> weights_;
};

/// L2 distance between two kernels after centring both in a common support.
inline double kernel_l2(const BlurKernel& a, const BlurKernel& b) {
  const int r = std::max(a.radius(), b.radius());
  double s = 0.0;
  for (int y = -r; y <= r; ++y) {
    for (int x = -r; x <= r; ++x) {
      const double d = a.at_offset(y, x) - b.at_offset(y, x);
      s += d * d;
    }
  }
  return std::sqrt(s);
}

}  // namespace blurbridge
