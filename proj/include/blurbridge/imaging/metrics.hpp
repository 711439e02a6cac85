#pragma once

#include <array>
#include <cmath>
#include <vector>

#include "blurbridge/imaging/image.hpp"

namespace blurbridge {

inline constexpr double psnr_cap_db = 100.0;

inline double mse(const Image& a, const Image& b) {
  require_same_shape(a, b, "mse");
  auto va = a.values(), vb = b.values();
  double s = 0.0;
  for (std::size_t i = 0; i < va.size(); ++i) {
    const double d = va[i] - vb[i];
    s += d * d;
  }
  return s / static_cast<double>(va.size());
}

/// Peak-1 PSNR over all channels, capped at 100 dB.
inline double psnr(const Image& a, const Image& b) {
  const double m = mse(a, b);
  if (m < 1e-10) return psnr_cap_db;
  return 10.0 * std::log10(1.0 / m);
}

struct SsimParams {
  int window = 11;
  double sigma = 1.5;
  double k1 = 0.01;
  double k2 = 0.03;
  double peak = 1.0;
};

namespace detail {

inline std::vector<double> gaussian_window_1d(int size, double sigma) {
  std::vector<double> w(static_cast<std::size_t>(size));
  const int r = size / 2;
  double s = 0.0;
  for (int i = 0; i < size; ++i) {
    w[i] = std::exp(-0.5 * (i - r) * (i - r) / (sigma * sigma));
    s += w[i];
  }
  for (double& v : w) v /= s;
  return w;
}

// Separable "valid" filtering of a single plane.
inline std::vector<double> filter_valid(const std::vector<double>& src, int h, int w,
                                        const std::vector<double>& win) {
  const int k = static_cast<int>(win.size());
  const int oh = h - k + 1, ow = w - k + 1;
  std::vector<double> tmp(static_cast<std::size_t>(h) * ow);
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += win[i] * src[y * w + x + i];
      tmp[y * ow + x] = s;
    }
  }
  std::vector<double> out(static_cast<std::size_t>(oh) * ow);
  for (int y = 0; y < oh; ++y) {
    for (int x = 0; x < ow; ++x) {
      double s = 0.0;
      for (int i = 0; i < k; ++i) s += win[i] * tmp[(y + i) * ow + x];
      out[y * ow + x] = s;
    }
  }
  return out;
}

}  // namespace detail

/// Mean SSIM on BT.601 luminance with a Gaussian window, over window positions fully
/// inside the image.
inline double ssim(const Image& a, const Image& b, const SsimParams& p = {}) {
  require_same_shape(a, b, "ssim");
  const int h = a.height(), w = a.width();
  if (h < p.window || w < p.window) {
    throw TooSmallError("ssim needs both sides >= " + std::to_string(p.window));
  }
  const auto la = luminance(a), lb = luminance(b);
  std::vector<double> aa(la.size()), bb(la.size()), ab(la.size());
  for (std::size_t i = 0; i < la.size(); ++i) {
    aa[i] = la[i] * la[i];
    bb[i] = lb[i] * lb[i];
    ab[i] = la[i] * lb[i];
  }
  const auto win = detail::gaussian_window_1d(p.window, p.sigma);
  const auto mu_a = detail::filter_valid(la, h, w, win);
  const auto mu_b = detail::filter_valid(lb, h, w, win);
  const auto e_aa = detail::filter_valid(aa, h, w, win);
  const auto e_bb = detail::filter_valid(bb, h, w, win);
  const auto e_ab = detail::filter_valid(ab, h, w, win);
  const double c1 = (p.k1 * p.peak) * (p.k1 * p.peak);
  const double c2 = (p.k2 * p.peak) * (p.k2 * p.peak);
  double total = 0.0;
  for (std::size_t i = 0; i < mu_a.size(); ++i) {
    const double ma = mu_a[i], mb = mu_b[i];
    const double va = e_aa[i] - ma * ma;
    const double vb = e_bb[i] - mb * mb;
    const double cov = e_ab[i] - ma * mb;
    total += ((2 * ma * mb + c1) * (2 * cov + c2)) / ((ma * ma + mb * mb + c1) * (va + vb + c2));
  }
  return total / static_cast<double>(mu_a.size());
}

/// Population variance of the 4-neighbour Laplacian response on luminance, reflect-101 padded.
inline double laplacian_variance(const Image& img) {
  const int h = img.height(), w = img.width();
  const auto lum = luminance(img);
  auto at = [&](int y, int x) { return lum[reflect_index(y, h) * w + reflect_index(x, w)]; };
  double sum = 0.0, sum_sq = 0.0;
  for (int y = 0; y < h; ++y) {
    for (int x = 0; x < w; ++x) {
      const double r = at(y - 1, x) + at(y + 1, x) + at(y, x - 1) + at(y, x + 1) - 4.0 * at(y, x);
      sum += r;
      sum_sq += r * r;
    }
  }
  const double n = static_cast<double>(h) * w;
  const double mean = sum / n;
  return std::max(0.0, sum_sq / n - mean * mean);
}

}  // namespace blurbridge
