#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "blurbridge/blur/kernel.hpp"
#include "blurbridge/imaging/crf.hpp"
#include "blurbridge/imaging/image.hpp"
#include "blurbridge/rng.hpp"

namespace blurbridge {

/// Sharp/blurry pair. `kernel` is the ground-truth blur when it is known.
struct BlurPair {
  Image blurry;
  Image sharp;
  std::optional<BlurKernel> kernel;
};

/// Noise-free 2-D convolution y(p) = sum_q k(q) x(p - q), reflect-101 padded, unclamped.
inline Image convolve(const Image& x, const BlurKernel& k) {
  const int h = x.height(), w = x.width(), r = k.radius();
  if (k.size() >= h || k.size() >= w) {
    throw TooSmallError("kernel of size " + std::to_string(k.size()) + " does not fit a " +
                        std::to_string(h) + "x" + std::to_string(w) + " image");
  }
  // Reflect-padded plane so the inner loop is branch free.
  const int pw = w + 2 * r, ph = h + 2 * r;
  std::vector<double> padded(static_cast<std::size_t>(ph) * pw);
  Image y(h, w);
  for (int c = 0; c < Image::channels; ++c) {
    for (int py = 0; py < ph; ++py)
      for (int px = 0; px < pw; ++px)
        padded[py * pw + px] = x(c, reflect_index(py - r, h), reflect_index(px - r, w));
    auto out = y.plane(c);
    std::fill(out.begin(), out.end(), 0.0);
    for (int dy = -r; dy <= r; ++dy) {
      for (int dx = -r; dx <= r; ++dx) {
        const double wgt = k.at_offset(dy, dx);
        if (wgt == 0.0) continue;
        for (int yy = 0; yy < h; ++yy) {
          const double* src = &padded[(yy - dy + r) * pw + (r - dx)];
          double* dst = &out[static_cast<std::size_t>(yy) * w];
          for (int xx = 0; xx < w; ++xx) dst[xx] += wgt * src[xx];
        }
      }
    }
  }
  return y;
}

/// Forward blur model: convolution, additive i.i.d. Gaussian noise, explicit clamp.
inline Image apply_blur(const Image& x, const BlurKernel& k, double noise_sigma,
                        std::uint64_t seed) {
  Image y = convolve(x, k);
  if (noise_sigma > 0.0) {
    Rng rng(seed);
    for (double& v : y.values()) v += noise_sigma * rng.normal();
  }
  return y.clamp();
}

/// Averages frames in linear (inverse-CRF) space and maps the mean back through the CRF.
inline Image frame_average_blur(const std::vector<Image>& frames, const CameraResponse& crf) {
  if (frames.empty()) throw EmptySetError("frame_average_blur: no frames");
  Image acc(frames.front().height(), frames.front().width(), 0.0);
  for (const Image& f : frames) {
    require_same_shape(f, frames.front(), "frame_average_blur");
    auto dst = acc.values();
    auto src = f.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += crf.invert(src[i]);
  }
  const double n = static_cast<double>(frames.size());
  for (double& v : acc.values()) v = crf.apply(std::clamp(v / n, 0.0, 1.0));
  return acc;
}

/// Integer-shifted copy with reflect-101 borders; used to render multi-frame motion.
inline Image shift_image(const Image& img, int dy, int dx) {
  Image out(img.height(), img.width());
  for (int c = 0; c < Image::channels; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x)
        out(c, y, x) = img(c, reflect_index(y - dy, img.height()), reflect_index(x - dx, img.width()));
  return out;
}

}  // namespace blurbridge
