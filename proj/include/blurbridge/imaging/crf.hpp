#pragma once

#include <cmath>

#include "blurbridge/imaging/image.hpp"

namespace blurbridge {

/// Gamma-curve camera response: radiance r maps to pixel value r^(1/gamma).
struct CameraResponse {
  double gamma = 2.2;

  static CameraResponse identity() { return {1.0}; }

  double apply(double v) const { return gamma == 1.0 ? v : std::pow(v, 1.0 / gamma); }
  double invert(double v) const { return gamma == 1.0 ? v : std::pow(v, gamma); }
};

inline Image crf_apply(const Image& img, const CameraResponse& crf) {
  Image out = img;
  for (double& v : out.values()) v = crf.apply(std::clamp(v, 0.0, 1.0));
  return out;
}

inline Image crf_invert(const Image& img, const CameraResponse& crf) {
  Image out = img;
  for (double& v : out.values()) v = crf.invert(std::clamp(v, 0.0, 1.0));
  return out;
}

}  // namespace blurbridge
