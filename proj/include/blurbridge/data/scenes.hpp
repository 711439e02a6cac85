#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "blurbridge/imaging/image.hpp"
#include "blurbridge/rng.hpp"

namespace blurbridge::data {

/// Procedural scene: a two-colour linear gradient background with 6-13 overlaid rectangles,
/// ellipses and thin bars at random positions, sizes, orientations and colours. The hard
/// edges give blur something to act on; the gradient gives smooth regions.
inline Image render_scene(std::uint64_t seed, int side) {
  Rng rng(seed);
  Image img(side, side);
  double c0[3], c1[3];
  for (double& v : c0) v = rng.uniform(0.2, 0.8);
  for (double& v : c1) v = rng.uniform(0.2, 0.8);
  const double a = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double ca = std::cos(a), sa = std::sin(a);
  // gradient parameter normalised to [0,1] over the canvas
  double tmin = 1e300, tmax = -1e300;
  for (int y : {0, side - 1})
    for (int x : {0, side - 1}) {
      const double t = ca * x + sa * y;
      tmin = std::min(tmin, t);
      tmax = std::max(tmax, t);
    }
  for (int y = 0; y < side; ++y)
    for (int x = 0; x < side; ++x) {
      const double t = (ca * x + sa * y - tmin) / (tmax - tmin + 1e-9);
      for (int c = 0; c < 3; ++c) img(c, y, x) = c0[c] * (1 - t) + c1[c] * t;
    }
  const int shapes = 6 + static_cast<int>(rng.below(8));
  for (int s = 0; s < shapes; ++s) {
    double col[3];
    for (double& v : col) v = rng.uniform();
    const int kind = static_cast<int>(rng.below(3));
    const double cx = rng.uniform(0, side), cy = rng.uniform(0, side);
    const double r1 = rng.uniform(4, 20), r2 = rng.uniform(4, 20);
    const double th = rng.uniform(0, std::numbers::pi);
    const double ct = std::cos(th), st = std::sin(th);
    for (int y = 0; y < side; ++y)
      for (int x = 0; x < side; ++x) {
        const double dx = x - cx, dy = y - cy;
        const double u = ct * dx + st * dy, v = -st * dx + ct * dy;
        bool inside = false;
        if (kind == 0) inside = std::abs(u) < r1 && std::abs(v) < r2;
        else if (kind == 1) inside = (u / r1) * (u / r1) + (v / r2) * (v / r2) < 1;
        else inside = std::abs(u) < r1 && std::abs(v) < 1.5;
        if (inside)
          for (int c = 0; c < 3; ++c) img(c, y, x) = col[c];
      }
  }
  return img;
}

inline Image crop(const Image& img, int y0, int x0, int h, int w) {
  if (y0 < 0 || x0 < 0 || y0 + h > img.height() || x0 + w > img.width()) {
    throw TooSmallError("crop window " + std::to_string(h) + "x" + std::to_string(w) + " at (" +
                        std::to_string(y0) + "," + std::to_string(x0) + ") exceeds the image");
  }
  Image out(h, w);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) out(c, y, x) = img(c, y0 + y, x0 + x);
  return out;
}

/// The frames of one scene are overlapping views (random crops) of the same canvas.
inline std::vector<Image> scene_frames(std::uint64_t seed, int canvas, int frame, int count) {
  if (frame > canvas) throw InvalidRangeError("frame side exceeds scene canvas");
  const Image full = render_scene(seed, canvas);
  Rng rng(Rng::derive(seed, 0xF7A3E));
  std::vector<Image> out;
  for (int i = 0; i < count; ++i) {
    const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas - frame + 1)));
    const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(canvas - frame + 1)));
    out.push_back(crop(full, oy, ox, frame, frame));
  }
  return out;
}

}  // namespace blurbridge::data
