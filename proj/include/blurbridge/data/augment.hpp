#pragma once

#include <array>
#include <cstdint>

#include "blurbridge/data/scenes.hpp"
#include "blurbridge/json_util.hpp"

namespace blurbridge::data {

struct AugmentationPolicy {
  int crop = 64;
  double hflip = 0.5;        // probability of a horizontal flip
  double vflip = 0.5;        // probability of a vertical flip
  bool rotate = true;        // uniform multiple of 90 degrees
  double jitter_scale = 0.05;   // per-channel gain drawn from [1 - s, 1 + s]
  double jitter_offset = 0.02;  // per-channel offset drawn from [-o, o]

  static AugmentationPolicy none(int crop) { return {crop, 0.0, 0.0, false, 0.0, 0.0}; }

  void validate() const {
    if (crop < Image::min_side) throw InvalidRangeError("augmentation crop below 8 px");
    if (!(hflip >= 0 && hflip <= 1 && vflip >= 0 && vflip <= 1)) throw InvalidRangeError("flip probabilities must lie in [0,1]");
    if (!(jitter_scale >= 0 && jitter_scale < 1 && jitter_offset >= 0)) throw InvalidRangeError("invalid colour jitter");
  }
  friend bool operator==(const AugmentationPolicy&, const AugmentationPolicy&) = default;
};

inline void to_json(Json& j, const AugmentationPolicy& p) {
  j = Json{{"crop", p.crop},   {"hflip", p.hflip},       {"vflip", p.vflip},
           {"rotate", p.rotate}, {"jitter_scale", p.jitter_scale}, {"jitter_offset", p.jitter_offset}};
}
inline AugmentationPolicy augmentation_from_json(const Json& j, const std::string& where) {
  reject_unknown_keys(j, {"crop", "hflip", "vflip", "rotate", "jitter_scale", "jitter_offset"}, where);
  AugmentationPolicy p;
  read_opt(j, "crop", p.crop, where);
  read_opt(j, "hflip", p.hflip, where);
  read_opt(j, "vflip", p.vflip, where);
  read_opt(j, "rotate", p.rotate, where);
  read_opt(j, "jitter_scale", p.jitter_scale, where);
  read_opt(j, "jitter_offset", p.jitter_offset, where);
  p.validate();
  return p;
}

inline Image flip_horizontal(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out(c, y, x) = img(c, y, img.width() - 1 - x);
  return out;
}

inline Image flip_vertical(const Image& img) {
  Image out = img;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out(c, y, x) = img(c, img.height() - 1 - y, x);
  return out;
}

/// Counter-clockwise rotation by quarter * 90 degrees.
inline Image rotate90(const Image& img, int quarter) {
  quarter = ((quarter % 4) + 4) % 4;
  if (quarter == 0) return img;
  const int h = img.height(), w = img.width();
  Image out = (quarter == 2) ? Image(h, w) : Image(w, h);
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        if (quarter == 1) out(c, w - 1 - x, y) = img(c, y, x);
        else if (quarter == 2) out(c, h - 1 - y, w - 1 - x) = img(c, y, x);
        else out(c, x, h - 1 - y) = img(c, y, x);
      }
  return out;
}

/// v -> clamp(scale_c * v + offset_c).
inline Image color_jitter(const Image& img, const std::array<double, 3>& scale, const std::array<double, 3>& offset) {
  Image out = img;
  for (int c = 0; c < 3; ++c)
    for (int y = 0; y < img.height(); ++y)
      for (int x = 0; x < img.width(); ++x) out(c, y, x) = scale[c] * img(c, y, x) + offset[c];
  return out.clamp();
}

/// crop -> flip -> rotate -> jitter, every draw taken from one seeded stream.
inline Image augment(const Image& img, const AugmentationPolicy& p, std::uint64_t seed) {
  p.validate();
  if (p.crop > img.height() || p.crop > img.width()) {
    throw TooSmallError("crop " + std::to_string(p.crop) + " exceeds image " + std::to_string(img.height()) + "x" +
                        std::to_string(img.width()));
  }
  Rng rng(seed);
  const int oy = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.height() - p.crop + 1)));
  const int ox = static_cast<int>(rng.below(static_cast<std::uint64_t>(img.width() - p.crop + 1)));
  Image out = crop(img, oy, ox, p.crop, p.crop);
  if (rng.bernoulli(p.hflip)) out = flip_horizontal(out);
  if (rng.bernoulli(p.vflip)) out = flip_vertical(out);
  if (p.rotate) out = rotate90(out, static_cast<int>(rng.below(4)));
  if (p.jitter_scale > 0 || p.jitter_offset > 0) {
    std::array<double, 3> s{}, o{};
    for (int c = 0; c < 3; ++c) {
      s[c] = rng.uniform(1.0 - p.jitter_scale, 1.0 + p.jitter_scale);
      o[c] = rng.uniform(-p.jitter_offset, p.jitter_offset);
    }
    out = color_jitter(out, s, o);
  }
  return out;
}

}  // namespace blurbridge::data
