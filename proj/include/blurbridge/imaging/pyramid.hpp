#pragma once

#include <string>
#include <vector>

#include "blurbridge/imaging/image.hpp"

namespace blurbridge {

/// Coarse-to-fine stack of images. levels[0] is the full-resolution source.
struct ImagePyramid {
  std::vector<Image> levels;

  int size() const noexcept { return static_cast<int>(levels.size()); }
  const Image& operator[](int i) const { return levels.at(static_cast<std::size_t>(i)); }
  Image& operator[](int i) { return levels.at(static_cast<std::size_t>(i)); }
};

/// 2x area-average downsampling; odd trailing rows/columns average the pixels available.
inline Image downsample_area(const Image& src) {
  const int h = (src.height() + 1) / 2;
  const int w = (src.width() + 1) / 2;
  Image dst(h, w);
  for (int c = 0; c < Image::channels; ++c) {
    for (int y = 0; y < h; ++y) {
      for (int x = 0; x < w; ++x) {
        double sum = 0.0;
        int count = 0;
        for (int dy = 0; dy < 2; ++dy) {
          for (int dx = 0; dx < 2; ++dx) {
            const int sy = 2 * y + dy, sx = 2 * x + dx;
            if (sy < src.height() && sx < src.width()) {
              sum += src(c, sy, sx);
              ++count;
            }
          }
        }
        dst(c, y, x) = sum / count;
      }
    }
  }
  return dst;
}

inline ImagePyramid build_pyramid(const Image& img, int levels) {
  if (levels < 1) throw InvalidRangeError("pyramid level count must be >= 1");
  ImagePyramid pyr;
  pyr.levels.reserve(static_cast<std::size_t>(levels));
  pyr.levels.push_back(img);
  for (int i = 1; i < levels; ++i) {
    const Image& prev = pyr.levels.back();
    if ((prev.height() + 1) / 2 < Image::min_side || (prev.width() + 1) / 2 < Image::min_side) {
      throw TooSmallError("pyramid level " + std::to_string(i + 1) + " of a " +
                          std::to_string(img.height()) + "x" + std::to_string(img.width()) +
                          " image would fall below 8 px");
    }
    pyr.levels.push_back(downsample_area(prev));
  }
  return pyr;
}

}  // namespace blurbridge
